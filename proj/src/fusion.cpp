#include "wsdan/fusion.hpp"

#include <atomic>
#include <cmath>

namespace wsdan {

namespace {
std::atomic<size_t> g_clamp_count{0};

double clamped_log(double p) {
  if (p <= 0.0) {
    g_clamp_count.fetch_add(1, std::memory_order_relaxed);
    p = 1e-12;
  }
  return std::log(p);
}

void check_eps_target(size_t k, int target, double eps) {
  if (eps < 0.0 || eps >= 1.0) throw ContractError("smoothed_ce: eps must be in [0,1)");
  if (target < 0 || static_cast<size_t>(target) >= k) {
    throw ContractError("smoothed_ce: target " + std::to_string(target) + " out of " +
                        std::to_string(k) + " classes");
  }
}
}  // namespace

Tensor fuse(Tape& tape, const Tensor& v_out, const Tensor& q_out, const FusionParams& params,
            const std::vector<bool>& qmask) {
  if (v_out.cols() != q_out.cols()) {
    throw DimensionError("fuse: width mismatch " + v_out.shape_str() + " vs " + q_out.shape_str());
  }
  if (params.Wv.rows() != 1 || params.Wv.cols() != v_out.rows()) {
    throw DimensionError("fuse: Wv must be 1x" + std::to_string(v_out.rows()) + ", got " +
                         params.Wv.shape_str());
  }
  if (params.Wq.rows() != 1 || params.Wq.cols() != q_out.rows()) {
    throw DimensionError("fuse: Wq must be 1x" + std::to_string(q_out.rows()) + ", got " +
                         params.Wq.shape_str());
  }
  Tensor q_masked = row_mask_zero(tape, q_out, qmask);
  return add(tape, matmul(tape, params.Wv, v_out), matmul(tape, params.Wq, q_masked));
}

Tensor classify_logits(Tape& tape, const Tensor& z, const ClassifierParams& params) {
  Tensor hidden = relu(tape, add_row_broadcast(tape, matmul(tape, z, params.W1), params.b1));
  return add_row_broadcast(tape, matmul(tape, hidden, params.W2), params.b2);
}

AnswerDistribution make_distribution(const std::vector<double>& logits) {
  if (logits.empty()) throw ContractError("make_distribution: empty logits");
  AnswerDistribution d;
  d.logits = logits;
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  d.probs.resize(logits.size());
  for (size_t k = 0; k < logits.size(); ++k) {
    d.probs[k] = std::exp(logits[k] - mx);
    sum += d.probs[k];
  }
  for (double& p : d.probs) p /= sum;
  return d;
}

AnswerDistribution make_distribution(const Tensor& logits) {
  if (logits.rows() != 1) throw DimensionError("make_distribution: logits must be 1xN");
  return make_distribution(std::vector<double>(logits.data(), logits.data() + logits.size()));
}

int predict(const AnswerDistribution& dist) {
  if (dist.probs.empty()) throw ContractError("predict: empty distribution");
  int best = 0;
  for (size_t k = 1; k < dist.probs.size(); ++k) {
    if (dist.probs[k] > dist.probs[static_cast<size_t>(best)]) best = static_cast<int>(k);
  }
  return best;
}

double smoothed_ce(const AnswerDistribution& dist, int target, double eps) {
  const size_t k = dist.probs.size();
  check_eps_target(k, target, eps);
  const double u = eps / static_cast<double>(k);
  double loss = 0.0;
  for (size_t i = 0; i < k; ++i) {
    double q = u + (static_cast<size_t>(target) == i ? 1.0 - eps : 0.0);
    if (q == 0.0) continue;  // 0 * log(p) := 0
    loss -= q * clamped_log(dist.probs[i]);
  }
  return loss;
}

double smoothed_ce_decomposed(const AnswerDistribution& dist, int target, double eps) {
  const size_t k = dist.probs.size();
  check_eps_target(k, target, eps);
  double h_q = -clamped_log(dist.probs[static_cast<size_t>(target)]);
  if (eps == 0.0) return h_q;
  double h_u = 0.0;
  for (size_t i = 0; i < k; ++i) h_u -= clamped_log(dist.probs[i]);
  h_u /= static_cast<double>(k);
  return (1.0 - eps) * h_q + eps * h_u;
}

size_t smoothed_ce_clamp_count() { return g_clamp_count.load(std::memory_order_relaxed); }
void reset_smoothed_ce_clamp_count() { g_clamp_count.store(0, std::memory_order_relaxed); }

}  // namespace wsdan
