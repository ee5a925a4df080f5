#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "wsdan/fusion.hpp"
#include "wsdan/gradcheck.hpp"

using namespace wsdan;

namespace {

Tensor randn(size_t r, size_t c, Rng& rng, bool rg = false) {
  Tensor t = Tensor::zeros(r, c, rg);
  for (size_t i = 0; i < t.size(); ++i) t.data()[i] = rng.normal();
  return t;
}

// Explicit double-loop evaluation of the weighted sum.
std::vector<double> fuse_oracle(const Tensor& v, const Tensor& q, const Tensor& wv,
                                const Tensor& wq, const std::vector<bool>& qmask) {
  std::vector<double> z(v.cols(), 0.0);
  for (size_t i = 0; i < v.rows(); ++i)
    for (size_t c = 0; c < v.cols(); ++c) z[c] += wv.at(0, i) * v.at(i, c);
  for (size_t j = 0; j < q.rows(); ++j) {
    if (!qmask[j]) continue;
    for (size_t c = 0; c < q.cols(); ++c) z[c] += wq.at(0, j) * q.at(j, c);
  }
  return z;
}

}  // namespace

TEST_CASE("fuse: one-hot selection and zero weights") {
  Rng rng(131);
  size_t d = 4, n = 3;
  Tensor v = randn(5, d, rng), q = randn(n, d, rng);
  std::vector<bool> qmask{true, true, true};
  Tape tape;
  FusionParams p;
  p.Wv = Tensor::from(1, 5, {1, 0, 0, 0, 0});
  p.Wq = Tensor::zeros(1, n);
  Tensor z = fuse(tape, v, q, p, qmask);
  for (size_t c = 0; c < d; ++c) CHECK(z.at(0, c) == v.at(0, c));

  p.Wv = Tensor::zeros(1, 5);
  Tensor z0 = fuse(tape, v, q, p, qmask);
  for (size_t c = 0; c < d; ++c) CHECK(z0.at(0, c) == 0.0);
}

TEST_CASE("fuse matches the double-loop oracle and ignores padded rows") {
  Rng rng(137);
  for (int trial = 0; trial < 10; ++trial) {
    size_t d = 3 + rng.index(5), n = 2 + rng.index(6);
    Tensor v = randn(5, d, rng), q = randn(n, d, rng);
    std::vector<bool> qmask(n, true);
    if (n > 1) qmask[n - 1] = false;
    FusionParams p;
    p.Wv = randn(1, 5, rng);
    p.Wq = randn(1, n, rng);
    Tape tape;
    Tensor z = fuse(tape, v, q, p, qmask);
    auto expect = fuse_oracle(v, q, p.Wv, p.Wq, qmask);
    for (size_t c = 0; c < d; ++c) CHECK(std::fabs(z.at(0, c) - expect[c]) < 1e-12);

    // pad rows contribute nothing regardless of their content
    Tensor q_garbage = q.clone();
    for (size_t c = 0; c < d; ++c) q_garbage.ref(n - 1, c) = 1e6;
    if (!qmask[n - 1]) {
      Tensor z2 = fuse(tape, v, q_garbage, p, qmask);
      for (size_t c = 0; c < d; ++c) CHECK(z.at(0, c) == z2.at(0, c));
    }
  }
}

TEST_CASE("fuse is linear in each input (superposition)") {
  Rng rng(139);
  size_t d = 4, n = 3;
  std::vector<bool> qmask{true, true, false};
  FusionParams p;
  p.Wv = randn(1, 5, rng);
  p.Wq = randn(1, n, rng);
  Tensor v1 = randn(5, d, rng), v2 = randn(5, d, rng), q = randn(n, d, rng);
  Tensor v_sum = Tensor::zeros(5, d);
  for (size_t i = 0; i < v_sum.size(); ++i) v_sum.data()[i] = v1.data()[i] + v2.data()[i];
  Tensor zero_q = Tensor::zeros(n, d);
  Tape tape;
  Tensor a = fuse(tape, v1, q, p, qmask);
  Tensor b = fuse(tape, v2, zero_q, p, qmask);
  Tensor both = fuse(tape, v_sum, q, p, qmask);
  for (size_t c = 0; c < d; ++c) {
    CHECK(std::fabs(both.at(0, c) - (a.at(0, c) + b.at(0, c))) < 1e-12);
  }
}

TEST_CASE("classify: zero weights give uniform, closed-form logits") {
  size_t d = 4, n_classes = 5;
  ClassifierParams p;
  p.W1 = Tensor::zeros(d, d);
  p.b1 = Tensor::zeros(1, d);
  p.W2 = Tensor::zeros(d, n_classes);
  p.b2 = Tensor::zeros(1, n_classes);
  Tape tape;
  Rng rng(149);
  Tensor z = randn(1, d, rng);
  Tensor logits = classify_logits(tape, z, p);
  AnswerDistribution dist = make_distribution(logits);
  for (double pr : dist.probs) CHECK(pr == doctest::Approx(1.0 / n_classes).epsilon(1e-12));

  AnswerDistribution closed = make_distribution(std::vector<double>{0.0, std::log(3.0)});
  CHECK(closed.probs[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(closed.probs[1] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("distributions sum to 1 within 1e-9 on random logits") {
  Rng rng(151);
  for (int trial = 0; trial < 100; ++trial) {
    size_t k = 2 + rng.index(10);
    std::vector<double> logits(k);
    for (double& v : logits) v = rng.normal() * 5.0;
    AnswerDistribution d = make_distribution(logits);
    double sum = 0.0;
    for (double p : d.probs) {
      CHECK(p >= 0.0);
      sum += p;
    }
    CHECK(std::fabs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("predict: argmax with lowest-index tie break") {
  AnswerDistribution a;
  a.probs = {0.2, 0.5, 0.3};
  CHECK(predict(a) == 1);
  AnswerDistribution uniform;
  uniform.probs = {0.25, 0.25, 0.25, 0.25};
  CHECK(predict(uniform) == 0);
  AnswerDistribution onehot;
  onehot.probs = {0, 0, 1, 0};
  CHECK(predict(onehot) == 2);
}

TEST_CASE("predict is invariant under strictly increasing logit transforms") {
  Rng rng(157);
  for (int trial = 0; trial < 50; ++trial) {
    size_t k = 2 + rng.index(8);
    std::vector<double> logits(k);
    for (double& v : logits) v = rng.normal() * 3.0;
    AnswerDistribution base = make_distribution(logits);
    std::vector<double> transformed(k);
    for (size_t i = 0; i < k; ++i) transformed[i] = 2.5 * logits[i] + 7.0;  // strictly increasing
    AnswerDistribution t = make_distribution(transformed);
    CHECK(predict(base) == predict(t));
  }
}

TEST_CASE("smoothed_ce worked example and reductions") {
  AnswerDistribution d;
  d.probs = {0.8, 0.2};
  // K=2, eps=0.1, target=0 -> 0.292459 (cross-checked 0.9*0.223144 + 0.1*0.916291)
  CHECK(smoothed_ce(d, 0, 0.1) == doctest::Approx(0.292459).epsilon(2e-5));
  CHECK(smoothed_ce_decomposed(d, 0, 0.1) == doctest::Approx(0.292459).epsilon(2e-5));

  // eps = 0 reduces to plain cross-entropy
  CHECK(smoothed_ce(d, 0, 0.0) == doctest::Approx(-std::log(0.8)).epsilon(1e-12));

  // one-hot at target with eps 0 -> exactly 0, no clamping needed
  AnswerDistribution hot;
  hot.probs = {0.0, 1.0, 0.0};
  reset_smoothed_ce_clamp_count();
  CHECK(smoothed_ce(hot, 1, 0.0) == 0.0);
  CHECK(smoothed_ce_clamp_count() == 0);
}

TEST_CASE("zero probabilities are clamped and counted") {
  AnswerDistribution hot;
  hot.probs = {0.0, 1.0};
  reset_smoothed_ce_clamp_count();
  double loss = smoothed_ce(hot, 1, 0.1);
  CHECK(std::isfinite(loss));
  CHECK(smoothed_ce_clamp_count() == 1);
  reset_smoothed_ce_clamp_count();
}

TEST_CASE("decomposition identity holds on random draws within 1e-9") {
  Rng rng(163);
  for (int trial = 0; trial < 200; ++trial) {
    size_t k = 2 + rng.index(9);
    std::vector<double> logits(k);
    for (double& v : logits) v = rng.normal() * 4.0;
    AnswerDistribution d = make_distribution(logits);
    double eps = rng.uniform() * 0.9;
    int target = static_cast<int>(rng.index(k));
    CHECK(std::fabs(smoothed_ce(d, target, eps) - smoothed_ce_decomposed(d, target, eps)) < 1e-9);
  }
}

TEST_CASE("smoothed_ce is minimized at p = q' (gradient ~ 0 on the simplex, K=3)") {
  const double eps = 0.2;
  const int target = 1;
  const size_t k = 3;
  auto loss_at = [&](const std::vector<double>& probs) {
    AnswerDistribution d;
    d.probs = probs;
    return smoothed_ce(d, target, eps);
  };
  std::vector<double> qprime(k, eps / k);
  qprime[target] += 1.0 - eps;
  double base = loss_at(qprime);
  // simplex-preserving perturbations: move mass between coordinate pairs
  const double h = 1e-6;
  for (size_t i = 0; i < k; ++i) {
    for (size_t j = i + 1; j < k; ++j) {
      auto plus = qprime, minus = qprime;
      plus[i] += h;
      plus[j] -= h;
      minus[i] -= h;
      minus[j] += h;
      double directional = (loss_at(plus) - loss_at(minus)) / (2 * h);
      CHECK(std::fabs(directional) < 1e-6);
      CHECK(loss_at(plus) >= base - 1e-12);
    }
  }
}

TEST_CASE("tape-level smoothed CE agrees with the distribution-level forms") {
  Rng rng(167);
  for (int trial = 0; trial < 50; ++trial) {
    size_t k = 2 + rng.index(7);
    Tensor logits = randn(1, k, rng, true);
    double eps = rng.uniform() * 0.5;
    int target = static_cast<int>(rng.index(k));
    Tape tape;
    Tensor loss = smoothed_ce_logits(tape, logits, target, eps);
    AnswerDistribution d = make_distribution(logits);
    CHECK(loss.data()[0] == doctest::Approx(smoothed_ce(d, target, eps)).epsilon(1e-12));
  }
}

TEST_CASE("full fusion-head gradient matches central differences") {
  Rng rng(173);
  size_t d = 5, n = 3, n_classes = 4;
  Tensor v = randn(5, d, rng, true), q = randn(n, d, rng, true);
  std::vector<bool> qmask{true, true, false};
  FusionParams fp;
  fp.Wv = randn(1, 5, rng, true);
  fp.Wq = randn(1, n, rng, true);
  ClassifierParams cp;
  cp.W1 = randn(d, d, rng, true);
  cp.b1 = randn(1, d, rng, true);
  cp.W2 = randn(d, n_classes, rng, true);
  cp.b2 = randn(1, n_classes, rng, true);

  auto eval = [&]() {
    Tape tape;
    Tensor z = fuse(tape, v, q, fp, qmask);
    Tensor logits = classify_logits(tape, z, cp);
    return smoothed_ce_logits(tape, logits, 2, 0.1).data()[0];
  };
  {
    Tape tape;
    Tensor z = fuse(tape, v, q, fp, qmask);
    Tensor logits = classify_logits(tape, z, cp);
    Tensor loss = smoothed_ce_logits(tape, logits, 2, 0.1);
    tape.backward(loss);
  }
  auto report = grad_check(eval,
                           {{"v", v},
                            {"q", q},
                            {"fusion.Wv", fp.Wv},
                            {"fusion.Wq", fp.Wq},
                            {"clf.W1", cp.W1},
                            {"clf.b1", cp.b1},
                            {"clf.W2", cp.W2},
                            {"clf.b2", cp.b2}},
                           1e-5, 1e-4);
  CHECK(report.pass());
}
