#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "wsdan/dal.hpp"

using namespace wsdan;

namespace {

Tensor randn(size_t r, size_t c, Rng& rng, bool rg = false) {
  Tensor t = Tensor::zeros(r, c, rg);
  for (size_t i = 0; i < t.size(); ++i) t.data()[i] = rng.normal();
  return t;
}

Tensor identity(size_t d) {
  Tensor t = Tensor::zeros(d, d);
  for (size_t i = 0; i < d; ++i) t.ref(i, i) = 1.0;
  return t;
}

MAParams random_ma(size_t d, size_t heads, Rng& rng, bool rg = false) {
  MAParams p;
  p.Wq = randn(d, d, rng, rg);
  p.Wk = randn(d, d, rng, rg);
  p.Wv = randn(d, d, rng, rg);
  p.Wo = randn(d, d, rng, rg);
  p.heads = heads;
  return p;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
  return m;
}

// Loop-based reference for single-head scaled dot-product attention with
// explicit projections; intentionally independent of the tensor library.
std::vector<double> attention_oracle(const std::vector<double>& q, size_t m,
                                     const std::vector<double>& k, size_t p,
                                     const std::vector<double>& v, size_t d,
                                     const std::vector<double>& wq, const std::vector<double>& wk,
                                     const std::vector<double>& wv, const std::vector<double>& wo) {
  auto mm = [](const std::vector<double>& a, size_t ar, size_t ac, const std::vector<double>& b,
               size_t bc) {
    std::vector<double> c(ar * bc, 0.0);
    for (size_t i = 0; i < ar; ++i)
      for (size_t j = 0; j < bc; ++j)
        for (size_t t = 0; t < ac; ++t) c[i * bc + j] += a[i * ac + t] * b[t * bc + j];
    return c;
  };
  auto qp = mm(q, m, d, wq, d);
  auto kp = mm(k, p, d, wk, d);
  auto vp = mm(v, p, d, wv, d);
  std::vector<double> att(m * d, 0.0);
  for (size_t i = 0; i < m; ++i) {
    std::vector<double> score(p, 0.0);
    double mx = -1e300;
    for (size_t j = 0; j < p; ++j) {
      for (size_t t = 0; t < d; ++t) score[j] += qp[i * d + t] * kp[j * d + t];
      score[j] /= std::sqrt(static_cast<double>(d));
      mx = std::max(mx, score[j]);
    }
    double z = 0.0;
    for (size_t j = 0; j < p; ++j) z += std::exp(score[j] - mx);
    for (size_t j = 0; j < p; ++j) {
      double w = std::exp(score[j] - mx) / z;
      for (size_t t = 0; t < d; ++t) att[i * d + t] += w * vp[j * d + t];
    }
  }
  return mm(att, m, d, wo, d);
}

DALParams random_dal(size_t d, size_t heads, Rng& rng, bool rg = false) {
  DALParams p;
  p.v_self = random_ma(d, heads, rng, rg);
  p.v_guided = random_ma(d, heads, rng, rg);
  p.q_self = random_ma(d, heads, rng, rg);
  p.q_guided = random_ma(d, heads, rng, rg);
  for (FFNParams* f : {&p.v_ffn, &p.q_ffn}) {
    f->W1 = randn(d, 4 * d, rng, rg);
    f->b1 = Tensor::zeros(1, 4 * d, rg);
    f->W2 = randn(4 * d, d, rng, rg);
    f->b2 = Tensor::zeros(1, d, rg);
  }
  for (NormParams* n : {&p.v_norm1, &p.v_norm2, &p.v_norm3, &p.q_norm1, &p.q_norm2, &p.q_norm3}) {
    n->gain = Tensor::full(1, d, 1.0, rg);
    n->bias = Tensor::zeros(1, d, rg);
  }
  return p;
}

DALParams zero_dal(size_t d, size_t heads) {
  Rng rng(0);
  DALParams p = random_dal(d, heads, rng);
  for (Tensor* t : {&p.v_self.Wq, &p.v_self.Wk, &p.v_self.Wv, &p.v_self.Wo, &p.v_guided.Wq,
                    &p.v_guided.Wk, &p.v_guided.Wv, &p.v_guided.Wo, &p.q_self.Wq, &p.q_self.Wk,
                    &p.q_self.Wv, &p.q_self.Wo, &p.q_guided.Wq, &p.q_guided.Wk, &p.q_guided.Wv,
                    &p.q_guided.Wo, &p.v_ffn.W1, &p.v_ffn.W2, &p.q_ffn.W1, &p.q_ffn.W2}) {
    std::fill(t->data(), t->data() + t->size(), 0.0);
  }
  return p;
}

}  // namespace

TEST_CASE("h=1 identity projections reduce MA to scaled dot-product attention") {
  Rng rng(71);
  size_t m = 3, p = 4, d = 5;
  Tensor q = randn(m, d, rng), k = randn(p, d, rng), v = randn(p, d, rng);
  MAParams ma;
  ma.Wq = ma.Wk = ma.Wv = ma.Wo = identity(d);
  ma.heads = 1;
  Tape tape;
  Tensor out = multi_head_attention(tape, q, k, v, ma);

  // direct evaluation of softmax(QK^T/sqrt(d))V
  for (size_t i = 0; i < m; ++i) {
    std::vector<double> score(p, 0.0);
    double mx = -1e300;
    for (size_t j = 0; j < p; ++j) {
      for (size_t t = 0; t < d; ++t) score[j] += q.at(i, t) * k.at(j, t);
      score[j] /= std::sqrt(static_cast<double>(d));
      mx = std::max(mx, score[j]);
    }
    double z = 0.0;
    for (size_t j = 0; j < p; ++j) z += std::exp(score[j] - mx);
    for (size_t t = 0; t < d; ++t) {
      double expect = 0.0;
      for (size_t j = 0; j < p; ++j) expect += std::exp(score[j] - mx) / z * v.at(j, t);
      CHECK(out.at(i, t) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("single unmasked key: output rows identical and independent of queries") {
  Rng rng(73);
  size_t d = 6, heads = 2;
  MAParams ma = random_ma(d, heads, rng);
  Tensor k = randn(1, d, rng), v = randn(1, d, rng);
  Tape tape;
  Tensor q1 = randn(3, d, rng), q2 = randn(3, d, rng);
  Tensor o1 = multi_head_attention(tape, q1, k, v, ma);
  Tensor o2 = multi_head_attention(tape, q2, k, v, ma);
  CHECK(max_abs_diff(o1, o2) < 1e-12);
  for (size_t r = 1; r < 3; ++r) {
    for (size_t c = 0; c < d; ++c) CHECK(o1.at(r, c) == doctest::Approx(o1.at(0, c)).epsilon(1e-12));
  }
}

TEST_CASE("random instance matches the loop-based single-head oracle within 1e-10") {
  Rng rng(79);
  size_t m = 3, p = 5, d = 4;
  Tensor q = randn(m, d, rng), k = randn(p, d, rng), v = randn(p, d, rng);
  MAParams ma = random_ma(d, 1, rng);
  Tape tape;
  Tensor out = multi_head_attention(tape, q, k, v, ma);
  auto expect = attention_oracle(
      {q.data(), q.data() + q.size()}, m, {k.data(), k.data() + k.size()}, p,
      {v.data(), v.data() + v.size()}, d, {ma.Wq.data(), ma.Wq.data() + d * d},
      {ma.Wk.data(), ma.Wk.data() + d * d}, {ma.Wv.data(), ma.Wv.data() + d * d},
      {ma.Wo.data(), ma.Wo.data() + d * d});
  for (size_t i = 0; i < out.size(); ++i) CHECK(std::fabs(out.data()[i] - expect[i]) < 1e-10);
}

TEST_CASE("self_attention is definitionally MA(X,X,X) and permutation-equivariant") {
  Rng rng(83);
  size_t m = 4, d = 6;
  Tensor x = randn(m, d, rng);
  MAParams ma = random_ma(d, 3, rng);
  Tape tape;
  Tensor a = self_attention(tape, x, ma);
  Tensor b = multi_head_attention(tape, x, x, x, ma);
  CHECK(max_abs_diff(a, b) == 0.0);

  // single row: output = (x1 Wv heads)Wo regardless of Wq/Wk
  Tensor x1 = randn(1, d, rng);
  Tensor out1 = self_attention(tape, x1, ma);
  Tensor direct = matmul(tape, matmul(tape, x1, ma.Wv), ma.Wo);
  CHECK(max_abs_diff(out1, direct) < 1e-12);

  // permuting rows permutes outputs identically
  std::vector<size_t> perm{2, 0, 3, 1};
  Tensor xp = Tensor::zeros(m, d);
  for (size_t r = 0; r < m; ++r)
    for (size_t c = 0; c < d; ++c) xp.ref(r, c) = x.at(perm[r], c);
  Tensor ap = self_attention(tape, xp, ma);
  for (size_t r = 0; r < m; ++r)
    for (size_t c = 0; c < d; ++c)
      CHECK(ap.at(r, c) == doctest::Approx(a.at(perm[r], c)).epsilon(1e-10));
}

TEST_CASE("guided_attention: key/value set invariance and shape contract") {
  Rng rng(89);
  size_t d = 6;
  Tensor x = randn(5, d, rng);  // image stream
  Tensor y = randn(4, d, rng);  // question stream
  MAParams ma = random_ma(d, 2, rng);
  Tape tape;
  std::vector<bool> ymask{true, true, true, false};
  Tensor out = guided_attention(tape, x, y, ma, &ymask);
  CHECK(out.rows() == 5);
  CHECK(out.cols() == d);

  // permuting Y rows together with its mask leaves the output unchanged
  std::vector<size_t> perm{1, 2, 0, 3};
  Tensor yp = Tensor::zeros(4, d);
  std::vector<bool> maskp(4);
  for (size_t r = 0; r < 4; ++r) {
    maskp[r] = ymask[perm[r]];
    for (size_t c = 0; c < d; ++c) yp.ref(r, c) = y.at(perm[r], c);
  }
  Tensor outp = guided_attention(tape, x, yp, ma, &maskp);
  CHECK(max_abs_diff(out, outp) < 1e-10);

  // one unmasked row -> all output rows identical
  std::vector<bool> one{false, true, false, false};
  Tensor out1 = guided_attention(tape, x, y, ma, &one);
  for (size_t r = 1; r < 5; ++r)
    for (size_t c = 0; c < d; ++c)
      CHECK(out1.at(r, c) == doctest::Approx(out1.at(0, c)).epsilon(1e-12));
}

TEST_CASE("zero weights reduce dal_forward to a cascade of norms (hand trace)") {
  size_t d = 4;
  DALParams p = zero_dal(d, 2);
  StackConfig cfg;
  cfg.layers = 1;
  cfg.mode = StackMode::Both;
  cfg.ffn = true;
  Rng rng(97);
  DualFeatures in;
  in.V = randn(5, d, rng);
  in.Q = randn(3, d, rng);
  in.qmask = {true, true, true};
  Tape tape;
  DualFeatures out = dal_forward(tape, in, p, cfg);

  // independent layer-norm trace in plain loops
  auto ln = [&](std::vector<double> row) {
    double mu = 0.0;
    for (double v : row) mu += v;
    mu /= row.size();
    double var = 0.0;
    for (double v : row) var += (v - mu) * (v - mu);
    var /= row.size();
    for (double& v : row) v = (v - mu) / std::sqrt(var + cfg.norm_eps);
    return row;
  };
  for (size_t r = 0; r < 5; ++r) {
    std::vector<double> row(d);
    for (size_t c = 0; c < d; ++c) row[c] = in.V.at(r, c);
    row = ln(ln(ln(row)));  // SA, GA, FFN sublayers all contribute zero
    for (size_t c = 0; c < d; ++c) CHECK(out.V.at(r, c) == doctest::Approx(row[c]).epsilon(1e-12));
  }
}

TEST_CASE("dal_forward preserves shapes in every mode; ablations drop one guided site") {
  Rng rng(101);
  size_t d = 8, heads = 2;
  DALParams p = random_dal(d, heads, rng);
  DualFeatures in;
  in.V = randn(5, d, rng);
  in.Q = randn(6, d, rng);
  in.qmask = {true, true, true, true, false, false};
  for (StackMode mode : {StackMode::Both, StackMode::ImageGuidedOnly, StackMode::QuestionGuidedOnly}) {
    StackConfig cfg;
    cfg.layers = 1;
    cfg.mode = mode;
    Tape tape;
    std::vector<AttnEntry> maps;
    DualFeatures out = dal_forward(tape, in, p, cfg, nullptr, 0, &maps);
    CHECK(out.V.rows() == 5);
    CHECK(out.V.cols() == d);
    CHECK(out.Q.rows() == 6);
    CHECK(out.Q.cols() == d);
    size_t sites = mode == StackMode::Both ? 4 : 3;
    CHECK(maps.size() == sites * heads);
  }
}

TEST_CASE("stack_forward: L=1 equals one dal_forward, L=2 equals two, bitwise") {
  Rng rng(103);
  size_t d = 6, heads = 2;
  std::vector<DALParams> params{random_dal(d, heads, rng), random_dal(d, heads, rng)};
  DualFeatures in;
  in.V = randn(5, d, rng);
  in.Q = randn(4, d, rng);
  in.qmask = {true, true, true, false};

  StackConfig cfg1;
  cfg1.layers = 1;
  Tape t1, t2;
  StackResult one = stack_forward(t1, in, {params[0]}, cfg1);
  DualFeatures direct = dal_forward(t2, in, params[0], cfg1);
  CHECK(max_abs_diff(one.features.V, direct.V) == 0.0);
  CHECK(max_abs_diff(one.features.Q, direct.Q) == 0.0);

  StackConfig cfg2;
  cfg2.layers = 2;
  Tape t3, t4;
  StackResult two = stack_forward(t3, in, params, cfg2);
  DualFeatures step = dal_forward(t4, in, params[0], cfg2, nullptr, 0);
  step = dal_forward(t4, step, params[1], cfg2, nullptr, 1);
  CHECK(max_abs_diff(two.features.V, step.V) == 0.0);
  CHECK(max_abs_diff(two.features.Q, step.Q) == 0.0);

  // paper setting: 2 layers x 4 sites x h heads
  CHECK(two.attn.size() == 2 * 4 * heads);
}

TEST_CASE("exported attention rows sum to 1 over unmasked keys; pad columns exactly 0") {
  Rng rng(107);
  size_t d = 8, heads = 4;
  std::vector<DALParams> params{random_dal(d, heads, rng), random_dal(d, heads, rng)};
  DualFeatures in;
  in.V = randn(5, d, rng);
  in.Q = randn(6, d, rng);
  in.qmask = {true, true, true, true, false, false};
  StackConfig cfg;
  cfg.layers = 2;
  Tape tape;
  StackResult res = stack_forward(tape, in, params, cfg);
  REQUIRE(res.attn.size() == 2 * 4 * heads);
  for (const AttnEntry& e : res.attn) {
    bool keys_are_question = e.site == "q_self" || e.site == "v_guided";
    for (size_t r = 0; r < e.weights.rows(); ++r) {
      double sum = 0.0;
      for (size_t c = 0; c < e.weights.cols(); ++c) {
        double w = e.weights.at(r, c);
        if (keys_are_question && !in.qmask[c]) CHECK(w == 0.0);
        sum += w;
      }
      CHECK(std::fabs(sum - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("stack_forward with dropout 0 is bitwise deterministic") {
  Rng rng(109);
  size_t d = 6, heads = 2;
  std::vector<DALParams> params{random_dal(d, heads, rng), random_dal(d, heads, rng)};
  DualFeatures in;
  in.V = randn(5, d, rng);
  in.Q = randn(4, d, rng);
  in.qmask = {true, true, true, true};
  StackConfig cfg;
  cfg.layers = 2;
  Tape t1, t2;
  StackResult a = stack_forward(t1, in, params, cfg);
  StackResult b = stack_forward(t2, in, params, cfg);
  CHECK(max_abs_diff(a.features.V, b.features.V) == 0.0);
  CHECK(max_abs_diff(a.features.Q, b.features.Q) == 0.0);
}

TEST_CASE("gradient reaches the first layer's V-stream guided-attention weights") {
  Rng rng(113);
  size_t d = 6, heads = 2;
  std::vector<DALParams> params{random_dal(d, heads, rng, true), random_dal(d, heads, rng, true)};
  DualFeatures in;
  in.V = randn(5, d, rng);
  in.Q = randn(4, d, rng);
  in.qmask = {true, true, true, true};
  StackConfig cfg;
  cfg.layers = 2;
  cfg.mode = StackMode::Both;
  Tape tape;
  StackResult res = stack_forward(tape, in, params, cfg);
  Tensor w = randn(d, 1, rng);
  Tensor onesr = Tensor::full(1, 5, 1.0);
  Tensor loss = matmul(tape, onesr, matmul(tape, res.features.V, w));
  tape.backward(loss);
  double mx = 0.0;
  for (size_t i = 0; i < d * d; ++i) mx = std::max(mx, std::fabs(params[0].v_guided.Wq.grad()[i]));
  CHECK(mx > 1e-10);
}

TEST_CASE("mode both with a single-token Q stream mirrors the single-key example on V") {
  Rng rng(127);
  size_t d = 6, heads = 2;
  DALParams p = random_dal(d, heads, rng);
  DualFeatures in;
  in.V = randn(5, d, rng);
  in.Q = randn(1, d, rng);
  in.qmask = {true};
  StackConfig cfg;
  cfg.layers = 1;
  cfg.ffn = false;
  Tape tape;
  std::vector<AttnEntry> maps;
  DualFeatures out = dal_forward(tape, in, p, cfg, nullptr, 0, &maps);
  // v_guided has one key: every weight row is exactly [1]
  for (const AttnEntry& e : maps) {
    if (e.site != "v_guided") continue;
    for (size_t r = 0; r < e.weights.rows(); ++r) CHECK(e.weights.at(r, 0) == 1.0);
  }
  CHECK(out.V.rows() == 5);
}
