#include "wsdan/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace wsdan {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<EMat>;
using MapC = Eigen::Map<const EMat>;

// ==================== Tensor ====================

Tensor Tensor::zeros(size_t rows, size_t cols, bool requires_grad) {
  return full(rows, cols, 0.0, requires_grad);
}

Tensor Tensor::full(size_t rows, size_t cols, double value, bool requires_grad) {
  if (rows == 0 || cols == 0) throw DimensionError("tensor dims must be positive");
  auto d = std::make_shared<Data>();
  d->shape = {rows, cols};
  d->v.assign(rows * cols, value);
  d->requires_grad = requires_grad;
  return Tensor(std::move(d));
}

Tensor Tensor::from(size_t rows, size_t cols, std::vector<double> values, bool requires_grad) {
  if (values.size() != rows * cols) {
    throw DimensionError("value count " + std::to_string(values.size()) + " does not match shape " +
                         std::to_string(rows) + "x" + std::to_string(cols));
  }
  Tensor t = zeros(rows, cols, requires_grad);
  t.d_->v = std::move(values);
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return full(1, 1, value, requires_grad);
}

size_t Tensor::rows() const { return d_->shape[0]; }
size_t Tensor::cols() const { return d_->shape[1]; }
const std::vector<size_t>& Tensor::shape() const { return d_->shape; }

double* Tensor::data() { return d_->v.data(); }
const double* Tensor::data() const { return d_->v.data(); }

double Tensor::at(size_t r, size_t c) const { return d_->v[r * cols() + c]; }
double& Tensor::ref(size_t r, size_t c) { return d_->v[r * cols() + c]; }

bool Tensor::requires_grad() const { return d_->requires_grad; }
void Tensor::set_requires_grad(bool v) { d_->requires_grad = v; }

double* Tensor::grad() {
  if (d_->g.size() != d_->v.size()) d_->g.assign(d_->v.size(), 0.0);
  return d_->g.data();
}

const double* Tensor::grad() const {
  return d_->g.empty() ? nullptr : d_->g.data();
}

bool Tensor::has_grad() const { return !d_->g.empty(); }

void Tensor::zero_grad() {
  if (!d_->g.empty()) std::fill(d_->g.begin(), d_->g.end(), 0.0);
}

Tensor Tensor::clone() const {
  Tensor t = zeros(rows(), cols(), requires_grad());
  t.d_->v = d_->v;
  return t;
}

void Tensor::copy_values_from(const Tensor& other) {
  if (!same_shape(other)) {
    throw DimensionError("copy_values_from: shape " + shape_str() + " vs " + other.shape_str());
  }
  d_->v = other.d_->v;
}

bool Tensor::all_finite() const {
  for (double x : d_->v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

bool Tensor::same_shape(const Tensor& other) const {
  return rows() == other.rows() && cols() == other.cols();
}

std::string Tensor::shape_str() const {
  return std::to_string(rows()) + "x" + std::to_string(cols());
}

// ==================== Rng ====================

double Rng::uniform() {
  return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // u1 in (0,1] so the log is finite.
  double u1 = static_cast<double>((eng_() >> 11) + 1) * 0x1.0p-53;
  double u2 = static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 2.0 * M_PI * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

size_t Rng::index(size_t n) {
  if (n == 0) throw ContractError("Rng::index: n must be positive");
  return static_cast<size_t>(eng_() % n);
}

std::string Rng::serialize() const {
  std::ostringstream os;
  os << eng_ << " " << (has_spare_ ? 1 : 0) << " ";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", spare_);
  os << buf;
  return os.str();
}

Rng Rng::deserialize(const std::string& s) {
  Rng r(0);
  std::istringstream is(s);
  is >> r.eng_;
  int flag = 0;
  is >> flag >> r.spare_;
  if (is.fail()) throw ParseError("Rng::deserialize: malformed state string");
  r.has_spare_ = flag != 0;
  return r;
}

// ==================== Tape ====================

void Tape::record(Tensor output, std::function<void()> backward_rule) {
  records_.push_back({std::move(output), std::move(backward_rule)});
}

void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw ContractError("backward: loss must be scalar, got " + loss.shape_str());
  }
  if (!loss.requires_grad()) {
    throw ContractError("backward: loss does not require grad (not produced through the tape?)");
  }
  Tensor seed = loss;
  seed.grad()[0] = 1.0;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    it->rule();
  }
}

void backward(const Tensor& loss, Tape& tape) { tape.backward(loss); }

// ==================== op helpers ====================

namespace {

bool any_grad(std::initializer_list<const Tensor*> ts) {
  for (const Tensor* t : ts) {
    if (t->requires_grad()) return true;
  }
  return false;
}

MapC cmap(const Tensor& t) { return MapC(t.data(), t.rows(), t.cols()); }
MapM gmap(Tensor& t) { return MapM(t.grad(), t.rows(), t.cols()); }

}  // namespace

// ==================== matmul ====================

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dims disagree, " + a.shape_str() + " * " + b.shape_str());
  }
  Tensor out = Tensor::zeros(a.rows(), b.cols(), any_grad({&a, &b}));
  MapM(out.data(), out.rows(), out.cols()).noalias() = cmap(a) * cmap(b);
  if (out.requires_grad()) {
    Tensor A = a, B = b;
    tape.record(out, [A, B, out]() mutable {
      MapC g(out.grad(), out.rows(), out.cols());
      if (A.requires_grad()) gmap(A).noalias() += g * cmap(B).transpose();
      if (B.requires_grad()) gmap(B).noalias() += cmap(A).transpose() * g;
    });
  }
  return out;
}

Tensor matmul_nt(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt: inner dims disagree, " + a.shape_str() + " * (" + b.shape_str() + ")^T");
  }
  Tensor out = Tensor::zeros(a.rows(), b.rows(), any_grad({&a, &b}));
  MapM(out.data(), out.rows(), out.cols()).noalias() = cmap(a) * cmap(b).transpose();
  if (out.requires_grad()) {
    Tensor A = a, B = b;
    tape.record(out, [A, B, out]() mutable {
      MapC g(out.grad(), out.rows(), out.cols());
      if (A.requires_grad()) gmap(A).noalias() += g * cmap(B);
      if (B.requires_grad()) gmap(B).noalias() += g.transpose() * cmap(A);
    });
  }
  return out;
}

// ==================== elementwise / broadcast ====================

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw DimensionError("add: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  }
  Tensor out = Tensor::zeros(a.rows(), a.cols(), any_grad({&a, &b}));
  for (size_t i = 0; i < out.size(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
  if (out.requires_grad()) {
    Tensor A = a, B = b;
    tape.record(out, [A, B, out]() mutable {
      const double* g = out.grad();
      if (A.requires_grad()) {
        double* ga = A.grad();
        for (size_t i = 0; i < A.size(); ++i) ga[i] += g[i];
      }
      if (B.requires_grad()) {
        double* gb = B.grad();
        for (size_t i = 0; i < B.size(); ++i) gb[i] += g[i];
      }
    });
  }
  return out;
}

Tensor add_row_broadcast(Tape& tape, const Tensor& a, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw DimensionError("add_row_broadcast: row " + row.shape_str() + " vs matrix " + a.shape_str());
  }
  Tensor out = Tensor::zeros(a.rows(), a.cols(), any_grad({&a, &row}));
  for (size_t r = 0; r < a.rows(); ++r) {
    for (size_t c = 0; c < a.cols(); ++c) out.ref(r, c) = a.at(r, c) + row.at(0, c);
  }
  if (out.requires_grad()) {
    Tensor A = a, R = row;
    tape.record(out, [A, R, out]() mutable {
      const double* g = out.grad();
      if (A.requires_grad()) {
        double* ga = A.grad();
        for (size_t i = 0; i < A.size(); ++i) ga[i] += g[i];
      }
      if (R.requires_grad()) {
        double* gr = R.grad();
        for (size_t r = 0; r < out.rows(); ++r) {
          for (size_t c = 0; c < out.cols(); ++c) gr[c] += g[r * out.cols() + c];
        }
      }
    });
  }
  return out;
}

Tensor add_scalar_broadcast(Tape& tape, const Tensor& a, const Tensor& s) {
  if (s.size() != 1) {
    throw DimensionError("add_scalar_broadcast: scalar operand has shape " + s.shape_str());
  }
  Tensor out = Tensor::zeros(a.rows(), a.cols(), any_grad({&a, &s}));
  double sv = s.data()[0];
  for (size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] + sv;
  if (out.requires_grad()) {
    Tensor A = a, S = s;
    tape.record(out, [A, S, out]() mutable {
      const double* g = out.grad();
      if (A.requires_grad()) {
        double* ga = A.grad();
        for (size_t i = 0; i < A.size(); ++i) ga[i] += g[i];
      }
      if (S.requires_grad()) {
        double acc = 0.0;
        for (size_t i = 0; i < out.size(); ++i) acc += g[i];
        S.grad()[0] += acc;
      }
    });
  }
  return out;
}

Tensor scale(Tape& tape, const Tensor& a, double c) {
  Tensor out = Tensor::zeros(a.rows(), a.cols(), a.requires_grad());
  for (size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * c;
  if (out.requires_grad()) {
    Tensor A = a;
    tape.record(out, [A, c, out]() mutable {
      const double* g = out.grad();
      double* ga = A.grad();
      for (size_t i = 0; i < A.size(); ++i) ga[i] += g[i] * c;
    });
  }
  return out;
}

Tensor relu(Tape& tape, const Tensor& a) {
  Tensor out = Tensor::zeros(a.rows(), a.cols(), a.requires_grad());
  for (size_t i = 0; i < a.size(); ++i) {
    double v = a.data()[i];
    // NaN must propagate (v > 0 is false for NaN) or divergence goes unseen
    out.data()[i] = v > 0.0 ? v : (std::isnan(v) ? v : 0.0);
  }
  if (out.requires_grad()) {
    Tensor A = a;
    tape.record(out, [A, out]() mutable {
      const double* g = out.grad();
      double* ga = A.grad();
      for (size_t i = 0; i < A.size(); ++i) {
        if (A.data()[i] > 0.0) ga[i] += g[i];
      }
    });
  }
  return out;
}

// ==================== softmax ====================

Tensor softmax_rows(Tape& tape, const Tensor& x, const std::vector<bool>* colmask) {
  const size_t m = x.rows(), n = x.cols();
  if (colmask && colmask->size() != n) {
    throw DimensionError("softmax_rows: mask length " + std::to_string(colmask->size()) +
                         " vs columns " + std::to_string(n));
  }
  if (colmask) {
    bool any = false;
    for (bool b : *colmask) any = any || b;
    if (!any) throw ContractError("softmax_rows: every column masked (degenerate row)");
  }
  Tensor out = Tensor::zeros(m, n, x.requires_grad());
  for (size_t r = 0; r < m; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (size_t c = 0; c < n; ++c) {
      if (!colmask || (*colmask)[c]) mx = std::max(mx, x.at(r, c));
    }
    double sum = 0.0;
    for (size_t c = 0; c < n; ++c) {
      if (!colmask || (*colmask)[c]) {
        double e = std::exp(x.at(r, c) - mx);
        out.ref(r, c) = e;
        sum += e;
      }
    }
    for (size_t c = 0; c < n; ++c) {
      if (!colmask || (*colmask)[c]) out.ref(r, c) /= sum;
    }
  }
  if (out.requires_grad()) {
    Tensor X = x;
    std::vector<bool> mask = colmask ? *colmask : std::vector<bool>();
    tape.record(out, [X, out, mask]() mutable {
      const size_t m = X.rows(), n = X.cols();
      const double* g = out.grad();
      double* gx = X.grad();
      for (size_t r = 0; r < m; ++r) {
        const double* p = out.data() + r * n;
        const double* gr = g + r * n;
        double s = 0.0;
        for (size_t c = 0; c < n; ++c) {
          if (mask.empty() || mask[c]) s += gr[c] * p[c];
        }
        // d/dx_j = p_j (g_j - s). The true row sum of this vector is
        // exactly zero (softmax is shift invariant), so the last kept
        // column is written as minus the sum of the others; additive-shift
        // inputs then receive a bitwise-zero gradient.
        size_t last = n;
        for (size_t c = n; c-- > 0;) {
          if (mask.empty() || mask[c]) {
            last = c;
            break;
          }
        }
        double partial = 0.0;
        for (size_t c = 0; c < n; ++c) {
          if (!mask.empty() && !mask[c]) continue;
          if (c == last) continue;
          double d = p[c] * (gr[c] - s);
          gx[r * n + c] += d;
          partial += d;
        }
        gx[r * n + last] += -partial;
      }
    });
  }
  return out;
}

// ==================== layer norm ====================

Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const size_t m = x.rows(), n = x.cols();
  if (eps <= 0.0) throw ContractError("layer_norm: eps must be positive");
  if (gain.rows() != 1 || gain.cols() != n || bias.rows() != 1 || bias.cols() != n) {
    throw DimensionError("layer_norm: gain/bias must be 1x" + std::to_string(n) + ", got " +
                         gain.shape_str() + " / " + bias.shape_str());
  }
  Tensor out = Tensor::zeros(m, n, any_grad({&x, &gain, &bias}));
  // mean/invstd kept for the backward rule
  std::vector<double> mean(m), inv_std(m);
  for (size_t r = 0; r < m; ++r) {
    double mu = 0.0;
    for (size_t c = 0; c < n; ++c) mu += x.at(r, c);
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (size_t c = 0; c < n; ++c) {
      double d = x.at(r, c) - mu;
      var += d * d;
    }
    var /= static_cast<double>(n);
    double is = 1.0 / std::sqrt(var + eps);
    mean[r] = mu;
    inv_std[r] = is;
    for (size_t c = 0; c < n; ++c) {
      out.ref(r, c) = (x.at(r, c) - mu) * is * gain.at(0, c) + bias.at(0, c);
    }
  }
  if (out.requires_grad()) {
    Tensor X = x, G = gain, B = bias;
    tape.record(out, [X, G, B, out, mean, inv_std]() mutable {
      const size_t m = X.rows(), n = X.cols();
      const double* g = out.grad();
      const double dn = static_cast<double>(n);
      for (size_t r = 0; r < m; ++r) {
        const double* gr = g + r * n;
        double is = inv_std[r];
        if (G.requires_grad() || B.requires_grad()) {
          double* gg = G.requires_grad() ? G.grad() : nullptr;
          double* gb = B.requires_grad() ? B.grad() : nullptr;
          for (size_t c = 0; c < n; ++c) {
            double xhat = (X.at(r, c) - mean[r]) * is;
            if (gg) gg[c] += gr[c] * xhat;
            if (gb) gb[c] += gr[c];
          }
        }
        if (X.requires_grad()) {
          // dxhat = g * gain; dx = is*(dxhat - mean(dxhat) - xhat*mean(dxhat*xhat))
          double sum_dxh = 0.0, sum_dxh_xhat = 0.0;
          for (size_t c = 0; c < n; ++c) {
            double xhat = (X.at(r, c) - mean[r]) * is;
            double dxh = gr[c] * G.at(0, c);
            sum_dxh += dxh;
            sum_dxh_xhat += dxh * xhat;
          }
          double* gx = X.grad();
          for (size_t c = 0; c < n; ++c) {
            double xhat = (X.at(r, c) - mean[r]) * is;
            double dxh = gr[c] * G.at(0, c);
            gx[r * n + c] += is * (dxh - sum_dxh / dn - xhat * sum_dxh_xhat / dn);
          }
        }
      }
    });
  }
  return out;
}

// ==================== embedding ====================

Tensor embedding_lookup(Tape& tape, const Tensor& table, const std::vector<int>& ids) {
  const size_t d = table.cols();
  if (ids.empty()) throw ContractError("embedding_lookup: empty id list");
  for (int id : ids) {
    if (id < 0 || static_cast<size_t>(id) >= table.rows()) {
      throw LookupError("embedding_lookup: id " + std::to_string(id) + " out of range (vocab " +
                        std::to_string(table.rows()) + ")");
    }
  }
  Tensor out = Tensor::zeros(ids.size(), d, table.requires_grad());
  for (size_t r = 0; r < ids.size(); ++r) {
    const double* src = table.data() + static_cast<size_t>(ids[r]) * d;
    std::copy(src, src + d, out.data() + r * d);
  }
  if (out.requires_grad()) {
    Tensor T = table;
    tape.record(out, [T, ids, out]() mutable {
      const size_t d = T.cols();
      const double* g = out.grad();
      double* gt = T.grad();
      for (size_t r = 0; r < ids.size(); ++r) {
        double* dst = gt + static_cast<size_t>(ids[r]) * d;
        for (size_t c = 0; c < d; ++c) dst[c] += g[r * d + c];
      }
    });
  }
  return out;
}

// ==================== concat / slice / mask ====================

Tensor concat_cols(Tape& tape, const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no parts");
  size_t m = parts[0].rows(), total = 0;
  bool rg = false;
  for (const Tensor& p : parts) {
    if (p.rows() != m) throw DimensionError("concat_cols: row mismatch " + p.shape_str());
    total += p.cols();
    rg = rg || p.requires_grad();
  }
  Tensor out = Tensor::zeros(m, total, rg);
  size_t off = 0;
  for (const Tensor& p : parts) {
    for (size_t r = 0; r < m; ++r) {
      std::copy(p.data() + r * p.cols(), p.data() + (r + 1) * p.cols(),
                out.data() + r * total + off);
    }
    off += p.cols();
  }
  if (rg) {
    std::vector<Tensor> P = parts;
    tape.record(out, [P, out]() mutable {
      size_t m = out.rows(), total = out.cols(), off = 0;
      const double* g = out.grad();
      for (Tensor& p : P) {
        if (p.requires_grad()) {
          double* gp = p.grad();
          for (size_t r = 0; r < m; ++r) {
            for (size_t c = 0; c < p.cols(); ++c) gp[r * p.cols() + c] += g[r * total + off + c];
          }
        }
        off += p.cols();
      }
    });
  }
  return out;
}

Tensor slice_cols(Tape& tape, const Tensor& a, size_t c0, size_t c1) {
  if (c0 >= c1 || c1 > a.cols()) {
    throw DimensionError("slice_cols: [" + std::to_string(c0) + "," + std::to_string(c1) +
                         ") out of " + a.shape_str());
  }
  size_t w = c1 - c0;
  Tensor out = Tensor::zeros(a.rows(), w, a.requires_grad());
  for (size_t r = 0; r < a.rows(); ++r) {
    std::copy(a.data() + r * a.cols() + c0, a.data() + r * a.cols() + c1, out.data() + r * w);
  }
  if (out.requires_grad()) {
    Tensor A = a;
    tape.record(out, [A, out, c0, w]() mutable {
      const double* g = out.grad();
      double* ga = A.grad();
      for (size_t r = 0; r < A.rows(); ++r) {
        for (size_t c = 0; c < w; ++c) ga[r * A.cols() + c0 + c] += g[r * w + c];
      }
    });
  }
  return out;
}

Tensor row_mask_zero(Tape& tape, const Tensor& a, const std::vector<bool>& keep) {
  if (keep.size() != a.rows()) {
    throw DimensionError("row_mask_zero: mask length " + std::to_string(keep.size()) + " vs rows " +
                         std::to_string(a.rows()));
  }
  Tensor out = Tensor::zeros(a.rows(), a.cols(), a.requires_grad());
  for (size_t r = 0; r < a.rows(); ++r) {
    if (keep[r]) {
      std::copy(a.data() + r * a.cols(), a.data() + (r + 1) * a.cols(), out.data() + r * a.cols());
    }
  }
  if (out.requires_grad()) {
    Tensor A = a;
    tape.record(out, [A, out, keep]() mutable {
      const double* g = out.grad();
      double* ga = A.grad();
      for (size_t r = 0; r < A.rows(); ++r) {
        if (!keep[r]) continue;
        for (size_t c = 0; c < A.cols(); ++c) ga[r * A.cols() + c] += g[r * A.cols() + c];
      }
    });
  }
  return out;
}

// ==================== dropout ====================

Tensor dropout(Tape& tape, const Tensor& a, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ContractError("dropout: rate must be in [0,1)");
  if (rate == 0.0) return a;  // exact identity, consumes no randomness
  Tensor out = Tensor::zeros(a.rows(), a.cols(), a.requires_grad());
  auto mask = std::make_shared<std::vector<double>>(a.size());
  const double keep_scale = 1.0 / (1.0 - rate);
  for (size_t i = 0; i < a.size(); ++i) {
    double k = rng.uniform() >= rate ? keep_scale : 0.0;
    (*mask)[i] = k;
    out.data()[i] = a.data()[i] * k;
  }
  if (out.requires_grad()) {
    Tensor A = a;
    tape.record(out, [A, out, mask]() mutable {
      const double* g = out.grad();
      double* ga = A.grad();
      for (size_t i = 0; i < A.size(); ++i) ga[i] += g[i] * (*mask)[i];
    });
  }
  return out;
}

// ==================== smoothed CE on logits ====================

Tensor smoothed_ce_logits(Tape& tape, const Tensor& logits, int target, double eps) {
  if (logits.rows() != 1) throw DimensionError("smoothed_ce_logits: logits must be 1xN");
  const size_t n = logits.cols();
  if (eps < 0.0 || eps >= 1.0) throw ContractError("smoothed_ce_logits: eps must be in [0,1)");
  if (target < 0 || static_cast<size_t>(target) >= n) {
    throw ContractError("smoothed_ce_logits: target " + std::to_string(target) + " out of " +
                        std::to_string(n) + " classes");
  }
  double mx = logits.data()[0];
  for (size_t k = 1; k < n; ++k) mx = std::max(mx, logits.data()[k]);
  double se = 0.0;
  for (size_t k = 0; k < n; ++k) se += std::exp(logits.data()[k] - mx);
  double lse = mx + std::log(se);
  const double u = eps / static_cast<double>(n);
  double dot = 0.0;
  for (size_t k = 0; k < n; ++k) {
    double q = u + (static_cast<size_t>(target) == k ? 1.0 - eps : 0.0);
    dot += q * logits.data()[k];
  }
  Tensor out = Tensor::scalar(lse - dot, logits.requires_grad());
  if (out.requires_grad()) {
    Tensor L = logits;
    tape.record(out, [L, out, target, eps, mx, se]() mutable {
      const size_t n = L.cols();
      const double u = eps / static_cast<double>(n);
      double g = out.grad()[0];
      double* gl = L.grad();
      for (size_t k = 0; k < n; ++k) {
        double p = std::exp(L.data()[k] - mx) / se;
        double q = u + (static_cast<size_t>(target) == k ? 1.0 - eps : 0.0);
        gl[k] += g * (p - q);
      }
    });
  }
  return out;
}

}  // namespace wsdan
