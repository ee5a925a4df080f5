#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "wsdan/error.hpp"

namespace wsdan {

/// Dense 2-D tensor of 64-bit reals (row-major) with an optional gradient
/// buffer. Copies are shallow: a Tensor is a shared handle to its storage,
/// so the same parameter can appear at several places in a graph and
/// accumulate gradient from all of them.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(size_t rows, size_t cols, bool requires_grad = false);
  static Tensor full(size_t rows, size_t cols, double value, bool requires_grad = false);
  static Tensor from(size_t rows, size_t cols, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(d_); }
  size_t rows() const;
  size_t cols() const;
  size_t size() const { return rows() * cols(); }
  const std::vector<size_t>& shape() const;

  double* data();
  const double* data() const;
  double at(size_t r, size_t c) const;
  double& ref(size_t r, size_t c);

  bool requires_grad() const;
  void set_requires_grad(bool v);
  /// Gradient buffer; allocated (zeroed) on first access when requires_grad.
  double* grad();
  const double* grad() const;
  bool has_grad() const;
  void zero_grad();

  /// Deep copy of values (and requires_grad flag; gradient starts zeroed).
  Tensor clone() const;
  /// Overwrite values from another tensor of identical shape.
  void copy_values_from(const Tensor& other);

  bool all_finite() const;
  bool same_shape(const Tensor& other) const;
  std::string shape_str() const;

  /// Identity used by Tape bookkeeping and tests.
  const void* id() const { return d_.get(); }

 private:
  struct Data {
    std::vector<size_t> shape;  // always {rows, cols}
    std::vector<double> v;
    std::vector<double> g;  // empty until first grad() when requires_grad
    bool requires_grad = false;
  };
  explicit Tensor(std::shared_ptr<Data> d) : d_(std::move(d)) {}
  std::shared_ptr<Data> d_;
};

/// Deterministic RNG: mt19937_64 plus a Box-Muller spare slot. All random
/// draws in the project go through this type so that a seed fully
/// determines every downstream value.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }
  /// Uniform in [0, 1).
  double uniform();
  /// Standard normal via Box-Muller.
  double normal();
  /// Uniform integer in [0, n), n > 0.
  size_t index(size_t n);

  std::string serialize() const;
  static Rng deserialize(const std::string& s);

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

template <typename T>
void shuffle_in_place(std::vector<T>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    size_t j = rng.index(i);
    std::swap(v[i - 1], v[j]);
  }
}

/// Reverse-mode tape: records one backward rule per forward operation, in
/// forward (hence topological) order. backward() replays them once, in
/// reverse. A tape is consumed by a single backward sweep; gradients keep
/// accumulating across tapes until the parameters are zeroed.
class Tape {
 public:
  void record(Tensor output, std::function<void()> backward_rule);
  size_t size() const { return records_.size(); }

  /// Seeds d(loss)/d(loss) = 1 and runs every recorded rule once in
  /// reverse order. loss must be a scalar produced through this tape.
  void backward(const Tensor& loss);

 private:
  struct Record {
    Tensor output;
    std::function<void()> rule;
  };
  std::vector<Record> records_;
};

void backward(const Tensor& loss, Tape& tape);

// ---- differentiable operations -------------------------------------------

/// C = A(m×k) · B(k×p).
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
/// C = A(m×k) · B(p×k)^T — attention scores without materializing B^T.
Tensor matmul_nt(Tape& tape, const Tensor& a, const Tensor& b);

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
/// a(m×k) + row(1×k) broadcast over rows.
Tensor add_row_broadcast(Tape& tape, const Tensor& a, const Tensor& row);
/// a(m×k) + s(1×1) broadcast over every entry.
Tensor add_scalar_broadcast(Tape& tape, const Tensor& a, const Tensor& s);
/// a * c for a plain (non-learnable) constant c.
Tensor scale(Tape& tape, const Tensor& a, double c);
Tensor relu(Tape& tape, const Tensor& a);

/// Row softmax with optional boolean column mask (true = keep). Masked
/// positions output exactly 0; every row must keep at least one column.
Tensor softmax_rows(Tape& tape, const Tensor& x, const std::vector<bool>* colmask = nullptr);

/// Per-row normalization over the column axis: (x-mean)/sqrt(var+eps) * gain + bias.
Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gain, const Tensor& bias, double eps);

/// Gathers rows of table by id; backward scatter-adds into the table rows.
Tensor embedding_lookup(Tape& tape, const Tensor& table, const std::vector<int>& ids);

Tensor concat_cols(Tape& tape, const std::vector<Tensor>& parts);
Tensor slice_cols(Tape& tape, const Tensor& a, size_t c0, size_t c1);

/// Zeroes rows where keep[r] is false (mask is constant, not learnable).
Tensor row_mask_zero(Tape& tape, const Tensor& a, const std::vector<bool>& keep);

/// Inverted dropout with explicit rate; exact identity (no RNG draw, no
/// tape record) when rate == 0 so rate-0 passes are bitwise deterministic.
Tensor dropout(Tape& tape, const Tensor& a, double rate, Rng& rng);

/// Label-smoothed cross-entropy on logits (1×N), computed via log-sum-exp:
/// loss = lse(logits) - sum_k q'(k)·logit_k with q'(k) = (1-eps)[k==target] + eps/N.
Tensor smoothed_ce_logits(Tape& tape, const Tensor& logits, int target, double eps);

}  // namespace wsdan
