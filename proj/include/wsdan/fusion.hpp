#pragma once

#include <cstddef>
#include <vector>

#include "wsdan/tensor.hpp"

namespace wsdan {

/// Weighted-sum fusion weights: Wv over the 5 image positions, Wq over the
/// n question positions.
struct FusionParams {
  Tensor Wv;  // 1 x 5
  Tensor Wq;  // 1 x n
};

/// One-hidden-layer MLP classifier over the fused vector.
struct ClassifierParams {
  Tensor W1;  // d x d
  Tensor b1;  // 1 x d
  Tensor W2;  // d x N
  Tensor b2;  // 1 x N
};

struct AnswerDistribution {
  std::vector<double> logits;
  std::vector<double> probs;  // softmax(logits); nonnegative, sums to 1
};

/// Z = Wv·V + Wq·Q with padded question rows zeroed before weighting.
Tensor fuse(Tape& tape, const Tensor& v_out, const Tensor& q_out, const FusionParams& params,
            const std::vector<bool>& qmask);

/// logits = ReLU(Z·W1 + b1)·W2 + b2.
Tensor classify_logits(Tape& tape, const Tensor& z, const ClassifierParams& params);

/// Softmax over a 1xN logits tensor (plain arithmetic, no tape).
AnswerDistribution make_distribution(const Tensor& logits);
AnswerDistribution make_distribution(const std::vector<double>& logits);

/// argmax with ties broken by the lowest index.
int predict(const AnswerDistribution& dist);

/// Label-smoothed cross-entropy, direct form: -sum_k q'(k) log p(k) with
/// q'(k) = (1-eps)[k==target] + eps/K. Probabilities at or below zero are
/// clamped to 1e-12 and counted (see smoothed_ce_clamp_count).
double smoothed_ce(const AnswerDistribution& dist, int target, double eps);

/// The same loss via the decomposition (1-eps)·H(q,p) + eps·H(u,p); agrees
/// with the direct form to rounding.
double smoothed_ce_decomposed(const AnswerDistribution& dist, int target, double eps);

size_t smoothed_ce_clamp_count();
void reset_smoothed_ce_clamp_count();

}  // namespace wsdan
