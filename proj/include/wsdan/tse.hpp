#pragma once

#include <vector>

#include "wsdan/tensor.hpp"
#include "wsdan/text.hpp"

namespace wsdan {

/// Question-encoder parameters: word projections Wq/Wk/Wv and sentence
/// projections Uq/Uk, all d_q x d_q.
struct TSEParams {
  Tensor Wq, Wk, Wv, Uq, Uk;
};

/// How the sentence term enters the pairwise logits.
///
/// Verbatim adds (S·Uq)(S·Uk)^T — a single scalar, constant over every
/// (i,j) pair, which row-softmax provably cancels: the mode exists so that
/// tests can demonstrate the degeneracy. SentenceKey replaces the second
/// factor's S with the word being scored, (S·Uq)(q̂_j·Uk)^T, so the
/// sentence signal varies per key position and survives the softmax; it is
/// the default training mode.
enum class TSEMode { Verbatim, SentenceKey };

/// Row i = E[ids[i]]; pad rows carry E[PAD] and are flagged by the mask.
Tensor embed_words(Tape& tape, const TokenSequence& tokens, const Tensor& E);

/// Pairwise attention logits alpha (n x n), word term plus sentence term,
/// both scaled by 1/sqrt(2 d_q).
Tensor tse_logits(Tape& tape, const Tensor& qhat, const Tensor& sentence, const TSEParams& params,
                  TSEMode mode);

/// Double-embedding question representation: row-softmax of the logits
/// (pad columns masked out) applied to the value projections q̂_j Wv.
Tensor tse_forward(Tape& tape, const Tensor& qhat, const Tensor& sentence, const TSEParams& params,
                   TSEMode mode, const std::vector<bool>& mask);

}  // namespace wsdan
