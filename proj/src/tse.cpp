#include "wsdan/tse.hpp"

#include <cmath>

namespace wsdan {

Tensor embed_words(Tape& tape, const TokenSequence& tokens, const Tensor& E) {
  return embedding_lookup(tape, E, tokens.ids);
}

namespace {

void check_tse_shapes(const Tensor& qhat, const Tensor& sentence, const TSEParams& p) {
  const size_t d = qhat.cols();
  if (sentence.rows() != 1 || sentence.cols() != d) {
    throw DimensionError("tse: sentence embedding must be 1x" + std::to_string(d) + ", got " +
                         sentence.shape_str());
  }
  for (const Tensor* w : {&p.Wq, &p.Wk, &p.Wv, &p.Uq, &p.Uk}) {
    if (w->rows() != d || w->cols() != d) {
      throw DimensionError("tse: projection must be " + std::to_string(d) + "x" +
                           std::to_string(d) + ", got " + w->shape_str());
    }
  }
}

}  // namespace

Tensor tse_logits(Tape& tape, const Tensor& qhat, const Tensor& sentence, const TSEParams& params,
                  TSEMode mode) {
  check_tse_shapes(qhat, sentence, params);
  const double inv = 1.0 / std::sqrt(2.0 * static_cast<double>(qhat.cols()));
  Tensor word = scale(tape, matmul_nt(tape, matmul(tape, qhat, params.Wq),
                                      matmul(tape, qhat, params.Wk)), inv);
  Tensor su = matmul(tape, sentence, params.Uq);
  if (mode == TSEMode::Verbatim) {
    // (S·Uq)(S·Uk)^T is 1x1: the same shift lands on every logit.
    Tensor sk = matmul(tape, sentence, params.Uk);
    Tensor c = scale(tape, matmul_nt(tape, su, sk), inv);
    return add_scalar_broadcast(tape, word, c);
  }
  // sentence-key: (S·Uq)(q̂_j·Uk)^T varies with the key position j.
  Tensor qk = matmul(tape, qhat, params.Uk);
  Tensor row = scale(tape, matmul_nt(tape, su, qk), inv);  // 1 x n
  return add_row_broadcast(tape, word, row);
}

Tensor tse_forward(Tape& tape, const Tensor& qhat, const Tensor& sentence, const TSEParams& params,
                   TSEMode mode, const std::vector<bool>& mask) {
  Tensor alpha = tse_logits(tape, qhat, sentence, params, mode);
  Tensor weights = softmax_rows(tape, alpha, &mask);
  return matmul(tape, weights, matmul(tape, qhat, params.Wv));
}

}  // namespace wsdan
