#pragma once

#include <string>
#include <vector>

#include "wsdan/tensor.hpp"

namespace wsdan {

/// Multi-head attention parameters. Per-head projections are stored packed:
/// head j owns the column block [j*d_h, (j+1)*d_h) of Wq/Wk/Wv, with
/// h * d_h = d. Wo mixes the concatenated heads back to width d.
struct MAParams {
  Tensor Wq, Wk, Wv;  // d x d, packed heads
  Tensor Wo;          // d x d
  size_t heads = 1;
};

struct FFNParams {
  Tensor W1;  // d x 4d
  Tensor b1;  // 1 x 4d
  Tensor W2;  // 4d x d
  Tensor b2;  // 1 x d
};

struct NormParams {
  Tensor gain, bias;  // 1 x d
};

/// Everything one dual-attention layer owns. Both streams keep their full
/// parameter set even when an ablation mode leaves one guided path unused.
struct DALParams {
  MAParams v_self, v_guided;
  MAParams q_self, q_guided;
  FFNParams v_ffn, q_ffn;
  NormParams v_norm1, v_norm2, v_norm3;
  NormParams q_norm1, q_norm2, q_norm3;
};

/// Which guided-attention paths run. Both keeps F(V,Q) and F(Q,V);
/// ImageGuidedOnly keeps only F(Q,V) (image guides the question stream);
/// QuestionGuidedOnly keeps only F(V,Q).
enum class StackMode { Both, ImageGuidedOnly, QuestionGuidedOnly };

std::string to_string(StackMode mode);
StackMode stack_mode_from_string(const std::string& s);

struct StackConfig {
  size_t layers = 2;
  StackMode mode = StackMode::Both;
  double dropout = 0.0;
  bool ffn = true;
  double norm_eps = 1e-5;
};

/// The (V, Q) feature pair flowing through the cascade. V is 5 x d (image
/// blocks, never padded); Q is n x d with qmask marking real tokens.
struct DualFeatures {
  Tensor V;
  Tensor Q;
  std::vector<bool> qmask;
};

/// One exported softmax matrix: layer index, site name
/// (v_self | q_self | v_guided | q_guided), head index, and the weights.
struct AttnEntry {
  size_t layer;
  std::string site;
  size_t head;
  Tensor weights;
};

/// MA(Qin, Kin, Vin) per Eqs 5-6; per-head softmax matrices are appended to
/// head_maps when given.
Tensor multi_head_attention(Tape& tape, const Tensor& qin, const Tensor& kin, const Tensor& vin,
                            const MAParams& params, const std::vector<bool>* keymask = nullptr,
                            std::vector<Tensor>* head_maps = nullptr);

/// F(X,X) = MA(X, X, X).
Tensor self_attention(Tape& tape, const Tensor& x, const MAParams& params,
                      const std::vector<bool>* mask = nullptr,
                      std::vector<Tensor>* head_maps = nullptr);

/// F(X,Y) = MA(X, Y, Y): Y guides the reconstruction of X.
Tensor guided_attention(Tape& tape, const Tensor& x, const Tensor& y, const MAParams& params,
                        const std::vector<bool>* ymask = nullptr,
                        std::vector<Tensor>* head_maps = nullptr);

/// One dual-attention layer: per-stream self-attention, then the guided
/// paths selected by config.mode (both SA outputs feed both GA inputs),
/// then the position-wise feed-forward, each sublayer wrapped in
/// residual + post-norm. dropout_rng may be null when config.dropout == 0.
DualFeatures dal_forward(Tape& tape, const DualFeatures& in, const DALParams& params,
                         const StackConfig& config, Rng* dropout_rng = nullptr,
                         size_t layer_index = 0, std::vector<AttnEntry>* maps = nullptr);

struct StackResult {
  DualFeatures features;
  std::vector<AttnEntry> attn;
};

/// Folds dal_forward over config.layers layers, collecting every softmax
/// matrix for export.
StackResult stack_forward(Tape& tape, const DualFeatures& in, const std::vector<DALParams>& params,
                          const StackConfig& config, Rng* dropout_rng = nullptr);

}  // namespace wsdan
