#include "wsdan/dal.hpp"

#include <cmath>

namespace wsdan {

std::string to_string(StackMode mode) {
  switch (mode) {
    case StackMode::Both: return "both";
    case StackMode::ImageGuidedOnly: return "image-guided-only";
    case StackMode::QuestionGuidedOnly: return "question-guided-only";
  }
  return "?";
}

StackMode stack_mode_from_string(const std::string& s) {
  if (s == "both") return StackMode::Both;
  if (s == "image-guided-only") return StackMode::ImageGuidedOnly;
  if (s == "question-guided-only") return StackMode::QuestionGuidedOnly;
  throw ContractError("unknown stack mode '" + s + "'");
}

Tensor multi_head_attention(Tape& tape, const Tensor& qin, const Tensor& kin, const Tensor& vin,
                            const MAParams& params, const std::vector<bool>* keymask,
                            std::vector<Tensor>* head_maps) {
  const size_t d = qin.cols();
  if (kin.rows() != vin.rows()) {
    throw DimensionError("multi_head_attention: key rows " + std::to_string(kin.rows()) +
                         " vs value rows " + std::to_string(vin.rows()));
  }
  if (kin.cols() != d || vin.cols() != d) {
    throw DimensionError("multi_head_attention: width mismatch " + qin.shape_str() + " / " +
                         kin.shape_str() + " / " + vin.shape_str());
  }
  if (params.heads == 0 || d % params.heads != 0) {
    throw DimensionError("multi_head_attention: heads must divide d (" + std::to_string(d) + "/" +
                         std::to_string(params.heads) + ")");
  }
  for (const Tensor* w : {&params.Wq, &params.Wk, &params.Wv, &params.Wo}) {
    if (w->rows() != d || w->cols() != d) {
      throw DimensionError("multi_head_attention: projection must be " + std::to_string(d) + "x" +
                           std::to_string(d) + ", got " + w->shape_str());
    }
  }
  const size_t dh = d / params.heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor qp = matmul(tape, qin, params.Wq);
  Tensor kp = matmul(tape, kin, params.Wk);
  Tensor vp = matmul(tape, vin, params.Wv);

  std::vector<Tensor> heads;
  heads.reserve(params.heads);
  for (size_t j = 0; j < params.heads; ++j) {
    Tensor qj = slice_cols(tape, qp, j * dh, (j + 1) * dh);
    Tensor kj = slice_cols(tape, kp, j * dh, (j + 1) * dh);
    Tensor vj = slice_cols(tape, vp, j * dh, (j + 1) * dh);
    Tensor scores = scale(tape, matmul_nt(tape, qj, kj), inv);
    Tensor weights = softmax_rows(tape, scores, keymask);
    if (head_maps) head_maps->push_back(weights);
    heads.push_back(matmul(tape, weights, vj));
  }
  Tensor cat = params.heads == 1 ? heads[0] : concat_cols(tape, heads);
  return matmul(tape, cat, params.Wo);
}

Tensor self_attention(Tape& tape, const Tensor& x, const MAParams& params,
                      const std::vector<bool>* mask, std::vector<Tensor>* head_maps) {
  return multi_head_attention(tape, x, x, x, params, mask, head_maps);
}

Tensor guided_attention(Tape& tape, const Tensor& x, const Tensor& y, const MAParams& params,
                        const std::vector<bool>* ymask, std::vector<Tensor>* head_maps) {
  return multi_head_attention(tape, x, y, y, params, ymask, head_maps);
}

namespace {

Tensor ffn_forward(Tape& tape, const Tensor& x, const FFNParams& p) {
  Tensor h = relu(tape, add_row_broadcast(tape, matmul(tape, x, p.W1), p.b1));
  return add_row_broadcast(tape, matmul(tape, h, p.W2), p.b2);
}

Tensor sublayer(Tape& tape, const Tensor& x, Tensor out, const NormParams& norm, double eps,
                double rate, Rng* rng) {
  if (rate > 0.0 && rng) out = dropout(tape, out, rate, *rng);
  return layer_norm(tape, add(tape, x, out), norm.gain, norm.bias, eps);
}

void collect(std::vector<AttnEntry>* maps, size_t layer, const char* site,
             std::vector<Tensor>& heads) {
  if (!maps) return;
  for (size_t j = 0; j < heads.size(); ++j) maps->push_back({layer, site, j, heads[j]});
}

}  // namespace

DualFeatures dal_forward(Tape& tape, const DualFeatures& in, const DALParams& params,
                         const StackConfig& config, Rng* dropout_rng, size_t layer_index,
                         std::vector<AttnEntry>* maps) {
  if (in.qmask.size() != in.Q.rows()) {
    throw DimensionError("dal_forward: qmask length " + std::to_string(in.qmask.size()) +
                         " vs question rows " + std::to_string(in.Q.rows()));
  }
  const double rate = config.dropout;
  const double eps = config.norm_eps;

  // stage 1: per-stream self-attention (keys masked only on the Q stream)
  std::vector<Tensor> v_sa_maps, q_sa_maps;
  Tensor v_sa_out = self_attention(tape, in.V, params.v_self, nullptr, &v_sa_maps);
  Tensor q_sa_out = self_attention(tape, in.Q, params.q_self, &in.qmask, &q_sa_maps);
  collect(maps, layer_index, "v_self", v_sa_maps);
  collect(maps, layer_index, "q_self", q_sa_maps);
  Tensor v1 = sublayer(tape, in.V, v_sa_out, params.v_norm1, eps, rate, dropout_rng);
  Tensor q1 = sublayer(tape, in.Q, q_sa_out, params.q_norm1, eps, rate, dropout_rng);

  // stage 2: guided attention, both streams reading the other's post-SA
  // representation from this same layer
  Tensor v2 = v1, q2 = q1;
  if (config.mode != StackMode::ImageGuidedOnly) {
    std::vector<Tensor> v_ga_maps;
    Tensor v_ga_out = guided_attention(tape, v1, q1, params.v_guided, &in.qmask, &v_ga_maps);
    collect(maps, layer_index, "v_guided", v_ga_maps);
    v2 = sublayer(tape, v1, v_ga_out, params.v_norm2, eps, rate, dropout_rng);
  }
  if (config.mode != StackMode::QuestionGuidedOnly) {
    std::vector<Tensor> q_ga_maps;
    Tensor q_ga_out = guided_attention(tape, q1, v1, params.q_guided, nullptr, &q_ga_maps);
    collect(maps, layer_index, "q_guided", q_ga_maps);
    q2 = sublayer(tape, q1, q_ga_out, params.q_norm2, eps, rate, dropout_rng);
  }

  // stage 3: position-wise feed-forward
  Tensor v3 = v2, q3 = q2;
  if (config.ffn) {
    v3 = sublayer(tape, v2, ffn_forward(tape, v2, params.v_ffn), params.v_norm3, eps, rate,
                  dropout_rng);
    q3 = sublayer(tape, q2, ffn_forward(tape, q2, params.q_ffn), params.q_norm3, eps, rate,
                  dropout_rng);
  }
  return {v3, q3, in.qmask};
}

StackResult stack_forward(Tape& tape, const DualFeatures& in, const std::vector<DALParams>& params,
                          const StackConfig& config, Rng* dropout_rng) {
  if (config.layers < 1) throw ContractError("stack_forward: at least one layer required");
  if (params.size() != config.layers) {
    throw DimensionError("stack_forward: " + std::to_string(params.size()) + " layer params for " +
                         std::to_string(config.layers) + " layers");
  }
  StackResult result;
  result.features = in;
  for (size_t l = 0; l < config.layers; ++l) {
    result.features =
        dal_forward(tape, result.features, params[l], config, dropout_rng, l, &result.attn);
  }
  return result;
}

}  // namespace wsdan
