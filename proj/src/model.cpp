#include "wsdan/model.hpp"

#include <cmath>

namespace wsdan {

void ModelConfig::validate() const {
  if (d == 0 || h == 0 || d % h != 0) {
    throw ContractError("model config: heads must divide d (d=" + std::to_string(d) +
                        ", h=" + std::to_string(h) + ")");
  }
  if (n == 0) throw ContractError("model config: padded length n must be positive");
  if (L == 0) throw ContractError("model config: at least one DAL required");
  if (vocab < 5) throw ContractError("model config: vocabulary not set");
  if (num_answers < 2) throw ContractError("model config: answer set not set");
  if (label_smooth_eps < 0.0 || label_smooth_eps >= 1.0) {
    throw ContractError("model config: label smoothing eps must be in [0,1)");
  }
  if (dropout < 0.0 || dropout >= 1.0) {
    throw ContractError("model config: dropout must be in [0,1)");
  }
}

namespace {

Tensor init_normal(size_t rows, size_t cols, double sd, Rng& rng) {
  Tensor t = Tensor::zeros(rows, cols, true);
  for (size_t i = 0; i < t.size(); ++i) t.data()[i] = sd * rng.normal();
  return t;
}

}  // namespace

ModelParams::ModelParams(const ModelConfig& config, Rng& rng) {
  config.validate();
  const size_t d = config.d;
  const double sd = 1.0 / std::sqrt(static_cast<double>(d));
  const double sd_ffn2 = 1.0 / std::sqrt(static_cast<double>(4 * d));

  auto reg = [this](const std::string& name, Tensor t) {
    named_.emplace_back(name, t);
    return t;
  };

  embedding = reg("embed.E", init_normal(config.vocab, d, sd, rng));
  if (config.freeze_embedding) embedding.set_requires_grad(false);

  tse.Wq = reg("tse.Wq", init_normal(d, d, sd, rng));
  tse.Wk = reg("tse.Wk", init_normal(d, d, sd, rng));
  tse.Wv = reg("tse.Wv", init_normal(d, d, sd, rng));
  tse.Uq = reg("tse.Uq", init_normal(d, d, sd, rng));
  tse.Uk = reg("tse.Uk", init_normal(d, d, sd, rng));

  dals.resize(config.L);
  for (size_t l = 0; l < config.L; ++l) {
    std::string base = "dal" + std::to_string(l) + ".";
    for (const char* stream : {"v", "q"}) {
      std::string p = base + stream + ".";
      MAParams& sa = stream[0] == 'v' ? dals[l].v_self : dals[l].q_self;
      MAParams& ga = stream[0] == 'v' ? dals[l].v_guided : dals[l].q_guided;
      FFNParams& ffn = stream[0] == 'v' ? dals[l].v_ffn : dals[l].q_ffn;
      NormParams* norms[3] = {
          stream[0] == 'v' ? &dals[l].v_norm1 : &dals[l].q_norm1,
          stream[0] == 'v' ? &dals[l].v_norm2 : &dals[l].q_norm2,
          stream[0] == 'v' ? &dals[l].v_norm3 : &dals[l].q_norm3,
      };
      sa.heads = config.h;
      ga.heads = config.h;
      sa.Wq = reg(p + "sa.Wq", init_normal(d, d, sd, rng));
      sa.Wk = reg(p + "sa.Wk", init_normal(d, d, sd, rng));
      sa.Wv = reg(p + "sa.Wv", init_normal(d, d, sd, rng));
      sa.Wo = reg(p + "sa.Wo", init_normal(d, d, sd, rng));
      ga.Wq = reg(p + "ga.Wq", init_normal(d, d, sd, rng));
      ga.Wk = reg(p + "ga.Wk", init_normal(d, d, sd, rng));
      ga.Wv = reg(p + "ga.Wv", init_normal(d, d, sd, rng));
      ga.Wo = reg(p + "ga.Wo", init_normal(d, d, sd, rng));
      ffn.W1 = reg(p + "ffn.W1", init_normal(d, 4 * d, sd, rng));
      ffn.b1 = reg(p + "ffn.b1", Tensor::zeros(1, 4 * d, true));
      ffn.W2 = reg(p + "ffn.W2", init_normal(4 * d, d, sd_ffn2, rng));
      ffn.b2 = reg(p + "ffn.b2", Tensor::zeros(1, d, true));
      for (int k = 0; k < 3; ++k) {
        std::string np = p + "norm" + std::to_string(k + 1) + ".";
        norms[k]->gain = reg(np + "gain", Tensor::full(1, d, 1.0, true));
        norms[k]->bias = reg(np + "bias", Tensor::zeros(1, d, true));
      }
    }
  }

  fusion.Wv = reg("fusion.Wv", Tensor::full(1, 5, 1.0 / 5.0, true));
  fusion.Wq = reg("fusion.Wq", Tensor::full(1, config.n, 1.0 / static_cast<double>(config.n), true));

  classifier.W1 = reg("clf.W1", init_normal(d, d, sd, rng));
  classifier.b1 = reg("clf.b1", Tensor::zeros(1, d, true));
  classifier.W2 = reg("clf.W2", init_normal(d, config.num_answers, sd, rng));
  classifier.b2 = reg("clf.b2", Tensor::zeros(1, config.num_answers, true));
}

Tensor ModelParams::find(const std::string& name) const {
  for (const auto& [n, t] : named_) {
    if (n == name) return t;
  }
  throw LookupError("model params: no tensor named '" + name + "'");
}

void ModelParams::zero_grads() {
  for (auto& [name, t] : named_) t.zero_grad();
}

ModelParams ModelParams::clone_values(const ModelConfig& config) const {
  Rng throwaway(0);
  ModelParams copy(config, throwaway);
  copy.load_values(*this);
  return copy;
}

void ModelParams::load_values(const ModelParams& other) {
  if (other.named_.size() != named_.size()) {
    throw ContractError("model params: mismatched parameter sets");
  }
  for (size_t i = 0; i < named_.size(); ++i) {
    if (named_[i].first != other.named_[i].first) {
      throw ContractError("model params: name mismatch at " + named_[i].first);
    }
    named_[i].second.copy_values_from(other.named_[i].second);
  }
}

size_t ModelParams::parameter_count() const {
  size_t total = 0;
  for (const auto& [name, t] : named_) total += t.size();
  return total;
}

ForwardOutput model_forward(Tape& tape, const ModelParams& params, const ModelConfig& config,
                            const Example& example, Rng* dropout_rng, bool collect_attn) {
  if (example.sentence.v.size() != config.d) {
    throw DimensionError("model_forward: sentence embedding length " +
                         std::to_string(example.sentence.v.size()) + " vs d=" +
                         std::to_string(config.d));
  }
  if (example.V.rows() != 5 || example.V.cols() != config.d) {
    throw DimensionError("model_forward: image features " + example.V.shape_str() + " vs 5x" +
                         std::to_string(config.d));
  }
  if (example.tokens.ids.size() != config.n) {
    throw DimensionError("model_forward: token sequence length " +
                         std::to_string(example.tokens.ids.size()) + " vs n=" +
                         std::to_string(config.n));
  }

  Tensor qhat = embed_words(tape, example.tokens, params.embedding);
  Tensor sentence = Tensor::from(1, config.d, example.sentence.v);
  Tensor q0 =
      tse_forward(tape, qhat, sentence, params.tse, config.tse_mode, example.tokens.mask);

  StackConfig stack_cfg;
  stack_cfg.layers = config.L;
  stack_cfg.mode = config.stack_mode;
  stack_cfg.dropout = config.dropout;
  stack_cfg.ffn = config.ffn;

  DualFeatures in{example.V, q0, example.tokens.mask};
  StackResult stack = stack_forward(tape, in, params.dals, stack_cfg, dropout_rng);

  Tensor z = fuse(tape, stack.features.V, stack.features.Q, params.fusion, example.tokens.mask);
  Tensor logits = classify_logits(tape, z, params.classifier);

  ForwardOutput out;
  out.logits = logits;
  if (collect_attn) out.attn = std::move(stack.attn);
  return out;
}

Tensor model_loss(Tape& tape, const ModelParams& params, const ModelConfig& config,
                  const Example& example, Rng* dropout_rng) {
  if (example.answer < 0) throw ContractError("model_loss: example has no answer class");
  ForwardOutput out = model_forward(tape, params, config, example, dropout_rng);
  return smoothed_ce_logits(tape, out.logits, example.answer, config.label_smooth_eps);
}

}  // namespace wsdan
