#pragma once

#include <string>
#include <utility>
#include <vector>

#include "wsdan/dal.hpp"
#include "wsdan/data.hpp"
#include "wsdan/fusion.hpp"
#include "wsdan/tse.hpp"

namespace wsdan {

struct ModelConfig {
  size_t d = 312;
  size_t h = 12;
  size_t n = 20;
  size_t L = 2;
  size_t vocab = 0;        // filled from the dataset
  size_t num_answers = 0;  // filled from the dataset
  TSEMode tse_mode = TSEMode::SentenceKey;
  StackMode stack_mode = StackMode::Both;
  bool ffn = true;
  double dropout = 0.0;
  double label_smooth_eps = 0.10;
  bool add_markers = false;
  bool freeze_embedding = false;

  void validate() const;
};

/// All learnable tensors, registered in a fixed order by name. The order
/// (and the RNG draw order at init) is independent of the stack mode so
/// ablation runs share identical initial weights.
class ModelParams {
 public:
  ModelParams(const ModelConfig& config, Rng& rng);

  Tensor embedding;  // vocab x d
  TSEParams tse;
  std::vector<DALParams> dals;
  FusionParams fusion;
  ClassifierParams classifier;

  const std::vector<std::pair<std::string, Tensor>>& named() const { return named_; }
  Tensor find(const std::string& name) const;
  void zero_grads();
  /// Deep copy (values only; fresh zero grads).
  ModelParams clone_values(const ModelConfig& config) const;
  /// Overwrite all values from another instance of the same shape.
  void load_values(const ModelParams& other);
  size_t parameter_count() const;

 private:
  std::vector<std::pair<std::string, Tensor>> named_;
};

struct ForwardOutput {
  Tensor logits;                // 1 x N, on the tape
  std::vector<AttnEntry> attn;  // stack softmax matrices, layer by layer
};

/// Full data path: word embedding -> TSE -> DAL stack -> weighted-sum
/// fusion -> classifier logits.
ForwardOutput model_forward(Tape& tape, const ModelParams& params, const ModelConfig& config,
                            const Example& example, Rng* dropout_rng = nullptr,
                            bool collect_attn = false);

/// model_forward + label-smoothed cross-entropy against example.answer.
Tensor model_loss(Tape& tape, const ModelParams& params, const ModelConfig& config,
                  const Example& example, Rng* dropout_rng = nullptr);

}  // namespace wsdan
