#pragma once

#include <map>
#include <string>
#include <vector>

#include "wsdan/checkpoint.hpp"
#include "wsdan/gradcheck.hpp"
#include "wsdan/metrics.hpp"
#include "wsdan/model.hpp"
#include "wsdan/synth.hpp"

namespace wsdan {

/// Training loss diverged (NaN); the last finite checkpoint was written.
struct TrainDivergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Line-based `key = value` configuration with `#` comments. Every parsed
/// key is echoed (in file order) into the run log header.
struct KeyValueConfig {
  std::vector<std::pair<std::string, std::string>> entries;  // file order

  static KeyValueConfig parse_file(const std::string& path);
  static KeyValueConfig parse_text(const std::string& text);
  bool has(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  uint64_t get_u64(const std::string& key, uint64_t fallback) const;
  bool get_flag(const std::string& key, bool fallback) const;
  void set(const std::string& key, const std::string& value);
  std::string echo() const;  // canonical `key = value` lines
};

struct TrainConfig {
  ModelConfig model;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  size_t batch_size = 16;
  size_t max_epochs = 100;
  size_t patience = 10;
  double factor = 0.1;
  uint64_t seed = 1;
  double early_stop_acc = 0.0;  // 0 disables early stopping
  std::string data_dir;
  std::string out_dir = ".";
  std::string provider = "file";

  static TrainConfig from_kv(const KeyValueConfig& kv);
  KeyValueConfig to_kv() const;
};

SynthSpec synth_spec_from_kv(const KeyValueConfig& kv);

/// Learning-rate decay on a monitored loss: after `patience` consecutive
/// epochs without improvement the rate is multiplied by `factor` and the
/// bad-epoch counter resets.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr0, double factor, size_t patience)
      : lr_(lr0), factor_(factor), patience_(patience) {}

  /// Feed one epoch's monitored loss; returns the (possibly decayed) lr.
  double observe(double loss);
  double lr() const { return lr_; }
  size_t triggers() const { return triggers_; }

 private:
  double lr_;
  double factor_;
  size_t patience_;
  double best_ = std::numeric_limits<double>::infinity();
  size_t bad_epochs_ = 0;
  size_t triggers_ = 0;
};

/// Adam with bias correction; state vectors follow the parameter registry
/// order. Parameters with requires_grad false are skipped.
class AdamOptimizer {
 public:
  AdamOptimizer(double beta1, double beta2, double eps)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<std::pair<std::string, Tensor>>& params, double lr);

 private:
  double beta1_, beta2_, eps_;
  long long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

struct LogRow {
  size_t epoch;
  double train_loss, val_loss, val_acc, lr;
};

struct TrainResult {
  TrainResult(ModelParams p, ModelConfig c) : params(std::move(p)), model_config(c) {}

  ModelParams params;  // best-by-validation weights
  ModelConfig model_config;
  size_t best_epoch = 0;
  double best_val_loss = 0.0;
  double best_val_acc = 0.0;
  std::vector<LogRow> log;
  std::string checkpoint_path;
  std::string log_path;
  std::string batch_hash_path;
};

/// Deterministic training loop: seeded init, seeded per-epoch shuffle,
/// seeded per-batch dropout streams, Adam with a plateau schedule, best
/// checkpoint + run log + batch-order hashes written under out_dir.
TrainResult train(const TrainConfig& config, const Dataset& dataset);

/// Mean label-smoothed CE over examples, dropout off.
double evaluate_loss(const ModelParams& params, const ModelConfig& config,
                     const std::vector<Example>& examples);

/// Per-example argmax prediction and full report (accuracy/BLEU per
/// category, Eq-11 overall, confusion matrices per category).
EvalReport evaluate(const ModelParams& params, const ModelConfig& config,
                    const std::vector<Example>& examples, const AnswerVocab& answers);

/// Restores a model from a checkpoint (shapes from the stored config text).
std::pair<ModelParams, ModelConfig> restore_model(const Checkpoint& ckpt);

struct AblateResult {
  std::vector<std::string> modes;
  std::vector<EvalReport> reports;
  std::string csv_path;
};

/// Trains the three stack modes with an identical seed and data order
/// (verified via the logged batch hashes) and writes a comparison CSV.
AblateResult ablate(const TrainConfig& config, const Dataset& dataset);

/// Full-loss gradient check over every parameter group on a deterministic
/// tiny example. Requires dropout 0.
GradCheckReport gradcheck_model(const ModelConfig& config, uint64_t seed, double h, double tol);

/// Writes one CSV per (layer, site, head) attention matrix with token /
/// image-block labels on the axes. Returns the written file names.
std::vector<std::string> export_attention(const ModelParams& params, const ModelConfig& config,
                                          const Example& example, const Vocab& vocab,
                                          const std::string& out_dir);

}  // namespace wsdan
