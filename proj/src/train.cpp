#include "wsdan/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace wsdan {

namespace fs = std::filesystem;

namespace {

uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

uint64_t derive_seed(uint64_t seed, uint64_t stream, uint64_t a = 0, uint64_t b = 0) {
  return mix64(mix64(mix64(seed) ^ stream) ^ (a * 0x100000001b3ULL + b));
}

uint64_t fnv1a(const std::string& s, uint64_t h) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

// ==================== config ====================

KeyValueConfig KeyValueConfig::parse_text(const std::string& text) {
  KeyValueConfig kv;
  std::istringstream in(text);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ParseError("config line " + std::to_string(lineno) + ": empty key");
    }
    kv.set(key, value);
  }
  return kv;
}

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), {});
  return parse_text(text);
}

bool KeyValueConfig::has(const std::string& key) const {
  for (const auto& [k, v] : entries) {
    if (k == key) return true;
  }
  return false;
}

std::string KeyValueConfig::get(const std::string& key, const std::string& fallback) const {
  for (const auto& [k, v] : entries) {
    if (k == key) return v;
  }
  return fallback;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  std::string v = get(key, "");
  if (v.empty()) return fallback;
  size_t pos = 0;
  double x = std::stod(v, &pos);
  if (pos != v.size()) throw ParseError("config: bad number for " + key + ": '" + v + "'");
  return x;
}

uint64_t KeyValueConfig::get_u64(const std::string& key, uint64_t fallback) const {
  std::string v = get(key, "");
  if (v.empty()) return fallback;
  size_t pos = 0;
  uint64_t x = std::stoull(v, &pos);
  if (pos != v.size()) throw ParseError("config: bad integer for " + key + ": '" + v + "'");
  return x;
}

bool KeyValueConfig::get_flag(const std::string& key, bool fallback) const {
  std::string v = get(key, "");
  if (v.empty()) return fallback;
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw ParseError("config: bad flag for " + key + ": '" + v + "'");
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries.emplace_back(key, value);
}

std::string KeyValueConfig::echo() const {
  std::string out;
  for (const auto& [k, v] : entries) out += k + " = " + v + "\n";
  return out;
}

namespace {
const std::set<std::string> kKnownKeys = {
    "d", "h", "n", "L", "tse_mode", "stack_mode", "ffn", "dropout", "eps", "add_markers",
    "freeze_embedding", "vocab_size", "num_answers", "lr", "beta1", "beta2", "eps_adam",
    "batch_size", "max_epochs", "patience", "factor", "seed", "early_stop_acc", "data_dir",
    "out_dir", "provider"};
}

TrainConfig TrainConfig::from_kv(const KeyValueConfig& kv) {
  for (const auto& [k, v] : kv.entries) {
    if (kKnownKeys.count(k) == 0 && k.rfind("synth_", 0) != 0) {
      throw ParseError("config: unknown key '" + k + "'");
    }
  }
  TrainConfig c;
  c.model.d = kv.get_u64("d", c.model.d);
  c.model.h = kv.get_u64("h", c.model.h);
  c.model.n = kv.get_u64("n", c.model.n);
  c.model.L = kv.get_u64("L", c.model.L);
  c.model.vocab = kv.get_u64("vocab_size", c.model.vocab);
  c.model.num_answers = kv.get_u64("num_answers", c.model.num_answers);
  std::string tse = kv.get("tse_mode", "sentence-key");
  if (tse == "sentence-key") {
    c.model.tse_mode = TSEMode::SentenceKey;
  } else if (tse == "verbatim") {
    c.model.tse_mode = TSEMode::Verbatim;
  } else {
    throw ParseError("config: unknown tse_mode '" + tse + "'");
  }
  c.model.stack_mode = stack_mode_from_string(kv.get("stack_mode", "both"));
  c.model.ffn = kv.get_flag("ffn", true);
  c.model.dropout = kv.get_double("dropout", 0.0);
  c.model.label_smooth_eps = kv.get_double("eps", 0.10);
  c.model.add_markers = kv.get_flag("add_markers", false);
  c.model.freeze_embedding = kv.get_flag("freeze_embedding", false);
  c.lr = kv.get_double("lr", c.lr);
  c.beta1 = kv.get_double("beta1", c.beta1);
  c.beta2 = kv.get_double("beta2", c.beta2);
  c.eps_adam = kv.get_double("eps_adam", c.eps_adam);
  c.batch_size = kv.get_u64("batch_size", c.batch_size);
  c.max_epochs = kv.get_u64("max_epochs", c.max_epochs);
  c.patience = kv.get_u64("patience", c.patience);
  c.factor = kv.get_double("factor", c.factor);
  c.seed = kv.get_u64("seed", c.seed);
  c.early_stop_acc = kv.get_double("early_stop_acc", 0.0);
  c.data_dir = kv.get("data_dir", "");
  c.out_dir = kv.get("out_dir", c.out_dir);
  c.provider = kv.get("provider", c.provider);
  if (c.batch_size == 0) throw ParseError("config: batch_size must be positive");
  if (c.max_epochs == 0) throw ParseError("config: max_epochs must be positive");
  return c;
}

KeyValueConfig TrainConfig::to_kv() const {
  KeyValueConfig kv;
  kv.set("d", std::to_string(model.d));
  kv.set("h", std::to_string(model.h));
  kv.set("n", std::to_string(model.n));
  kv.set("L", std::to_string(model.L));
  kv.set("vocab_size", std::to_string(model.vocab));
  kv.set("num_answers", std::to_string(model.num_answers));
  kv.set("tse_mode", model.tse_mode == TSEMode::SentenceKey ? "sentence-key" : "verbatim");
  kv.set("stack_mode", to_string(model.stack_mode));
  kv.set("ffn", model.ffn ? "on" : "off");
  kv.set("dropout", fmt("%.17g", model.dropout));
  kv.set("eps", fmt("%.17g", model.label_smooth_eps));
  kv.set("add_markers", model.add_markers ? "on" : "off");
  kv.set("freeze_embedding", model.freeze_embedding ? "on" : "off");
  kv.set("lr", fmt("%.17g", lr));
  kv.set("beta1", fmt("%.17g", beta1));
  kv.set("beta2", fmt("%.17g", beta2));
  kv.set("eps_adam", fmt("%.17g", eps_adam));
  kv.set("batch_size", std::to_string(batch_size));
  kv.set("max_epochs", std::to_string(max_epochs));
  kv.set("patience", std::to_string(patience));
  kv.set("factor", fmt("%.17g", factor));
  kv.set("seed", std::to_string(seed));
  kv.set("early_stop_acc", fmt("%.17g", early_stop_acc));
  kv.set("data_dir", data_dir);
  kv.set("out_dir", out_dir);
  kv.set("provider", provider);
  return kv;
}

SynthSpec synth_spec_from_kv(const KeyValueConfig& kv) {
  SynthSpec spec;
  spec.seed = kv.get_u64("seed", spec.seed);
  spec.d = kv.get_u64("d", spec.d);
  spec.pad_length = kv.get_u64("n", spec.pad_length);
  spec.num_examples = kv.get_u64("synth_examples", spec.num_examples);
  spec.vocab_size = kv.get_u64("synth_vocab_size", spec.vocab_size);
  spec.num_modalities = kv.get_u64("synth_modalities", spec.num_modalities);
  spec.num_organs = kv.get_u64("synth_organs", spec.num_organs);
  spec.sigma = kv.get_double("synth_sigma", spec.sigma);
  spec.split_train = kv.get_double("synth_split_train", spec.split_train);
  spec.split_val = kv.get_double("synth_split_val", spec.split_val);
  spec.split_test = kv.get_double("synth_split_test", spec.split_test);
  spec.reproduce_label_shift = kv.get_flag("synth_label_shift", false);
  return spec;
}

// ==================== plateau scheduler ====================

double PlateauScheduler::observe(double loss) {
  if (loss < best_) {
    best_ = loss;
    bad_epochs_ = 0;
  } else {
    ++bad_epochs_;
    if (bad_epochs_ >= patience_) {
      lr_ *= factor_;
      ++triggers_;
      bad_epochs_ = 0;
    }
  }
  return lr_;
}

// ==================== Adam ====================

void AdamOptimizer::step(const std::vector<std::pair<std::string, Tensor>>& params, double lr) {
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i].second.size(), 0.0);
      v_[i].assign(params[i].second.size(), 0.0);
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor t = params[i].second;
    if (!t.requires_grad()) continue;
    double* w = t.data();
    const double* g = t.grad();
    for (size_t k = 0; k < t.size(); ++k) {
      m_[i][k] = beta1_ * m_[i][k] + (1.0 - beta1_) * g[k];
      v_[i][k] = beta2_ * v_[i][k] + (1.0 - beta2_) * g[k] * g[k];
      double mhat = m_[i][k] / bc1;
      double vhat = v_[i][k] / bc2;
      w[k] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

// ==================== evaluation ====================

double evaluate_loss(const ModelParams& params, const ModelConfig& config,
                     const std::vector<Example>& examples) {
  if (examples.empty()) throw ContractError("evaluate_loss: empty example list");
  ModelConfig eval_cfg = config;
  eval_cfg.dropout = 0.0;
  double sum = 0.0;
  for (const Example& ex : examples) {
    Tape tape;
    sum += model_loss(tape, params, eval_cfg, ex).data()[0];
  }
  return sum / static_cast<double>(examples.size());
}

EvalReport evaluate(const ModelParams& params, const ModelConfig& config,
                    const std::vector<Example>& examples, const AnswerVocab& answers) {
  if (examples.empty()) throw ContractError("evaluate: empty example list");
  ModelConfig eval_cfg = config;
  eval_cfg.dropout = 0.0;
  std::vector<std::string> preds, golds, cats;
  preds.reserve(examples.size());
  EvalReport report;
  for (const Example& ex : examples) {
    Tape tape;
    ForwardOutput out = model_forward(tape, params, eval_cfg, ex);
    AnswerDistribution dist = make_distribution(out.logits);
    preds.push_back(answers.name(predict(dist)));
    golds.push_back(ex.answer_text);
    cats.push_back(ex.category);
    if (ex.answer == answers.unknown_id()) report.unknown_gold++;
  }
  report.per_category = accuracy_by_category(preds, golds, cats);
  report.overall_acc = overall_accuracy(report.per_category);
  report.overall_bleu = overall_bleu(report.per_category);
  report.total = static_cast<long long>(examples.size());

  // confusion matrix per category, labels = sorted unique golds
  std::map<std::string, std::set<std::string>> label_sets;
  for (size_t i = 0; i < examples.size(); ++i) {
    label_sets[cats[i]].insert(normalize_answer(golds[i]));
  }
  for (const auto& [cat, labels] : label_sets) {
    std::vector<std::string> cat_preds, cat_golds;
    for (size_t i = 0; i < examples.size(); ++i) {
      if (cats[i] != cat) continue;
      cat_preds.push_back(normalize_answer(preds[i]));
      cat_golds.push_back(normalize_answer(golds[i]));
    }
    report.confusions.emplace(
        cat, ConfusionMatrix(std::vector<std::string>(labels.begin(), labels.end()), cat_preds,
                             cat_golds));
  }
  return report;
}

// ==================== checkpoint glue ====================

namespace {

Checkpoint make_checkpoint(const ModelParams& params, const TrainConfig& config, size_t epoch,
                           const std::string& rng_state) {
  Checkpoint ckpt;
  ckpt.epoch = static_cast<uint32_t>(epoch);
  ckpt.config_text = config.to_kv().echo();
  ckpt.rng_state = rng_state;
  for (const auto& [name, t] : params.named()) ckpt.tensors.emplace_back(name, t.clone());
  return ckpt;
}

}  // namespace

std::pair<ModelParams, ModelConfig> restore_model(const Checkpoint& ckpt) {
  TrainConfig config = TrainConfig::from_kv(KeyValueConfig::parse_text(ckpt.config_text));
  Rng rng(0);
  ModelParams params(config.model, rng);
  if (ckpt.tensors.size() != params.named().size()) {
    throw ParseError("checkpoint: expected " + std::to_string(params.named().size()) +
                     " tensors, found " + std::to_string(ckpt.tensors.size()));
  }
  for (const auto& [name, stored] : ckpt.tensors) {
    params.find(name).copy_values_from(stored);
  }
  return {params, config.model};
}

// ==================== training loop ====================

TrainResult train(const TrainConfig& config_in, const Dataset& dataset) {
  TrainConfig config = config_in;
  if (dataset.train.empty()) throw ContractError("train: empty training split");
  config.model.vocab = dataset.vocab.size();
  config.model.num_answers = dataset.answers.size();
  config.model.validate();

  fs::create_directories(config.out_dir);
  const std::string log_path = (fs::path(config.out_dir) / "train_log.csv").string();
  const std::string hash_path = (fs::path(config.out_dir) / "batch_hashes.csv").string();
  const std::string ckpt_path = (fs::path(config.out_dir) / "checkpoint.wsdc").string();

  Rng init_rng(derive_seed(config.seed, 0x11));
  ModelParams params(config.model, init_rng);
  AdamOptimizer adam(config.beta1, config.beta2, config.eps_adam);
  PlateauScheduler schedule(config.lr, config.factor, config.patience);

  const bool has_val = !dataset.val.empty();
  const size_t train_size = dataset.train.size();

  std::ofstream log(log_path);
  if (!log) throw ParseError("train: cannot write " + log_path);
  for (const auto& [k, v] : config.to_kv().entries) log << "# " << k << " = " << v << "\n";
  log << "epoch,train_loss,val_loss,val_acc,lr\n";
  std::ofstream hash_log(hash_path);
  hash_log << "epoch,hash\n";

  TrainResult result{params.clone_values(config.model), config.model};
  result.checkpoint_path = ckpt_path;
  result.log_path = log_path;
  result.batch_hash_path = hash_path;
  double best_monitored = std::numeric_limits<double>::infinity();
  std::string best_rng_state;

  std::vector<size_t> order(train_size);
  std::iota(order.begin(), order.end(), 0);

  for (size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(config.seed, 0x22, epoch));
    shuffle_in_place(order, shuffle_rng);

    uint64_t epoch_hash = 0xcbf29ce484222325ULL;
    double epoch_loss = 0.0;
    size_t steps = 0;
    for (size_t start = 0; start < train_size; start += config.batch_size) {
      size_t end = std::min(train_size, start + config.batch_size);
      Rng dropout_rng(derive_seed(config.seed, 0x33, epoch, steps));
      params.zero_grads();
      double batch_loss = 0.0;
      for (size_t i = start; i < end; ++i) {
        const Example& ex = dataset.train[order[i]];
        epoch_hash = fnv1a(ex.id, epoch_hash);
        Tape tape;
        Tensor loss = model_loss(tape, params, config.model, ex,
                                 config.model.dropout > 0.0 ? &dropout_rng : nullptr);
        batch_loss += loss.data()[0];
        tape.backward(loss);
      }
      size_t count = end - start;
      batch_loss /= static_cast<double>(count);
      if (!std::isfinite(batch_loss)) {
        // abort with the last finite parameters
        bool params_ok = true;
        for (const auto& [name, t] : params.named()) params_ok = params_ok && t.all_finite();
        Checkpoint ckpt = make_checkpoint(params_ok ? params : result.params, config,
                                          epoch, shuffle_rng.serialize());
        save_checkpoint(ckpt_path, ckpt);
        throw TrainDivergence("train: loss is not finite at epoch " + std::to_string(epoch) +
                              "; last finite checkpoint written to " + ckpt_path);
      }
      double inv = 1.0 / static_cast<double>(count);
      for (const auto& [name, t] : params.named()) {
        Tensor tensor = t;
        if (!tensor.requires_grad()) continue;
        double* g = tensor.grad();
        for (size_t k = 0; k < tensor.size(); ++k) g[k] *= inv;
      }
      adam.step(params.named(), schedule.lr());
      epoch_loss += batch_loss * static_cast<double>(count);
      ++steps;
    }
    epoch_loss /= static_cast<double>(train_size);

    double val_loss = epoch_loss;
    double val_acc = 0.0;
    if (has_val) {
      val_loss = evaluate_loss(params, config.model, dataset.val);
      val_acc = evaluate(params, config.model, dataset.val, dataset.answers).overall_acc;
    }
    double lr_now = schedule.lr();

    char row[192];
    std::snprintf(row, sizeof row, "%zu,%.6f,%.6f,%.6f,%.8g\n", epoch, epoch_loss, val_loss,
                  val_acc, lr_now);
    log << row;
    char hash_row[64];
    std::snprintf(hash_row, sizeof hash_row, "%zu,%016llx\n", epoch,
                  static_cast<unsigned long long>(epoch_hash));
    hash_log << hash_row;
    result.log.push_back({epoch, epoch_loss, val_loss, val_acc, lr_now});

    double monitored = has_val ? val_loss : epoch_loss;
    if (monitored < best_monitored) {
      best_monitored = monitored;
      result.best_epoch = epoch;
      result.best_val_loss = val_loss;
      result.best_val_acc = val_acc;
      result.params.load_values(params);
      best_rng_state = shuffle_rng.serialize();
    }
    schedule.observe(monitored);
    if (config.early_stop_acc > 0.0 && val_acc >= config.early_stop_acc) break;
  }

  save_checkpoint(ckpt_path,
                  make_checkpoint(result.params, config, result.best_epoch, best_rng_state));
  return result;
}

// ==================== ablation ====================

AblateResult ablate(const TrainConfig& config, const Dataset& dataset) {
  AblateResult result;
  std::vector<StackMode> modes = {StackMode::Both, StackMode::ImageGuidedOnly,
                                  StackMode::QuestionGuidedOnly};
  std::vector<std::string> hash_files;
  for (StackMode mode : modes) {
    TrainConfig run = config;
    run.model.stack_mode = mode;
    run.out_dir = (fs::path(config.out_dir) / to_string(mode)).string();
    TrainResult trained = train(run, dataset);
    result.modes.push_back(to_string(mode));
    result.reports.push_back(
        evaluate(trained.params, trained.model_config, dataset.test, dataset.answers));
    hash_files.push_back(trained.batch_hash_path);
  }

  // the three runs must have consumed the data in the same order; with
  // early stopping they may differ in epoch count, so compare the common
  // prefix of per-epoch hashes
  auto read_lines = [](const std::string& p) {
    std::ifstream in(p);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
  };
  std::vector<std::string> reference = read_lines(hash_files[0]);
  for (const std::string& f : hash_files) {
    std::vector<std::string> lines = read_lines(f);
    size_t common = std::min(lines.size(), reference.size());
    for (size_t i = 0; i < common; ++i) {
      if (lines[i] != reference[i]) {
        throw ContractError("ablate: batch hash mismatch between runs (" + f + " line " +
                            std::to_string(i + 1) + ")");
      }
    }
  }

  // Table-shaped comparison: per-category accuracy/BLEU plus overall
  std::set<std::string> cats;
  for (const EvalReport& r : result.reports) {
    for (const auto& [cat, stat] : r.per_category) cats.insert(cat);
  }
  result.csv_path = (fs::path(config.out_dir) / "ablation.csv").string();
  std::ofstream csv(result.csv_path);
  csv << "mode";
  for (const std::string& c : cats) csv << "," << c << "_acc," << c << "_bleu";
  csv << ",overall_acc,overall_bleu\n";
  for (size_t i = 0; i < result.reports.size(); ++i) {
    const EvalReport& r = result.reports[i];
    csv << result.modes[i];
    for (const std::string& c : cats) {
      auto it = r.per_category.find(c);
      double acc = it == r.per_category.end() ? 0.0 : it->second.accuracy();
      double bl = it == r.per_category.end() ? 0.0 : it->second.mean_bleu();
      csv << "," << fmt("%.6f", acc) << "," << fmt("%.6f", bl);
    }
    csv << "," << fmt("%.6f", r.overall_acc) << "," << fmt("%.6f", r.overall_bleu) << "\n";
  }
  return result;
}

// ==================== gradient check ====================

namespace {

Example make_gradcheck_example(const ModelConfig& config, uint64_t data_seed) {
  Rng data_rng(data_seed);
  Example ex;
  ex.id = "gradcheck";
  ex.category = "synthetic";
  std::vector<int> ids;
  for (size_t i = 0; i + 1 < config.n; ++i) {
    ids.push_back(static_cast<int>(5 + data_rng.index(config.vocab - 5)));
  }
  if (ids.empty()) ids.push_back(5);
  ex.tokens = encode_pad(ids, config.n);  // one pad position exercises the masks
  ex.V = Tensor::zeros(5, config.d);
  for (size_t i = 0; i < ex.V.size(); ++i) ex.V.data()[i] = data_rng.normal();
  ex.sentence.v.resize(config.d);
  for (double& v : ex.sentence.v) v = data_rng.normal();
  ex.answer = static_cast<int>(data_rng.index(config.num_answers));
  return ex;
}

// Central differences are only trustworthy at test points where no ReLU
// sits within the step's reach of its kink and no gradient coordinate
// drowns in the objective's rounding noise. Probe a few coordinates per
// tensor; a badly conditioned candidate point fails the probe and is
// skipped. A genuine backward bug fails the probe at every candidate, in
// which case the last candidate is checked (and reported) in full.
bool fd_probe_ok(const std::function<double()>& eval,
                 const std::vector<std::pair<std::string, Tensor>>& params, double h, double tol) {
  for (const auto& [name, t] : params) {
    Tensor param = t;
    if (!param.requires_grad()) continue;
    const double* a = param.grad();
    size_t stride = std::max<size_t>(1, param.size() / 5);
    for (size_t i = 0; i < param.size(); i += stride) {
      double saved = param.data()[i];
      param.data()[i] = saved + h;
      double fp = eval();
      param.data()[i] = saved - h;
      double fm = eval();
      param.data()[i] = saved;
      double n = (fp - fm) / (2.0 * h);
      double rel = std::fabs(a[i] - n) / std::max({std::fabs(a[i]), std::fabs(n), 1e-8});
      if (rel > 0.5 * tol) return false;
    }
  }
  return true;
}

}  // namespace

GradCheckReport gradcheck_model(const ModelConfig& config_in, uint64_t seed, double h, double tol) {
  ModelConfig config = config_in;
  if (config.dropout != 0.0) {
    throw ContractError("gradcheck: dropout must be 0 for deterministic objectives");
  }
  if (config.vocab < 5) config.vocab = 16;
  if (config.num_answers < 2) config.num_answers = 5;
  config.validate();

  Rng init_rng(derive_seed(seed, 0x55));
  ModelParams params(config, init_rng);

  Example ex = make_gradcheck_example(config, derive_seed(seed, 0x44, 0));
  auto eval = [&]() {
    Tape tape;
    return model_loss(tape, params, config, ex).data()[0];
  };
  auto analytic_pass = [&]() {
    params.zero_grads();
    Tape tape;
    Tensor loss = model_loss(tape, params, config, ex);
    tape.backward(loss);
  };

  constexpr size_t kCandidates = 12;
  constexpr size_t kFullChecks = 4;
  size_t full_checks = 0;
  GradCheckReport best;
  bool have_best = false;
  for (size_t k = 0; k < kCandidates && full_checks < kFullChecks; ++k) {
    ex = make_gradcheck_example(config, derive_seed(seed, 0x44, k));
    analytic_pass();
    if (!fd_probe_ok(eval, params.named(), h, tol) && k + 1 < kCandidates) continue;
    GradCheckReport report = grad_check(eval, params.named(), h, tol);
    ++full_checks;
    if (report.pass()) return report;
    if (!have_best || report.max_rel_err < best.max_rel_err) {
      best = report;
      have_best = true;
    }
  }
  if (have_best) return best;
  analytic_pass();
  return grad_check(eval, params.named(), h, tol);
}

// ==================== attention export ====================

std::vector<std::string> export_attention(const ModelParams& params, const ModelConfig& config,
                                          const Example& example, const Vocab& vocab,
                                          const std::string& out_dir) {
  fs::create_directories(out_dir);
  ModelConfig eval_cfg = config;
  eval_cfg.dropout = 0.0;
  Tape tape;
  ForwardOutput out = model_forward(tape, params, eval_cfg, example, nullptr, true);

  std::vector<std::string> image_labels;
  for (int i = 1; i <= 5; ++i) image_labels.push_back("v" + std::to_string(i));
  std::vector<std::string> token_labels;
  for (int id : example.tokens.ids) token_labels.push_back(vocab.token(id));

  std::vector<std::string> written;
  for (const AttnEntry& e : out.attn) {
    bool queries_image = e.site == "v_self" || e.site == "v_guided";
    bool keys_image = e.site == "v_self" || e.site == "q_guided";
    const auto& qlabels = queries_image ? image_labels : token_labels;
    const auto& klabels = keys_image ? image_labels : token_labels;

    std::string name = "attn_l" + std::to_string(e.layer) + "_" + e.site + "_h" +
                       std::to_string(e.head) + ".csv";
    std::ofstream csv(fs::path(out_dir) / name);
    csv << "query";
    for (const std::string& k : klabels) csv << "," << k;
    csv << "\n";
    for (size_t r = 0; r < e.weights.rows(); ++r) {
      csv << qlabels[r];
      for (size_t c = 0; c < e.weights.cols(); ++c) csv << "," << fmt("%.17g", e.weights.at(r, c));
      csv << "\n";
    }
    written.push_back(name);
  }
  return written;
}

}  // namespace wsdan
