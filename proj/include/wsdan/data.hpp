#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "wsdan/tensor.hpp"
#include "wsdan/text.hpp"

namespace wsdan {

/// One (image features, question, answer) triple.
struct Example {
  std::string id;
  std::string category;
  TokenSequence tokens;
  SentenceEmbedding sentence;
  Tensor V;  // 5 x d image features
  int answer = -1;
  std::string answer_text;
};

/// Answer classes built from the training split (sorted, deduplicated,
/// normalized) plus a reserved trailing "unknown" class for test answers
/// never seen in training.
class AnswerVocab {
 public:
  static AnswerVocab build(const std::vector<std::string>& train_answers);

  int id_or_unknown(const std::string& answer_text) const;
  bool known(const std::string& answer_text) const;
  const std::string& name(int id) const;
  int unknown_id() const { return static_cast<int>(names_.size()) - 1; }
  size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> index_;
};

/// Binary image-feature file: magic "WSDF", u32le rows=5, u32le cols=d,
/// then rows*cols f32le values, row-major.
void write_feature_file(const std::string& path, const Tensor& v);
Tensor read_feature_file(const std::string& path);

/// Collapses a double to the value its f32 file representation reloads as.
double quantize_f32(double x);

struct QARecord {
  std::string id, category, question, answer_text;
};

struct QAFile {
  std::vector<QARecord> records;
  size_t duplicate_ids = 0;  // later records replaced earlier ones
};

/// Tab-separated `id  category  question  answer_text`, one per line.
/// Duplicate ids: last record wins, counted. Malformed lines raise
/// ParseError with the line number.
QAFile load_qa_file(const std::string& path);
void save_qa_file(const std::string& path, const std::vector<QARecord>& records);

using SentenceProviderFn =
    std::function<SentenceEmbedding(const std::string& id, const TokenSequence& tokens)>;

SentenceProviderFn store_provider(const SentenceStore& store);
SentenceProviderFn bow_mean_provider(const BowMeanProvider& provider);

struct LoadStats {
  size_t duplicate_ids = 0;
  size_t unseen_answers = 0;
};

/// Joins QA records with `<feature_dir>/<id>.feat`, tokenizes and embeds
/// questions, and (when an answer vocabulary is given) assigns class ids,
/// mapping unseen answers to the reserved unknown class.
std::vector<Example> load_examples(const std::string& qa_path, const std::string& feature_dir,
                                   const Vocab& vocab, const SentenceProviderFn& provider, size_t n,
                                   bool add_markers = false, const AnswerVocab* answers = nullptr,
                                   LoadStats* stats = nullptr);

struct Dataset {
  Vocab vocab;
  AnswerVocab answers;
  std::vector<Example> train, val, test;
  LoadStats stats;
  size_t feature_dim = 0;
};

/// Loads a directory written by the synth command (vocab.txt,
/// sentences.tsv, qa_{train,val,test}.tsv, feats/). provider_mode is
/// "file" or "bow-mean"; bow-mean needs the caller's embedding table.
Dataset load_dataset_dir(const std::string& dir, size_t n, const std::string& provider_mode,
                         bool add_markers = false, const Tensor* bow_table = nullptr);

}  // namespace wsdan
