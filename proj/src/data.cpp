#include "wsdan/data.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>

#include "wsdan/metrics.hpp"

namespace wsdan {

namespace fs = std::filesystem;

// ==================== answer vocabulary ====================

AnswerVocab AnswerVocab::build(const std::vector<std::string>& train_answers) {
  std::set<std::string> uniq;
  for (const std::string& a : train_answers) uniq.insert(normalize_answer(a));
  AnswerVocab v;
  for (const std::string& a : uniq) {
    v.index_.emplace(a, static_cast<int>(v.names_.size()));
    v.names_.push_back(a);
  }
  v.names_.push_back("unknown");
  return v;
}

int AnswerVocab::id_or_unknown(const std::string& answer_text) const {
  auto it = index_.find(normalize_answer(answer_text));
  return it == index_.end() ? unknown_id() : it->second;
}

bool AnswerVocab::known(const std::string& answer_text) const {
  return index_.count(normalize_answer(answer_text)) > 0;
}

const std::string& AnswerVocab::name(int id) const {
  if (id < 0 || static_cast<size_t>(id) >= names_.size()) {
    throw LookupError("answer vocab: id " + std::to_string(id) + " out of range");
  }
  return names_[static_cast<size_t>(id)];
}

// ==================== feature files ====================

double quantize_f32(double x) { return static_cast<double>(static_cast<float>(x)); }

namespace {
void put_u32(std::ofstream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::ifstream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw ParseError("feature file truncated: " + path);
  return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
         static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}
}  // namespace

void write_feature_file(const std::string& path, const Tensor& v) {
  if (v.rows() != 5) throw DimensionError("feature file: expected 5 rows, got " + v.shape_str());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("feature file: cannot write " + path);
  out.write("WSDF", 4);
  put_u32(out, 5);
  put_u32(out, static_cast<uint32_t>(v.cols()));
  for (size_t i = 0; i < v.size(); ++i) {
    float f = static_cast<float>(v.data()[i]);
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
  }
}

Tensor read_feature_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LookupError("feature file missing: " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "WSDF", 4) != 0) {
    throw ParseError("feature file: bad magic in " + path);
  }
  uint32_t rows = get_u32(in, path), cols = get_u32(in, path);
  if (rows != 5) throw ParseError("feature file: expected 5 rows in " + path);
  Tensor v = Tensor::zeros(rows, cols);
  for (size_t i = 0; i < v.size(); ++i) {
    uint32_t bits = get_u32(in, path);
    float f;
    std::memcpy(&f, &bits, 4);
    v.data()[i] = static_cast<double>(f);
  }
  return v;
}

// ==================== QA files ====================

QAFile load_qa_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("qa file: cannot open " + path);
  QAFile result;
  std::unordered_map<std::string, size_t> by_id;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    QARecord rec;
    size_t t1 = line.find('\t');
    size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    size_t t3 = t2 == std::string::npos ? std::string::npos : line.find('\t', t2 + 1);
    if (t3 == std::string::npos) {
      throw ParseError("qa file " + path + " line " + std::to_string(lineno) +
                       ": expected 4 tab-separated fields");
    }
    rec.id = line.substr(0, t1);
    rec.category = line.substr(t1 + 1, t2 - t1 - 1);
    rec.question = line.substr(t2 + 1, t3 - t2 - 1);
    rec.answer_text = line.substr(t3 + 1);
    if (rec.id.empty() || rec.question.empty()) {
      throw ParseError("qa file " + path + " line " + std::to_string(lineno) +
                       ": empty id or question");
    }
    auto it = by_id.find(rec.id);
    if (it != by_id.end()) {
      result.records[it->second] = rec;  // last wins
      result.duplicate_ids++;
    } else {
      by_id.emplace(rec.id, result.records.size());
      result.records.push_back(rec);
    }
  }
  return result;
}

void save_qa_file(const std::string& path, const std::vector<QARecord>& records) {
  std::ofstream out(path);
  if (!out) throw ParseError("qa file: cannot write " + path);
  for (const QARecord& r : records) {
    out << r.id << '\t' << r.category << '\t' << r.question << '\t' << r.answer_text << "\n";
  }
}

// ==================== providers and joining ====================

SentenceProviderFn store_provider(const SentenceStore& store) {
  return [&store](const std::string& id, const TokenSequence&) { return store.get(id); };
}

SentenceProviderFn bow_mean_provider(const BowMeanProvider& provider) {
  return [&provider](const std::string&, const TokenSequence& tokens) {
    return provider.embed(tokens);
  };
}

std::vector<Example> load_examples(const std::string& qa_path, const std::string& feature_dir,
                                   const Vocab& vocab, const SentenceProviderFn& provider, size_t n,
                                   bool add_markers, const AnswerVocab* answers, LoadStats* stats) {
  QAFile qa = load_qa_file(qa_path);
  if (stats) stats->duplicate_ids += qa.duplicate_ids;
  std::vector<Example> examples;
  examples.reserve(qa.records.size());
  for (const QARecord& rec : qa.records) {
    Example ex;
    ex.id = rec.id;
    ex.category = rec.category;
    ex.answer_text = rec.answer_text;
    std::string feat_path = (fs::path(feature_dir) / (rec.id + ".feat")).string();
    try {
      ex.V = read_feature_file(feat_path);
    } catch (const LookupError&) {
      throw LookupError("dataset: missing feature file for id '" + rec.id + "' (" + feat_path + ")");
    }
    ex.tokens = prepare_question(rec.question, vocab, n, add_markers);
    ex.sentence = provider(rec.id, ex.tokens);
    if (answers) {
      ex.answer = answers->id_or_unknown(rec.answer_text);
      if (stats && ex.answer == answers->unknown_id()) stats->unseen_answers++;
    }
    examples.push_back(std::move(ex));
  }
  // deterministic order regardless of any future parallel loading
  std::sort(examples.begin(), examples.end(),
            [](const Example& a, const Example& b) { return a.id < b.id; });
  return examples;
}

Dataset load_dataset_dir(const std::string& dir, size_t n, const std::string& provider_mode,
                         bool add_markers, const Tensor* bow_table) {
  fs::path root(dir);
  Dataset ds;
  ds.vocab = Vocab::load((root / "vocab.txt").string());

  SentenceStore store;
  std::optional<BowMeanProvider> bow;
  SentenceProviderFn provider;
  if (provider_mode == "file") {
    store = SentenceStore::load((root / "sentences.tsv").string());
    provider = [&store](const std::string& id, const TokenSequence&) { return store.get(id); };
  } else if (provider_mode == "bow-mean") {
    if (!bow_table) throw ContractError("load_dataset_dir: bow-mean provider needs a table");
    bow.emplace(*bow_table);
    provider = [&bow](const std::string&, const TokenSequence& t) { return bow->embed(t); };
  } else {
    throw ContractError("unknown sentence provider '" + provider_mode + "'");
  }

  std::string feats = (root / "feats").string();
  // answers come from the training split only
  QAFile train_qa = load_qa_file((root / "qa_train.tsv").string());
  std::vector<std::string> train_answers;
  for (const QARecord& r : train_qa.records) train_answers.push_back(r.answer_text);
  ds.answers = AnswerVocab::build(train_answers);

  ds.train = load_examples((root / "qa_train.tsv").string(), feats, ds.vocab, provider, n,
                           add_markers, &ds.answers, &ds.stats);
  ds.val = load_examples((root / "qa_val.tsv").string(), feats, ds.vocab, provider, n, add_markers,
                         &ds.answers, &ds.stats);
  ds.test = load_examples((root / "qa_test.tsv").string(), feats, ds.vocab, provider, n,
                          add_markers, &ds.answers, &ds.stats);
  if (!ds.train.empty()) ds.feature_dim = ds.train[0].V.cols();
  return ds;
}

}  // namespace wsdan
