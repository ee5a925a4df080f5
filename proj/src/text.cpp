#include "wsdan/text.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace wsdan {

namespace {
const char* kReserved[5] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
}

// ==================== Vocab ====================

void Vocab::push(const std::string& tok) {
  if (index_.count(tok)) return;
  index_.emplace(tok, static_cast<int>(tokens_.size()));
  tokens_.push_back(tok);
}

Vocab Vocab::from_tokens(const std::vector<std::string>& body) {
  Vocab v;
  for (const char* r : kReserved) v.push(r);
  for (const std::string& t : body) v.push(t);
  return v;
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("vocab: cannot open " + path);
  Vocab v;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno <= 5) {
      if (line != kReserved[lineno - 1]) {
        throw ParseError("vocab " + path + " line " + std::to_string(lineno) + ": expected " +
                         kReserved[lineno - 1] + ", got '" + line + "'");
      }
    }
    if (v.index_.count(line)) {
      throw ParseError("vocab " + path + " line " + std::to_string(lineno) + ": duplicate token '" +
                       line + "'");
    }
    v.push(line);
  }
  if (v.size() < 5) throw ParseError("vocab " + path + ": missing reserved tokens");
  return v;
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ParseError("vocab: cannot write " + path);
  for (const std::string& t : tokens_) out << t << "\n";
}

int Vocab::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

bool Vocab::contains(const std::string& token) const { return index_.count(token) > 0; }

const std::string& Vocab::token(int id) const {
  if (id < 0 || static_cast<size_t>(id) >= tokens_.size()) {
    throw LookupError("vocab: id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<size_t>(id)];
}

// ==================== tokenization ====================

size_t TokenSequence::real_count() const {
  size_t c = 0;
  for (bool b : mask) c += b ? 1 : 0;
  return c;
}

std::vector<int> tokenize(const std::string& text, const Vocab& vocab) {
  std::vector<int> ids;
  std::string piece;
  auto flush = [&]() {
    if (!piece.empty()) {
      ids.push_back(vocab.id(piece));
      piece.clear();
    }
  };
  for (unsigned char ch : text) {
    if (std::isalnum(ch)) {
      piece.push_back(static_cast<char>(std::tolower(ch)));
    } else {
      flush();  // whitespace and punctuation both end the current piece
    }
  }
  flush();
  if (ids.empty()) throw ContractError("tokenize: empty question '" + text + "'");
  return ids;
}

TokenSequence encode_pad(const std::vector<int>& ids, size_t n) {
  if (ids.empty()) throw ContractError("encode_pad: no token ids");
  if (n == 0) throw ContractError("encode_pad: padded length must be positive");
  TokenSequence seq;
  seq.ids.assign(n, Vocab::kPad);
  seq.mask.assign(n, false);
  size_t keep = std::min(ids.size(), n);
  for (size_t i = 0; i < keep; ++i) {
    seq.ids[i] = ids[i];
    seq.mask[i] = true;
  }
  return seq;
}

TokenSequence prepare_question(const std::string& text, const Vocab& vocab, size_t n,
                               bool add_markers) {
  std::vector<int> ids = tokenize(text, vocab);
  if (add_markers) {
    ids.insert(ids.begin(), Vocab::kCls);
    ids.push_back(Vocab::kSep);
  }
  TokenSequence seq = encode_pad(ids, n);
  seq.raw = text;
  return seq;
}

// ==================== sentence store ====================

SentenceStore SentenceStore::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("sentence store: cannot open " + path);
  SentenceStore store;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ParseError("sentence store " + path + " line " + std::to_string(lineno) +
                       ": missing tab separator");
    }
    std::string qid = line.substr(0, tab);
    std::istringstream values(line.substr(tab + 1));
    std::vector<double> v;
    double x;
    while (values >> x) v.push_back(x);
    if (v.empty()) {
      throw ParseError("sentence store " + path + " line " + std::to_string(lineno) +
                       ": no values for id '" + qid + "'");
    }
    store.entries_[qid] = std::move(v);
  }
  return store;
}

void SentenceStore::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ParseError("sentence store: cannot write " + path);
  char buf[32];
  for (const auto& [qid, v] : entries_) {
    out << qid;
    char sep = '\t';
    for (double x : v) {
      std::snprintf(buf, sizeof buf, "%.17g", x);
      out << sep << buf;
      sep = ' ';
    }
    out << "\n";
  }
}

void SentenceStore::put(const std::string& qid, std::vector<double> v) {
  entries_[qid] = std::move(v);
}

SentenceEmbedding SentenceStore::get(const std::string& qid) const {
  auto it = entries_.find(qid);
  if (it == entries_.end()) {
    throw LookupError("sentence store: no entry for question id '" + qid + "'");
  }
  SentenceEmbedding s;
  s.v = it->second;
  s.provider = SentenceEmbedding::Provider::File;
  return s;
}

bool SentenceStore::contains(const std::string& qid) const { return entries_.count(qid) > 0; }

// ==================== bow-mean provider ====================

SentenceEmbedding BowMeanProvider::embed(const TokenSequence& seq) const {
  const size_t d = table_.cols();
  SentenceEmbedding s;
  s.provider = SentenceEmbedding::Provider::BowMean;
  s.v.assign(d, 0.0);
  size_t count = 0;
  for (size_t i = 0; i < seq.ids.size(); ++i) {
    if (!seq.mask[i]) continue;
    int id = seq.ids[i];
    if (id < 0 || static_cast<size_t>(id) >= table_.rows()) {
      throw LookupError("bow-mean: token id " + std::to_string(id) + " outside embedding table");
    }
    for (size_t c = 0; c < d; ++c) s.v[c] += table_.at(static_cast<size_t>(id), c);
    ++count;
  }
  if (count == 0) throw ContractError("bow-mean: sequence has no real tokens");
  for (size_t c = 0; c < d; ++c) s.v[c] /= static_cast<double>(count);
  return s;
}

}  // namespace wsdan
