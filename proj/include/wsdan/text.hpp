#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "wsdan/tensor.hpp"

namespace wsdan {

/// Flat token vocabulary. File format: UTF-8, one token per line, the line
/// number is the id; the first five lines must be the reserved tokens.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;
  static constexpr int kMask = 4;

  /// Builds a vocabulary from body tokens; the reserved tokens are
  /// prepended automatically and duplicates are dropped.
  static Vocab from_tokens(const std::vector<std::string>& body);
  static Vocab load(const std::string& path);
  void save(const std::string& path) const;

  /// id of token, or [UNK] when absent.
  int id(const std::string& token) const;
  bool contains(const std::string& token) const;
  const std::string& token(int id) const;
  size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  void push(const std::string& tok);
};

struct TokenSequence {
  std::vector<int> ids;       // length n
  std::vector<bool> mask;     // true = real token
  std::string raw;            // original question text

  size_t real_count() const;
};

/// Lowercases, splits on whitespace and punctuation boundaries, and maps
/// each piece through the vocabulary ([UNK] for OOV). Throws ContractError
/// when no token survives.
std::vector<int> tokenize(const std::string& text, const Vocab& vocab);

/// Truncates to n or right-pads with [PAD]; mask marks the real tokens.
TokenSequence encode_pad(const std::vector<int>& ids, size_t n);

/// tokenize + optional [CLS]/[SEP] wrapping + encode_pad.
TokenSequence prepare_question(const std::string& text, const Vocab& vocab, size_t n,
                               bool add_markers = false);

struct SentenceEmbedding {
  enum class Provider { File, BowMean };
  std::vector<double> v;
  Provider provider = Provider::BowMean;
};

/// Line-based store: `<question-id>\t<space-separated decimal reals>`.
/// Values are written with 17 significant digits so doubles round-trip
/// bitwise.
class SentenceStore {
 public:
  static SentenceStore load(const std::string& path);
  void save(const std::string& path) const;

  void put(const std::string& qid, std::vector<double> v);
  /// Throws LookupError for a missing id.
  SentenceEmbedding get(const std::string& qid) const;
  bool contains(const std::string& qid) const;
  size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, std::vector<double>> entries_;  // ordered for deterministic save
};

/// Bag-of-words mean provider over a fixed embedding-table snapshot
/// (vocab x d_q). Pad positions are excluded from the mean.
class BowMeanProvider {
 public:
  explicit BowMeanProvider(Tensor table) : table_(std::move(table)) {}
  SentenceEmbedding embed(const TokenSequence& seq) const;

 private:
  Tensor table_;
};

}  // namespace wsdan
