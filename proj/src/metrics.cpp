#include "wsdan/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <unordered_map>

#include "wsdan/error.hpp"

namespace wsdan {

std::string normalize_answer(const std::string& s) {
  std::string out;
  bool pending_space = false;
  for (unsigned char ch : s) {
    if (std::isalnum(ch)) {
      if (pending_space && !out.empty()) out.push_back(' ');
      pending_space = false;
      out.push_back(static_cast<char>(std::tolower(ch)));
    } else {
      pending_space = true;
    }
  }
  return out;
}

std::vector<std::string> answer_tokens(const std::string& s) {
  std::vector<std::string> toks;
  std::istringstream is(normalize_answer(s));
  std::string t;
  while (is >> t) toks.push_back(t);
  return toks;
}

double bleu(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
            int max_n) {
  if (reference.empty()) throw ContractError("bleu: empty reference");
  if (candidate.empty()) return 0.0;
  const int orders = std::min<int>(max_n, static_cast<int>(candidate.size()));
  double log_precision = 0.0;
  for (int n = 1; n <= orders; ++n) {
    std::unordered_map<std::string, int> ref_counts;
    for (size_t i = 0; i + n <= reference.size(); ++i) {
      std::string gram;
      for (int k = 0; k < n; ++k) gram += reference[i + k] + "\x1f";
      ref_counts[gram]++;
    }
    std::unordered_map<std::string, int> cand_counts;
    int total = 0;
    for (size_t i = 0; i + n <= candidate.size(); ++i) {
      std::string gram;
      for (int k = 0; k < n; ++k) gram += candidate[i + k] + "\x1f";
      cand_counts[gram]++;
      ++total;
    }
    int clipped = 0;
    for (const auto& [gram, c] : cand_counts) {
      auto it = ref_counts.find(gram);
      if (it != ref_counts.end()) clipped += std::min(c, it->second);
    }
    if (clipped == 0) return 0.0;
    log_precision += std::log(static_cast<double>(clipped) / total);
  }
  double bp = std::exp(std::min(0.0, 1.0 - static_cast<double>(reference.size()) /
                                          static_cast<double>(candidate.size())));
  return bp * std::exp(log_precision / orders);
}

std::map<std::string, CategoryStat> accuracy_by_category(
    const std::vector<std::string>& predictions, const std::vector<std::string>& golds,
    const std::vector<std::string>& categories) {
  if (predictions.size() != golds.size() || golds.size() != categories.size()) {
    throw ContractError("accuracy_by_category: aligned lists required (" +
                        std::to_string(predictions.size()) + "/" + std::to_string(golds.size()) +
                        "/" + std::to_string(categories.size()) + ")");
  }
  std::map<std::string, CategoryStat> stats;
  for (size_t i = 0; i < golds.size(); ++i) {
    CategoryStat& s = stats[categories[i]];
    s.count++;
    std::string p = normalize_answer(predictions[i]);
    std::string g = normalize_answer(golds[i]);
    if (p == g) s.correct++;
    s.bleu_sum += bleu(answer_tokens(predictions[i]), answer_tokens(golds[i]));
  }
  return stats;
}

double overall_accuracy(const std::map<std::string, CategoryStat>& per_category) {
  if (per_category.empty()) throw ContractError("overall: empty category map");
  long long correct = 0, total = 0;
  for (const auto& [name, s] : per_category) {
    correct += s.correct;
    total += s.count;
  }
  return static_cast<double>(correct) / static_cast<double>(total);
}

double overall_bleu(const std::map<std::string, CategoryStat>& per_category) {
  if (per_category.empty()) throw ContractError("overall: empty category map");
  double sum = 0.0;
  long long total = 0;
  for (const auto& [name, s] : per_category) {
    sum += s.bleu_sum;
    total += s.count;
  }
  return sum / static_cast<double>(total);
}

double weighted_overall(const std::vector<std::pair<double, long long>>& c_and_d) {
  if (c_and_d.empty()) throw ContractError("overall: no categories");
  double num = 0.0;
  long long total = 0;
  for (const auto& [c, d] : c_and_d) {
    if (d <= 0) throw ContractError("overall: category sizes must be positive");
    num += c * static_cast<double>(d);
    total += d;
  }
  return num / static_cast<double>(total);
}

// ==================== confusion matrix ====================

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> label_set,
                                 const std::vector<std::string>& predictions,
                                 const std::vector<std::string>& golds)
    : labels_(std::move(label_set)) {
  if (predictions.size() != golds.size()) {
    throw ContractError("confusion_matrix: aligned lists required");
  }
  labels_.push_back("unknown");
  counts_.assign(labels_.size() * labels_.size(), 0);
  for (size_t i = 0; i < golds.size(); ++i) {
    counts_[index_of(golds[i]) * labels_.size() + index_of(predictions[i])]++;
  }
}

size_t ConfusionMatrix::index_of(const std::string& label) const {
  for (size_t i = 0; i + 1 < labels_.size(); ++i) {
    if (labels_[i] == label) return i;
  }
  return labels_.size() - 1;  // unknown
}

long long ConfusionMatrix::at(size_t gold, size_t pred) const {
  return counts_[gold * labels_.size() + pred];
}

long long ConfusionMatrix::total() const {
  long long t = 0;
  for (long long c : counts_) t += c;
  return t;
}

long long ConfusionMatrix::gold_count(size_t gold) const {
  long long t = 0;
  for (size_t p = 0; p < labels_.size(); ++p) t += at(gold, p);
  return t;
}

void ConfusionMatrix::write_csv(std::ostream& os) const {
  os << "gold_label,pred_label,count\n";
  for (size_t g = 0; g < labels_.size(); ++g) {
    for (size_t p = 0; p < labels_.size(); ++p) {
      os << labels_[g] << "," << labels_[p] << "," << at(g, p) << "\n";
    }
  }
}

void EvalReport::write_csv(std::ostream& os) const {
  os << "category,count,accuracy,bleu\n";
  char buf[64];
  for (const auto& [name, s] : per_category) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f", s.accuracy(), s.mean_bleu());
    os << name << "," << s.count << "," << buf << "\n";
  }
  std::snprintf(buf, sizeof buf, "%.6f,%.6f", overall_acc, overall_bleu);
  os << "overall," << total << "," << buf << "\n";
}

}  // namespace wsdan
