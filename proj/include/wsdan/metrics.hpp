#pragma once

#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace wsdan {

/// Lowercase, strip punctuation, collapse whitespace.
std::string normalize_answer(const std::string& s);
std::vector<std::string> answer_tokens(const std::string& s);

/// Sentence BLEU with clipped n-gram precisions for n = 1..min(maxN, |cand|),
/// geometric mean, and brevity penalty exp(min(0, 1 - |ref|/|cand|)).
/// Empty candidate or any zero precision gives 0. Capping the order at the
/// candidate length keeps one- and two-token answers scoreable.
double bleu(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
            int max_n = 4);

struct CategoryStat {
  long long count = 0;
  long long correct = 0;
  double bleu_sum = 0.0;

  double accuracy() const { return count == 0 ? 0.0 : static_cast<double>(correct) / count; }
  double mean_bleu() const { return count == 0 ? 0.0 : bleu_sum / count; }
};

/// Exact (normalized) string match per category. Lists must be aligned.
std::map<std::string, CategoryStat> accuracy_by_category(
    const std::vector<std::string>& predictions, const std::vector<std::string>& golds,
    const std::vector<std::string>& categories);

/// Category-weighted overall = sum_i C_i * D_i / T computed from the integer
/// counts, so it equals flat micro accuracy exactly.
double overall_accuracy(const std::map<std::string, CategoryStat>& per_category);
double overall_bleu(const std::map<std::string, CategoryStat>& per_category);

/// Textbook form of the same rule over already-averaged (C, D) pairs.
double weighted_overall(const std::vector<std::pair<double, long long>>& c_and_d);

class ConfusionMatrix {
 public:
  /// label_set defines the row/column order; predictions or golds outside
  /// it are routed to a reserved trailing "unknown" label.
  ConfusionMatrix(std::vector<std::string> label_set, const std::vector<std::string>& predictions,
                  const std::vector<std::string>& golds);

  const std::vector<std::string>& labels() const { return labels_; }
  long long at(size_t gold, size_t pred) const;
  long long total() const;
  long long gold_count(size_t gold) const;
  /// Rows: gold_label,pred_label,count
  void write_csv(std::ostream& os) const;

 private:
  std::vector<std::string> labels_;
  std::vector<long long> counts_;  // labels x labels, row = gold
  size_t index_of(const std::string& label) const;
};

struct EvalReport {
  std::map<std::string, CategoryStat> per_category;
  double overall_acc = 0.0;
  double overall_bleu = 0.0;
  long long total = 0;
  long long unknown_gold = 0;  // gold answers outside the training answer set
  std::map<std::string, ConfusionMatrix> confusions;

  /// Rows: category,count,accuracy,bleu plus a final overall row.
  void write_csv(std::ostream& os) const;
};

}  // namespace wsdan
