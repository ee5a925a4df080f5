#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "wsdan/error.hpp"
#include "wsdan/metrics.hpp"
#include "wsdan/tensor.hpp"

using namespace wsdan;

TEST_CASE("answer normalization") {
  CHECK(normalize_answer("  CT Angiography! ") == "ct angiography");
  CHECK(normalize_answer("T2-weighted") == "t2 weighted");
  CHECK(answer_tokens("ct  angiography") == std::vector<std::string>{"ct", "angiography"});
}

TEST_CASE("bleu identity, worked example, zero overlap") {
  std::vector<std::string> x{"ct", "angiography"};
  CHECK(bleu(x, x) == 1.0);

  // p1=1, p2=1, BP=e^{-0.5}
  std::vector<std::string> ref{"cta", "ct", "angiography"};
  CHECK(bleu(x, ref) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  CHECK(bleu(x, ref) == doctest::Approx(0.6065).epsilon(1e-4));

  std::vector<std::string> none{"mri"};
  CHECK(bleu(none, ref) == 0.0);

  CHECK(bleu({}, ref) == 0.0);
  CHECK_THROWS_AS(bleu(x, {}), ContractError);
}

TEST_CASE("bleu(x,x)=1 for random token lists; relabeling invariance") {
  Rng rng(179);
  for (int trial = 0; trial < 50; ++trial) {
    size_t len = 1 + rng.index(6);
    std::vector<std::string> x, y;
    for (size_t i = 0; i < len; ++i) {
      size_t t = rng.index(4);
      x.push_back("tok" + std::to_string(t));
      y.push_back("relabeled" + std::to_string(t));  // consistent relabeling
    }
    CHECK(bleu(x, x) == 1.0);
    std::vector<std::string> cand(x.begin(), x.begin() + 1 + rng.index(len));
    std::vector<std::string> cand_y(y.begin(), y.begin() + cand.size());
    CHECK(bleu(cand, x) == doctest::Approx(bleu(cand_y, y)).epsilon(1e-12));
  }
}

TEST_CASE("clipping: repeated candidate tokens do not inflate precision") {
  std::vector<std::string> cand{"the", "the", "the"};
  std::vector<std::string> ref{"the", "cat"};
  // p1 = clipped 1/3; single order would be min(4,3)=3 but p2=p3=0 -> 0
  CHECK(bleu(cand, ref) == 0.0);
  std::vector<std::string> cand2{"the", "the"};
  std::vector<std::string> ref2{"the", "the", "cat"};
  // p1 = 2/2, p2 = 1/1, BP = e^{1-3/2}
  CHECK(bleu(cand2, ref2) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
}

TEST_CASE("accuracy_by_category counts exact normalized matches") {
  std::vector<std::string> preds{"mri", "CT", "lung", "Heart"};
  std::vector<std::string> golds{"MRI", "ct", "heart", "heart"};
  std::vector<std::string> cats{"modality", "modality", "organ", "organ"};
  auto stats = accuracy_by_category(preds, golds, cats);
  CHECK(stats.size() == 2);
  CHECK(stats["modality"].count == 2);
  CHECK(stats["modality"].correct == 2);
  CHECK(stats["organ"].count == 2);
  CHECK(stats["organ"].correct == 1);
  CHECK(stats["organ"].accuracy() == 0.5);
  CHECK(stats.count("plane") == 0);  // empty category absent

  CHECK_THROWS_AS(accuracy_by_category({"a"}, {"a", "b"}, {"c", "c"}), ContractError);
}

TEST_CASE("3 of 4 correct gives C=0.75, D=4") {
  std::vector<std::string> preds{"a", "b", "c", "x"};
  std::vector<std::string> golds{"a", "b", "c", "d"};
  std::vector<std::string> cats(4, "only");
  auto stats = accuracy_by_category(preds, golds, cats);
  CHECK(stats["only"].count == 4);
  CHECK(stats["only"].accuracy() == 0.75);
}

TEST_CASE("overall: the worked 0.72 case is exact; single category passes through") {
  double v = weighted_overall({{0.60, 40}, {0.80, 60}});
  CHECK(v == 0.72);
  CHECK(weighted_overall({{0.123, 77}}) == 0.123);
  CHECK_THROWS_AS(weighted_overall({}), ContractError);
}

TEST_CASE("overall equals flat micro accuracy exactly on random prediction sets") {
  Rng rng(181);
  for (int trial = 0; trial < 200; ++trial) {
    size_t n = 1 + rng.index(60);
    std::vector<std::string> preds(n), golds(n), cats(n);
    long long correct = 0;
    for (size_t i = 0; i < n; ++i) {
      cats[i] = "cat" + std::to_string(rng.index(4));
      golds[i] = "ans" + std::to_string(rng.index(3));
      preds[i] = rng.uniform() < 0.6 ? golds[i] : "ans" + std::to_string(rng.index(3));
      if (preds[i] == golds[i]) ++correct;
    }
    auto stats = accuracy_by_category(preds, golds, cats);
    double micro = static_cast<double>(correct) / static_cast<double>(n);
    CHECK(overall_accuracy(stats) == micro);  // exact, not approximate
  }
}

TEST_CASE("confusion matrix: diagonal when perfect, totals, single flip") {
  std::vector<std::string> labels{"mri", "ct"};
  {
    std::vector<std::string> golds{"mri", "ct", "mri"};
    ConfusionMatrix cm(labels, golds, golds);
    CHECK(cm.total() == 3);
    CHECK(cm.at(0, 0) == 2);
    CHECK(cm.at(1, 1) == 1);
    CHECK(cm.at(0, 1) == 0);
  }
  {
    std::vector<std::string> golds{"mri", "ct"};
    std::vector<std::string> preds{"ct", "ct"};
    ConfusionMatrix cm(labels, preds, golds);
    CHECK(cm.at(0, 1) == 1);
    CHECK(cm.at(0, 0) == 0);
    CHECK(cm.total() == 2);
  }
}

TEST_CASE("confusion matrix routes unknown labels to the reserved slot") {
  std::vector<std::string> labels{"mri", "ct"};
  std::vector<std::string> golds{"mri", "weird#label"};
  std::vector<std::string> preds{"alien", "ct"};
  ConfusionMatrix cm(labels, preds, golds);
  CHECK(cm.labels().back() == "unknown");
  CHECK(cm.at(0, 2) == 1);  // gold mri predicted unknown
  CHECK(cm.at(2, 1) == 1);  // gold unknown predicted ct
  CHECK(cm.total() == 2);
}

TEST_CASE("confusion row sums reproduce the per-category gold counts") {
  Rng rng(191);
  std::vector<std::string> labels{"a", "b", "c"};
  std::vector<std::string> golds, preds;
  for (int i = 0; i < 60; ++i) {
    golds.push_back(labels[rng.index(3)]);
    preds.push_back(labels[rng.index(3)]);
  }
  ConfusionMatrix cm(labels, preds, golds);
  for (size_t g = 0; g < 3; ++g) {
    long long expect = 0;
    for (const std::string& s : golds) {
      if (s == labels[g]) ++expect;
    }
    CHECK(cm.gold_count(g) == expect);
  }
  CHECK(cm.total() == 60);
}

TEST_CASE("CSV emission shapes") {
  std::vector<std::string> labels{"x"};
  ConfusionMatrix cm(labels, {"x"}, {"x"});
  std::ostringstream os;
  cm.write_csv(os);
  CHECK(os.str() == "gold_label,pred_label,count\nx,x,1\nx,unknown,0\nunknown,x,0\nunknown,unknown,0\n");

  EvalReport report;
  report.per_category["modality"] = {2, 1, 1.5};
  report.overall_acc = 0.5;
  report.overall_bleu = 0.75;
  report.total = 2;
  std::ostringstream ro;
  report.write_csv(ro);
  CHECK(ro.str() ==
        "category,count,accuracy,bleu\nmodality,2,0.500000,0.750000\noverall,2,0.500000,0.750000\n");
}
