#include "wsdan/synth.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "wsdan/metrics.hpp"

namespace wsdan {

namespace fs = std::filesystem;

namespace {

const char* kModalityNames[] = {"mri", "ct", "xray", "us", "pet", "mammo", "angio", "fluoro"};
const char* kOrganNames[] = {"lung", "heart", "brain", "liver", "kidney", "spine", "bone", "bowel"};

std::string value_name(const char* const* table, size_t table_len, const char* prefix, size_t i) {
  if (i < table_len) return table[i];
  return std::string(prefix) + std::to_string(i);
}

std::vector<double> unit_vector(size_t d, Rng& rng) {
  std::vector<double> v(d);
  double norm = 0.0;
  for (double& x : v) {
    x = rng.normal();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

void validate(const SynthSpec& spec) {
  if (!spec.force_intent.empty()) {
    throw ContractError(
        "synth: intent must vary per example; a fixed intent ('" + spec.force_intent +
        "') makes the task solvable from one modality alone");
  }
  if (spec.num_modalities < 2 || spec.num_organs < 2) {
    throw ContractError("synth: each attribute family needs at least 2 values");
  }
  double total = spec.split_train + spec.split_val + spec.split_test;
  if (std::fabs(total - 1.0) > 1e-9) {
    throw ContractError("synth: split fractions must sum to 1, got " + std::to_string(total));
  }
  if (spec.num_examples < 10) throw ContractError("synth: too few examples");
  if (spec.d < 4) throw ContractError("synth: feature dim too small");
  if (spec.sigma < 0.0) throw ContractError("synth: sigma must be nonnegative");
}

struct Templates {
  // question text pieces; {} is replaced by the probed value in yes-no forms
  std::vector<std::string> what_modality{"what modality is shown", "which imaging modality is this",
                                         "what modality was used"};
  std::vector<std::string> what_organ{"what organ is shown", "which organ system is this",
                                      "what organ appears"};
  std::vector<std::string> yesno_modality{"is the modality {}", "is this a {} image"};
  std::vector<std::string> yesno_organ{"is the organ {}", "does this show the {}"};
};

std::string instantiate(const std::string& tmpl, const std::string& value) {
  std::string out = tmpl;
  size_t pos = out.find("{}");
  if (pos != std::string::npos) out.replace(pos, 2, value);
  return out;
}

}  // namespace

Dataset generate(const SynthSpec& spec) {
  validate(spec);
  Rng rng(spec.seed);
  const size_t d = spec.d;

  // prototypes: two per attribute value (one per dedicated image row) and a
  // mixed one per (modality, organ) pair for row 5
  std::vector<std::string> mod_names(spec.num_modalities), org_names(spec.num_organs);
  for (size_t i = 0; i < spec.num_modalities; ++i) mod_names[i] = value_name(kModalityNames, 8, "mod", i);
  for (size_t i = 0; i < spec.num_organs; ++i) org_names[i] = value_name(kOrganNames, 8, "org", i);

  std::vector<std::vector<double>> proto_mod[2], proto_org[2];
  for (int r = 0; r < 2; ++r) {
    for (size_t i = 0; i < spec.num_modalities; ++i) proto_mod[r].push_back(unit_vector(d, rng));
    for (size_t i = 0; i < spec.num_organs; ++i) proto_org[r].push_back(unit_vector(d, rng));
  }
  std::vector<std::vector<std::vector<double>>> proto_mix(spec.num_modalities);
  for (size_t a = 0; a < spec.num_modalities; ++a) {
    for (size_t b = 0; b < spec.num_organs; ++b) proto_mix[a].push_back(unit_vector(d, rng));
  }

  Templates tmpl;

  // vocabulary: template words plus every value name and yes/no
  std::set<std::string> words;
  auto add_words = [&](const std::string& text) {
    for (const std::string& tok : answer_tokens(text)) words.insert(tok);
  };
  for (const auto& ts : {tmpl.what_modality, tmpl.what_organ, tmpl.yesno_modality, tmpl.yesno_organ}) {
    for (const std::string& t : ts) add_words(instantiate(t, "x"));
  }
  for (const std::string& v : mod_names) words.insert(v);
  for (const std::string& v : org_names) words.insert(v);
  words.insert("yes");
  words.insert("no");
  std::vector<std::string> body(words.begin(), words.end());
  for (size_t i = 5 + body.size(); i < spec.vocab_size; ++i) {
    body.push_back("filler" + std::to_string(i));
  }
  Dataset ds;
  ds.vocab = Vocab::from_tokens(body);
  ds.feature_dim = d;

  // answer classes are fixed up front; the closure pass below guarantees
  // every one of them appears in the training split
  std::vector<std::string> all_answers = mod_names;
  all_answers.insert(all_answers.end(), org_names.begin(), org_names.end());
  all_answers.push_back("yes");
  all_answers.push_back("no");
  ds.answers = AnswerVocab::build(all_answers);

  // per-question sentence vectors, assigned lazily and deterministically
  std::map<std::string, std::vector<double>> sentence_vectors;
  Rng sentence_rng(spec.seed ^ 0x5eedb0d1u);
  auto sentence_for = [&](const std::string& question) {
    auto it = sentence_vectors.find(question);
    if (it == sentence_vectors.end()) {
      it = sentence_vectors.emplace(question, unit_vector(d, sentence_rng)).first;
    }
    SentenceEmbedding s;
    s.v = it->second;
    s.provider = SentenceEmbedding::Provider::File;
    return s;
  };

  const double coord_sd = spec.sigma / std::sqrt(static_cast<double>(d));
  std::set<std::string> intents_seen;
  std::vector<Example> all;
  all.reserve(spec.num_examples);
  for (size_t i = 0; i < spec.num_examples; ++i) {
    size_t a = rng.index(spec.num_modalities);
    size_t b = rng.index(spec.num_organs);

    Example ex;
    char idbuf[16];
    std::snprintf(idbuf, sizeof idbuf, "ex%06zu", i);
    ex.id = idbuf;

    Tensor v = Tensor::zeros(5, d);
    auto fill_row = [&](size_t row, const std::vector<double>& proto) {
      for (size_t c = 0; c < d; ++c) {
        v.ref(row, c) = quantize_f32(proto[c] + coord_sd * rng.normal());
      }
    };
    fill_row(0, proto_mod[0][a]);
    fill_row(1, proto_mod[1][a]);
    fill_row(2, proto_org[0][b]);
    fill_row(3, proto_org[1][b]);
    fill_row(4, proto_mix[a][b]);
    ex.V = v;

    // intent mix: 30% what-modality, 30% what-organ, 40% balanced yes/no
    double roll = rng.uniform();
    std::string question;
    if (roll < 0.3) {
      ex.category = "modality";
      question = tmpl.what_modality[rng.index(tmpl.what_modality.size())];
      ex.answer_text = mod_names[a];
    } else if (roll < 0.6) {
      ex.category = "organ";
      question = tmpl.what_organ[rng.index(tmpl.what_organ.size())];
      ex.answer_text = org_names[b];
    } else {
      bool about_modality = rng.uniform() < 0.5;
      ex.category = "yesno";
      // probe the true value half the time so yes/no is balanced per question
      bool match = rng.uniform() < 0.5;
      size_t truth = about_modality ? a : b;
      size_t family = about_modality ? spec.num_modalities : spec.num_organs;
      size_t probed = truth;
      if (!match) {
        probed = rng.index(family - 1);
        if (probed >= truth) ++probed;
      }
      const auto& names = about_modality ? mod_names : org_names;
      const auto& forms = about_modality ? tmpl.yesno_modality : tmpl.yesno_organ;
      question = instantiate(forms[rng.index(forms.size())], names[probed]);
      ex.answer_text = match ? "yes" : "no";
    }
    intents_seen.insert(ex.category);
    ex.tokens = prepare_question(question, ds.vocab, spec.pad_length);
    ex.sentence = sentence_for(question);
    ex.answer = ds.answers.id_or_unknown(ex.answer_text);
    all.push_back(std::move(ex));
  }
  if (intents_seen.size() < 2) {
    throw ContractError("synth: generated dataset does not vary question intent");
  }

  size_t n_train = static_cast<size_t>(spec.split_train * spec.num_examples);
  size_t n_val = static_cast<size_t>(spec.split_val * spec.num_examples);
  ds.train.assign(all.begin(), all.begin() + n_train);
  ds.val.assign(all.begin() + n_train, all.begin() + n_train + n_val);
  ds.test.assign(all.begin() + n_train + n_val, all.end());

  // answer-set closure: every class (except the reserved unknown) must
  // occur in training; swap in the first held-out occurrence when missing
  for (int pass = 0; pass < 2; ++pass) {
    std::set<int> train_answers;
    for (const Example& e : ds.train) train_answers.insert(e.answer);
    bool all_covered = true;
    for (int cls = 0; cls < ds.answers.unknown_id(); ++cls) {
      if (train_answers.count(cls)) continue;
      all_covered = false;
      bool fixed = false;
      for (std::vector<Example>* split : {&ds.val, &ds.test}) {
        for (Example& e : *split) {
          if (e.answer == cls) {
            std::swap(e, ds.train[static_cast<size_t>(cls) % ds.train.size()]);
            fixed = true;
            break;
          }
        }
        if (fixed) break;
      }
      if (!fixed) {
        throw ContractError("synth: answer class '" + ds.answers.name(cls) +
                            "' absent from the generated data; increase num_examples");
      }
    }
    if (all_covered) break;
    if (pass == 1) {
      throw ContractError("synth: could not close the answer set; increase num_examples");
    }
  }

  if (spec.reproduce_label_shift) {
    // mimic the held-out composite labels: some organ-question test answers
    // become `a#b` strings that training never saw
    Rng shift_rng(spec.seed ^ 0xc0ffee11u);
    for (Example& e : ds.test) {
      if (e.category != "organ") continue;
      if (shift_rng.uniform() >= 0.2) continue;
      size_t other = shift_rng.index(spec.num_organs);
      e.answer_text = e.answer_text + "#" + org_names[other];
      e.answer = ds.answers.id_or_unknown(e.answer_text);
      ds.stats.unseen_answers++;
    }
  }
  return ds;
}

void save_dataset(const std::string& dir, const Dataset& ds) {
  fs::create_directories(fs::path(dir) / "feats");
  ds.vocab.save((fs::path(dir) / "vocab.txt").string());

  SentenceStore store;
  auto add_split = [&](const std::vector<Example>& split) {
    for (const Example& e : split) store.put(e.id, e.sentence.v);
  };
  add_split(ds.train);
  add_split(ds.val);
  add_split(ds.test);
  store.save((fs::path(dir) / "sentences.tsv").string());

  auto write_split = [&](const char* name, const std::vector<Example>& split) {
    std::vector<QARecord> records;
    for (const Example& e : split) {
      records.push_back({e.id, e.category, e.tokens.raw, e.answer_text});
      write_feature_file((fs::path(dir) / "feats" / (e.id + ".feat")).string(), e.V);
    }
    save_qa_file((fs::path(dir) / name).string(), records);
  };
  write_split("qa_train.tsv", ds.train);
  write_split("qa_val.tsv", ds.val);
  write_split("qa_test.tsv", ds.test);
}

double question_only_baseline(const std::vector<Example>& train, const std::vector<Example>& test,
                              size_t num_classes) {
  std::map<std::string, std::vector<long long>> counts;
  std::vector<long long> global(num_classes, 0);
  for (const Example& e : train) {
    auto& c = counts[e.tokens.raw];
    c.resize(num_classes, 0);
    c[static_cast<size_t>(e.answer)]++;
    global[static_cast<size_t>(e.answer)]++;
  }
  auto majority = [](const std::vector<long long>& c) {
    size_t best = 0;
    for (size_t k = 1; k < c.size(); ++k) {
      if (c[k] > c[best]) best = k;
    }
    return static_cast<int>(best);
  };
  long long correct = 0;
  for (const Example& e : test) {
    auto it = counts.find(e.tokens.raw);
    int pred = it == counts.end() ? majority(global) : majority(it->second);
    if (pred == e.answer) ++correct;
  }
  return test.empty() ? 0.0 : static_cast<double>(correct) / test.size();
}

double image_only_baseline(const std::vector<Example>& train, const std::vector<Example>& test,
                           size_t num_classes) {
  using EMat = Eigen::MatrixXd;
  const size_t feat = train.empty() ? 0 : train[0].V.size();
  EMat x(train.size(), feat + 1);
  EMat y = EMat::Zero(train.size(), num_classes);
  for (size_t i = 0; i < train.size(); ++i) {
    for (size_t j = 0; j < feat; ++j) x(i, j) = train[i].V.data()[j];
    x(i, feat) = 1.0;
    y(i, static_cast<size_t>(train[i].answer)) = 1.0;
  }
  EMat gram = x.transpose() * x;
  gram.diagonal().array() += 1.0;  // ridge
  EMat w = gram.ldlt().solve(x.transpose() * y);

  long long correct = 0;
  for (const Example& e : test) {
    Eigen::VectorXd f(feat + 1);
    for (size_t j = 0; j < feat; ++j) f(j) = e.V.data()[j];
    f(feat) = 1.0;
    Eigen::VectorXd scores = w.transpose() * f;
    int pred = 0;
    for (int k = 1; k < static_cast<int>(num_classes); ++k) {
      if (scores(k) > scores(pred)) pred = k;
    }
    if (pred == e.answer) ++correct;
  }
  return test.empty() ? 0.0 : static_cast<double>(correct) / test.size();
}

}  // namespace wsdan
