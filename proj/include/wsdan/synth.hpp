#pragma once

#include <string>
#include <vector>

#include "wsdan/data.hpp"

namespace wsdan {

/// Spec for the synthetic cross-modal task. Each example draws a latent
/// (modality, organ) pair; image rows 1-2 encode the modality prototype,
/// rows 3-4 the organ prototype, row 5 a mixed prototype, all plus noise.
/// Questions are templates whose intent picks which attribute is the
/// answer (what-modality / what-organ / balanced yes-no probes), so no
/// unimodal shortcut can beat the max-prior accuracy.
struct SynthSpec {
  uint64_t seed = 1;
  size_t num_examples = 1000;
  size_t d = 64;
  size_t vocab_size = 64;          // padded with filler tokens if needed
  size_t num_modalities = 4;
  size_t num_organs = 4;
  double sigma = 0.3;              // noise vector norm scale (per-coordinate sd = sigma/sqrt(d))
  double split_train = 0.8;
  double split_val = 0.1;
  double split_test = 0.1;
  size_t pad_length = 12;
  bool reproduce_label_shift = false;  // opt-in: unseen composite answers in test
  std::string force_intent;            // rejected by validation; exists to test the guard
};

/// Deterministic generation; same spec (including seed) gives bitwise
/// identical datasets. Image feature values are quantized to f32 precision
/// so the in-memory dataset matches a feature-file round trip exactly.
Dataset generate(const SynthSpec& spec);

/// Writes vocab.txt, sentences.tsv, qa_{train,val,test}.tsv and
/// feats/<id>.feat under dir.
void save_dataset(const std::string& dir, const Dataset& ds);

/// Majority answer per exact question string (training split), global
/// majority for unseen questions. Returns test accuracy.
double question_only_baseline(const std::vector<Example>& train, const std::vector<Example>& test,
                              size_t num_classes);

/// One-vs-all ridge regression on the flattened 5xd image features.
/// Returns test accuracy.
double image_only_baseline(const std::vector<Example>& train, const std::vector<Example>& test,
                           size_t num_classes);

}  // namespace wsdan
