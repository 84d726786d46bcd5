// Copyright 2026 The vitdae Authors
// SPDX-License-Identifier: Apache-2.0

// Small conv classifier: the downstream-evaluation model and the default
// feature extractor for the generative metrics.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vitdae/data.hpp"
#include "vitdae/eval.hpp"
#include "vitdae/nn.hpp"

namespace vitdae {

struct ClassifierConfig {
  int channels = 3;
  int image_size = 16;
  int classes = 4;
  int width = 16;
  int feature_dim = 64;
  int epochs = 4;
  int batch_size = 64;
  double lr = 2e-3;
  std::uint64_t seed = 0;

  void validate() const;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ClassifierConfig, channels, image_size, classes,
                                                width, feature_dim, epochs, batch_size, lr, seed)

// conv3x3 -> conv4x4/2 -> conv4x4/2 (SiLU), global average pool, a SiLU
// feature layer and a linear head.
class ToyClassifier {
 public:
  explicit ToyClassifier(ClassifierConfig config);

  const ClassifierConfig& config() const { return config_; }
  ParameterSet<float>& params() { return params_; }
  const ParameterSet<float>& params() const { return params_; }
  void init(Rng& rng);

  // [B, feature_dim] penultimate activations.
  Tensor<float> features(const Tensor<float>& images) const;
  Tensor<float> logits(const Tensor<float>& images) const;
  std::vector<int> predict(const Tensor<float>& images) const;

 private:
  ClassifierConfig config_;
  ParameterSet<float> params_;
  Tensor<float> c1_w, c1_b, c2_w, c2_b, c3_w, c3_b, fc_w, fc_b, head_w, head_b;
};

// Adam with cross-entropy; batches drawn by a seeded shuffle per epoch.
ToyClassifier train_classifier(const Dataset& data, ClassifierConfig config);

// Batched inference helpers (no gradient).
FeatureMatrix extract_features(const ToyClassifier& model, const Dataset& data);
std::vector<int> predict_all(const ToyClassifier& model, const Dataset& data);
Confusion confusion_matrix(const std::vector<int>& truth, const std::vector<int>& predicted,
                           int classes);

enum class DownstreamMode { kReal, kSynthetic, kHybrid };

DownstreamMode parse_downstream_mode(const std::string& name);
std::string downstream_mode_name(DownstreamMode mode);

// Trains a fresh classifier on the training set for `mode` and scores it on
// `test`. Synthetic classes are matched to real ones by name.
ClassMetrics downstream_eval(const Dataset& real_train, const Dataset* synthetic,
                             const Dataset& test, DownstreamMode mode,
                             const ClassifierConfig& config);

}  // namespace vitdae
