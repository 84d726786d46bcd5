// Copyright 2026 The vitdae Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "vitdae/classifier.hpp"
#include "vitdae/error.hpp"

namespace vitdae {

void ClassifierConfig::validate() const {
  check(channels >= 1 && classes >= 2 && width >= 1 && feature_dim >= 1, ErrorCode::kConfig,
        "classifier: channels, width and feature_dim must be positive and classes >= 2");
  check(image_size >= 4 && image_size % 4 == 0, ErrorCode::kConfig,
        "classifier: image_size must be a positive multiple of 4");
  check(epochs >= 1 && batch_size >= 1 && lr > 0, ErrorCode::kConfig,
        "classifier: epochs, batch_size and lr must be positive");
}

ToyClassifier::ToyClassifier(ClassifierConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto c = static_cast<std::size_t>(config_.channels);
  const auto w = static_cast<std::size_t>(config_.width);
  const auto f = static_cast<std::size_t>(config_.feature_dim);
  c1_w = params_.add("conv1.w", {w, c, 3, 3});
  c1_b = params_.add("conv1.b", {w});
  c2_w = params_.add("conv2.w", {2 * w, w, 4, 4});
  c2_b = params_.add("conv2.b", {2 * w});
  c3_w = params_.add("conv3.w", {2 * w, 2 * w, 4, 4});
  c3_b = params_.add("conv3.b", {2 * w});
  fc_w = params_.add("fc.w", {2 * w, f});
  fc_b = params_.add("fc.b", {f});
  head_w = params_.add("head.w", {f, static_cast<std::size_t>(config_.classes)});
  head_b = params_.add("head.b", {static_cast<std::size_t>(config_.classes)});
}

void ToyClassifier::init(Rng& rng) {
  for (const auto& [name, t] : params_.entries()) {
    if (name.ends_with(".b")) continue;
    std::size_t fan_in = 1;
    for (std::size_t i = 1; i < t.rank(); ++i) fan_in *= t.dim(i);
    if (t.rank() == 2) fan_in = t.dim(0);
    init_uniform(t, std::sqrt(6.0 / static_cast<double>(fan_in)), rng);
  }
}

Tensor<float> ToyClassifier::features(const Tensor<float>& images) const {
  check(images.rank() == 4 && images.dim(1) == static_cast<std::size_t>(config_.channels) &&
            images.dim(2) == static_cast<std::size_t>(config_.image_size) &&
            images.dim(3) == static_cast<std::size_t>(config_.image_size),
        ErrorCode::kShape, "classifier: expected [B," + std::to_string(config_.channels) + "," +
                               std::to_string(config_.image_size) + "," +
                               std::to_string(config_.image_size) + "], got " +
                               shape_str(images.shape()));
  Tensor<float> h = silu(conv2d(images, c1_w, c1_b, 1, 1));
  h = silu(conv2d(h, c2_w, c2_b, 2, 1));
  h = silu(conv2d(h, c3_w, c3_b, 2, 1));
  return silu(linear(global_avg_pool(h), fc_w, fc_b));
}

Tensor<float> ToyClassifier::logits(const Tensor<float>& images) const {
  return linear(features(images), head_w, head_b);
}

std::vector<int> ToyClassifier::predict(const Tensor<float>& images) const {
  NoGradGuard no_grad;
  const Tensor<float> l = logits(images);
  const std::size_t k = l.dim(1);
  std::vector<int> out(l.dim(0));
  auto d = l.data();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<int>(std::max_element(d.begin() + static_cast<std::ptrdiff_t>(i * k),
                                               d.begin() + static_cast<std::ptrdiff_t>((i + 1) * k)) -
                              (d.begin() + static_cast<std::ptrdiff_t>(i * k)));
  return out;
}

ToyClassifier train_classifier(const Dataset& data, ClassifierConfig config) {
  data.validate();
  check(data.size() > 0, ErrorCode::kInvalidArgument, "classifier: empty training set");
  config.channels = data.channels;
  config.image_size = data.resolution;
  config.classes = std::max(config.classes, data.class_count());
  ToyClassifier model(config);
  Rng rng(Rng::derive(config.seed, 0xC1A55));
  model.init(rng);
  AdamConfig ac;
  ac.lr = config.lr;
  Adam<float> opt(model.params().tensors(), ac);
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto bs = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
    for (std::size_t start = 0; start < order.size(); start += bs) {
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                   order.begin() + static_cast<std::ptrdiff_t>(std::min(start + bs, order.size())));
      const std::vector<int> labels = data.labels_of(idx);
      opt.zero_grad();
      cross_entropy(model.logits(data.batch(idx)), std::span<const int>(labels)).backward();
      opt.step();
    }
  }
  return model;
}

namespace {

template <typename F>
void for_batches(const Dataset& data, std::size_t bs, F&& fn) {
  for (std::size_t start = 0; start < data.size(); start += bs) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(start + bs, data.size()); ++i) idx.push_back(i);
    fn(data.batch(idx));
  }
}

}  // namespace

FeatureMatrix extract_features(const ToyClassifier& model, const Dataset& data) {
  NoGradGuard no_grad;
  FeatureMatrix out{0, static_cast<std::size_t>(model.config().feature_dim), {}};
  for_batches(data, 256, [&](const Tensor<float>& x) {
    const Tensor<float> f = model.features(x);
    for (float v : f.data()) out.values.push_back(v);
    out.rows += f.dim(0);
  });
  return out;
}

std::vector<int> predict_all(const ToyClassifier& model, const Dataset& data) {
  std::vector<int> out;
  for_batches(data, 256, [&](const Tensor<float>& x) {
    const auto p = model.predict(x);
    out.insert(out.end(), p.begin(), p.end());
  });
  return out;
}

Confusion confusion_matrix(const std::vector<int>& truth, const std::vector<int>& predicted,
                           int classes) {
  check(truth.size() == predicted.size(), ErrorCode::kShape,
        "confusion: label counts differ");
  Confusion c(static_cast<std::size_t>(classes), std::vector<long>(static_cast<std::size_t>(classes), 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    check(truth[i] >= 0 && truth[i] < classes && predicted[i] >= 0 && predicted[i] < classes,
          ErrorCode::kInvalidArgument, "confusion: label outside class range");
    ++c[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
  }
  return c;
}

DownstreamMode parse_downstream_mode(const std::string& name) {
  if (name == "real") return DownstreamMode::kReal;
  if (name == "synthetic") return DownstreamMode::kSynthetic;
  if (name == "hybrid") return DownstreamMode::kHybrid;
  fail(ErrorCode::kConfig, "unknown downstream mode '" + name + "' (real|synthetic|hybrid)");
}

std::string downstream_mode_name(DownstreamMode mode) {
  switch (mode) {
    case DownstreamMode::kReal: return "real";
    case DownstreamMode::kSynthetic: return "synthetic";
    case DownstreamMode::kHybrid: return "hybrid";
  }
  return "?";
}

namespace {

// Appends `src` to `dst`, relabelling classes by name into dst's class list.
void merge_by_name(Dataset& dst, const Dataset& src, const std::string& tag) {
  check(src.channels == dst.channels && src.resolution == dst.resolution, ErrorCode::kShape,
        "downstream: " + tag + " images have a different geometry");
  std::vector<int> map;
  for (const auto& name : src.class_names) {
    auto it = std::find(dst.class_names.begin(), dst.class_names.end(), name);
    check(it != dst.class_names.end(), ErrorCode::kInvalidArgument,
          "downstream: " + tag + " class '" + name + "' is not a test class");
    map.push_back(static_cast<int>(it - dst.class_names.begin()));
  }
  for (std::size_t i = 0; i < src.size(); ++i)
    dst.append(tag + ":" + src.ids[i], map[static_cast<std::size_t>(src.labels[i])],
               src.pixels.data() + i * src.image_numel());
}

}  // namespace

ClassMetrics downstream_eval(const Dataset& real_train, const Dataset* synthetic,
                             const Dataset& test, DownstreamMode mode,
                             const ClassifierConfig& config) {
  test.validate();
  check(test.class_count() >= 2, ErrorCode::kInvalidArgument, "downstream: need >= 2 classes");
  check(test.size() > 0, ErrorCode::kInvalidArgument, "downstream: empty test set");
  Dataset train;
  train.channels = test.channels;
  train.resolution = test.resolution;
  train.class_names = test.class_names;
  if (mode != DownstreamMode::kSynthetic) merge_by_name(train, real_train, "real");
  if (mode != DownstreamMode::kReal) {
    check(synthetic != nullptr, ErrorCode::kInvalidArgument,
          "downstream: " + downstream_mode_name(mode) + " mode needs a synthetic set");
    merge_by_name(train, *synthetic, "synthetic");
  }
  for (int k = 0; k < test.class_count(); ++k)
    check(!train.indices_of_class(k).empty(), ErrorCode::kInvalidArgument,
          "downstream: class '" + test.class_names[static_cast<std::size_t>(k)] +
              "' absent from the training set");
  ClassifierConfig cc = config;
  cc.classes = test.class_count();
  const ToyClassifier model = train_classifier(train, cc);
  return metrics_from_confusion(confusion_matrix(test.labels, predict_all(model, test), test.class_count()));
}

}  // namespace vitdae
