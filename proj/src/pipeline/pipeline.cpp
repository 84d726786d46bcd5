// Copyright 2026 The vitdae Authors
// SPDX-License-Identifier: Apache-2.0

#include "vitdae/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "vitdae/checkpoint.hpp"
#include "vitdae/error.hpp"

namespace vitdae {

namespace fs = std::filesystem;
using json = nlohmann::json;

void TrainConfig::validate() const {
  check(stage == 1 || stage == 2, ErrorCode::kConfig, "config: stage must be 1 or 2");
  check(epochs >= 1 && batch_size >= 1, ErrorCode::kConfig,
        "config: epochs and batch_size must be positive");
  check(lr > 0 && beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && adam_eps > 0 &&
            grad_clip >= 0,
        ErrorCode::kConfig, "config: invalid optimizer hyperparameters");
  check(checkpoint_every >= 0, ErrorCode::kConfig, "config: checkpoint_every must be >= 0");
  check(ema_decay >= 0 && ema_decay < 1, ErrorCode::kConfig, "config: ema_decay must be in [0,1)");
  encoder.validate();
  unet.validate();
  latent.validate();
  parse_latent_objective(latent_objective);
  check(encoder.code_dim == unet.cond_dim, ErrorCode::kConfig,
        "config: encoder.code_dim must equal unet.cond_dim");
  check(encoder.image_size == unet.image_size && encoder.channels == unet.in_channels,
        ErrorCode::kConfig, "config: encoder and unet image geometry differ");
  check(latent.code_dim == encoder.code_dim, ErrorCode::kConfig,
        "config: latent.code_dim must equal encoder.code_dim");
  make_schedule(schedule);
}

Stage1Model::Stage1Model(ViTConfig enc, UNetConfig unet_cfg, ScheduleConfig sched)
    : encoder_config(enc), unet_config(unet_cfg), schedule(sched), encoder(enc), unet(unet_cfg) {
  check(enc.code_dim == unet_cfg.cond_dim && enc.image_size == unet_cfg.image_size &&
            enc.channels == unet_cfg.in_channels,
        ErrorCode::kConfig, "stage-1 model: encoder and unet configs disagree");
  make_schedule(schedule);
}

void Stage1Model::init(Rng& rng) {
  encoder.init(rng);
  unet.init(rng);
}

NoiseFn<float> Stage1Model::noise_fn() const {
  const UNet<float>* net = &unet;
  return [net](const Tensor<float>& x, int t, const Tensor<float>* z) {
    NoGradGuard no_grad;
    return net->predict_noise(x, std::vector<int>(x.dim(0), t), z ? *z : Tensor<float>());
  };
}

namespace {

constexpr std::size_t kChunk = 64;

Tensor<float> rows(const Tensor<float>& x, std::size_t start, std::size_t count) {
  return slice(x, 0, start, count);
}

void check_geometry(const ViTConfig& enc, const Dataset& data) {
  check(data.channels == enc.channels && data.resolution == enc.image_size, ErrorCode::kShape,
        "dataset is " + std::to_string(data.channels) + "x" + std::to_string(data.resolution) +
            "x" + std::to_string(data.resolution) + " but the model expects " +
            std::to_string(enc.channels) + "x" + std::to_string(enc.image_size) + "x" +
            std::to_string(enc.image_size));
}

AdamConfig adam_from(const TrainConfig& cfg) {
  AdamConfig ac;
  ac.lr = cfg.lr;
  ac.beta1 = cfg.beta1;
  ac.beta2 = cfg.beta2;
  ac.eps = cfg.adam_eps;
  ac.grad_clip = cfg.grad_clip;
  return ac;
}

void shuffle(std::vector<std::size_t>& order, Rng& rng) {
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1],
              order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
}

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

}  // namespace

Tensor<float> Stage1Model::encode(const Tensor<float>& images) const {
  NoGradGuard no_grad;
  const std::size_t n = images.dim(0);
  if (n <= kChunk) return encoder.encode(images);
  std::vector<Tensor<float>> parts;
  for (std::size_t s = 0; s < n; s += kChunk)
    parts.push_back(encoder.encode(rows(images, s, std::min(kChunk, n - s))));
  return concat(parts, 0);
}

LatentModel::LatentModel(LatentConfig cfg, ScheduleConfig sched)
    : config(cfg), schedule(std::move(sched)), net(cfg) {
  make_schedule(schedule);
}

void save_stage1(const fs::path& base, const Stage1Model& model) {
  Checkpoint ckpt;
  ckpt.meta = {{"kind", "stage1"},
               {"encoder", model.encoder_config},
               {"unet", model.unet_config},
               {"schedule", model.schedule}};
  if (model.stats) ckpt.meta["stats"] = *model.stats;
  append_records(ckpt, "encoder.", model.encoder.params());
  append_records(ckpt, "unet.", model.unet.params());
  save_checkpoint(base, ckpt);
}

Stage1Model load_stage1(const fs::path& base) {
  const Checkpoint ckpt = load_checkpoint(base);
  check(ckpt.meta.value("kind", "") == "stage1", ErrorCode::kConfig,
        base.string() + " is not a stage-1 checkpoint");
  Stage1Model model(ckpt.meta.at("encoder").get<ViTConfig>(),
                    ckpt.meta.at("unet").get<UNetConfig>(),
                    ckpt.meta.at("schedule").get<ScheduleConfig>());
  if (ckpt.meta.contains("stats")) model.stats = ckpt.meta.at("stats").get<CodeStats>();
  restore_records(ckpt, "encoder.", model.encoder.params());
  restore_records(ckpt, "unet.", model.unet.params());
  return model;
}

void save_latent(const fs::path& base, const LatentModel& model) {
  Checkpoint ckpt;
  ckpt.meta = {{"kind", "latent"},
               {"latent", model.config},
               {"schedule", model.schedule},
               {"label", model.label},
               {"class_name", model.class_name}};
  append_records(ckpt, "latent.", model.net.params());
  save_checkpoint(base, ckpt);
}

LatentModel load_latent(const fs::path& base) {
  const Checkpoint ckpt = load_checkpoint(base);
  check(ckpt.meta.value("kind", "") == "latent", ErrorCode::kConfig,
        base.string() + " is not a latent checkpoint");
  LatentModel model(ckpt.meta.at("latent").get<LatentConfig>(),
                    ckpt.meta.at("schedule").get<ScheduleConfig>());
  model.label = ckpt.meta.value("label", -1);
  model.class_name = ckpt.meta.value("class_name", "");
  restore_records(ckpt, "latent.", model.net.params());
  return model;
}

Stage1Result train_stage1(Stage1Model& model, const TrainConfig& cfg, const Dataset& data,
                          const EpochHook& hook) {
  cfg.validate();
  data.validate();
  check(data.size() > 0, ErrorCode::kInvalidArgument, "stage 1: dataset is empty");
  check_geometry(model.encoder_config, data);
  const NoiseSchedule sched = model.noise_schedule();
  const int T = sched.steps();

  std::vector<Tensor<float>> params = model.encoder.params().tensors();
  for (const auto& p : model.unet.params().tensors()) params.push_back(p);
  model.encoder.params().set_requires_grad(true);
  model.unet.params().set_requires_grad(true);
  Adam<float> opt(params, adam_from(cfg));
  std::optional<Ema<float>> ema;
  if (cfg.ema_decay > 0) ema.emplace(params, cfg.ema_decay);

  Rng rng(Rng::derive(cfg.seed, 1));
  std::vector<std::size_t> order = iota(data.size());
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t numel = data.image_numel();
  Stage1Result result;
  result.images = data.size();
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle(order, rng);
    double total = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::vector<std::size_t> idx(
          order.begin() + static_cast<std::ptrdiff_t>(start),
          order.begin() + static_cast<std::ptrdiff_t>(std::min(start + bs, order.size())));
      const Tensor<float> x0 = data.batch(idx);
      const std::size_t b = idx.size();
      std::vector<int> steps(b);
      for (auto& t : steps) t = rng.uniform_int(1, T);
      const Tensor<float> eps = rng.normal_tensor<float>(x0.shape());
      Tensor<float> x_t(x0.shape());
      for (std::size_t i = 0; i < b; ++i) {
        const double a = std::sqrt(sched.alpha_bar(steps[i])), s = std::sqrt(1 - sched.alpha_bar(steps[i]));
        for (std::size_t j = i * numel; j < (i + 1) * numel; ++j)
          x_t[j] = static_cast<float>(a * x0[j] + s * eps[j]);
      }
      const Tensor<float> z =
          cfg.zero_condition
              ? Tensor<float>({b, static_cast<std::size_t>(model.encoder_config.code_dim)})
              : model.encoder.encode(x0);
      opt.zero_grad();
      Tensor<float> loss = l1_loss(model.unet.predict_noise(x_t, steps, z), eps);
      const double value = loss.item();
      check(std::isfinite(value), ErrorCode::kInternal,
            "stage 1: loss diverged at epoch " + std::to_string(epoch));
      loss.backward();
      opt.step();
      if (ema) ema->update();
      total += value;
      ++batches;
    }
    const double mean_loss = total / static_cast<double>(batches);
    result.losses.push_back({epoch, mean_loss});
    if (hook) hook(epoch, mean_loss);
  }
  if (ema) ema->copy_to(params);
  model.encoder.params().set_requires_grad(false);
  model.unet.params().set_requires_grad(false);
  model.stats = compute_code_stats(model.encode(data.all()));
  return result;
}

Tensor<float> dataset_codes(const Stage1Model& model, const Dataset& data) {
  check(model.stats.has_value(), ErrorCode::kState,
        "stage-1 checkpoint is missing code normalization stats");
  check_geometry(model.encoder_config, data);
  return normalize_codes(model.encode(data.all()), *model.stats);
}

namespace {

LatentRun train_latent(const Tensor<float>& codes, const TrainConfig& cfg, int label,
                       const std::string& name, const NoiseSchedule& sched) {
  LatentRun run{LatentModel(cfg.latent, cfg.schedule), {}, codes.dim(0)};
  run.model.label = label;
  run.model.class_name = name;
  const auto stream = static_cast<std::uint64_t>(label + 1);
  Rng init_rng(Rng::derive(cfg.seed, 100 + stream));
  run.model.net.init(init_rng);
  run.model.net.params().set_requires_grad(true);
  const auto params = run.model.net.params().tensors();
  Adam<float> opt(params, adam_from(cfg));
  std::optional<Ema<float>> ema;
  if (cfg.ema_decay > 0) ema.emplace(params, cfg.ema_decay);
  const LatentNoiseFn<float> fn = as_noise_fn(run.model.net);
  const LatentObjective objective = parse_latent_objective(cfg.latent_objective);
  Rng rng(Rng::derive(cfg.seed, 200 + stream));
  std::vector<std::size_t> order = iota(codes.dim(0));
  const std::size_t d = codes.dim(1), bs = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle(order, rng);
    double total = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t b = std::min(bs, order.size() - start);
      Tensor<float> batch({b, d});
      for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < d; ++j) batch[i * d + j] = codes[order[start + i] * d + j];
      opt.zero_grad();
      Tensor<float> loss = latent_loss(fn, SemanticCodes<float>{batch, true}, sched, rng, objective);
      const double value = loss.item();
      check(std::isfinite(value), ErrorCode::kInternal, "stage 2: loss diverged");
      loss.backward();
      opt.step();
      if (ema) ema->update();
      total += value;
      ++batches;
    }
    run.losses.push_back({epoch, total / static_cast<double>(batches)});
  }
  if (ema) ema->copy_to(params);
  run.model.net.params().set_requires_grad(false);
  return run;
}

}  // namespace

Stage2Result train_stage2(const Stage1Model& stage1, const TrainConfig& cfg, const Dataset& data) {
  cfg.validate();
  data.validate();
  check(stage1.stats.has_value(), ErrorCode::kState,
        "stage 2: stage-1 checkpoint is missing code normalization stats");
  check(cfg.latent.code_dim == stage1.encoder_config.code_dim, ErrorCode::kConfig,
        "stage 2: latent.code_dim does not match the stage-1 encoder");
  check(cfg.schedule.steps == stage1.schedule.steps, ErrorCode::kConfig,
        "stage 2: schedule length differs from stage 1");
  const NoiseSchedule sched = make_schedule(cfg.schedule);

  std::vector<int> classes;
  if (cfg.class_filter.empty()) {
    for (int k = 0; k < data.class_count(); ++k) classes.push_back(k);
  } else {
    for (const auto& name : cfg.class_filter) {
      auto it = std::find(data.class_names.begin(), data.class_names.end(), name);
      check(it != data.class_names.end(), ErrorCode::kInvalidArgument,
            "stage 2: class '" + name + "' not in dataset");
      classes.push_back(static_cast<int>(it - data.class_names.begin()));
    }
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  }

  Stage2Result result;
  result.encoder_hash_before = hash_values(stage1.encoder.params().flatten());
  auto class_codes = [&](const std::vector<int>& labels) {
    std::vector<std::size_t> idx;
    for (int k : labels)
      for (auto i : data.indices_of_class(k)) idx.push_back(i);
    std::sort(idx.begin(), idx.end());
    check(!idx.empty(), ErrorCode::kInvalidArgument, "stage 2: no images selected");
    return dataset_codes(stage1, data.subset(idx));
  };
  if (cfg.per_class) {
    for (int k : classes)
      result.runs.push_back(train_latent(class_codes({k}), cfg, k,
                                         data.class_names[static_cast<std::size_t>(k)], sched));
  } else {
    result.runs.push_back(train_latent(class_codes(classes), cfg, -1, "", sched));
  }
  result.encoder_hash_after = hash_values(stage1.encoder.params().flatten());
  check(result.encoder_hash_before == result.encoder_hash_after, ErrorCode::kInternal,
        "stage 2: encoder parameters changed");
  return result;
}

Tensor<float> decode_codes(const Stage1Model& stage1, const Tensor<float>& codes,
                           std::uint64_t seed, const SampleConfig& sample) {
  const auto c = static_cast<std::size_t>(stage1.unet_config.in_channels);
  const auto hw = static_cast<std::size_t>(stage1.unet_config.image_size);
  check(codes.rank() == 2 && codes.dim(1) == static_cast<std::size_t>(stage1.encoder_config.code_dim),
        ErrorCode::kShape, "decode: codes must be [n, " +
                               std::to_string(stage1.encoder_config.code_dim) + "]");
  const std::size_t n = codes.dim(0);
  if (n == 0) return Tensor<float>({0, c, hw, hw});
  const NoiseSchedule sched = stage1.noise_schedule();
  const StepPlan plan = StepPlan::evenly_strided(sched.steps(), sample.image_steps);
  Rng rng(seed);
  const Tensor<float> x_T = rng.normal_tensor<float>({n, c, hw, hw});
  const NoiseFn<float> fn = stage1.noise_fn();
  std::vector<Tensor<float>> parts;
  for (std::size_t s = 0; s < n; s += kChunk) {
    const std::size_t m = std::min(kChunk, n - s);
    const Tensor<float> z = rows(codes, s, m).detach();
    parts.push_back(ddim_sample(rows(x_T, s, m).detach(), fn, &z, plan, sched, sample.clip));
  }
  Tensor<float> out = parts.size() == 1 ? parts.front() : concat(parts, 0).detach();
  for (auto& v : out.data()) v = std::clamp(v, -1.0f, 1.0f);
  return out;
}

Tensor<float> generate(const Stage1Model& stage1, const LatentModel& latent, std::size_t n,
                       std::uint64_t seed, const SampleConfig& sample) {
  check(stage1.stats.has_value(), ErrorCode::kState,
        "generate: stage-1 checkpoint is missing code normalization stats");
  check(latent.config.code_dim == stage1.encoder_config.code_dim &&
            latent.schedule.steps == stage1.schedule.steps,
        ErrorCode::kConfig, "generate: incompatible checkpoints (code dim or schedule length)");
  const auto d = static_cast<std::size_t>(latent.config.code_dim);
  if (n == 0) return decode_codes(stage1, Tensor<float>({0, d}), seed, sample);
  const NoiseSchedule sched = make_schedule(latent.schedule);
  const auto codes = sample_code(as_noise_fn(latent.net), n, d,
                                 StepPlan::evenly_strided(sched.steps(), sample.latent_steps),
                                 sched, Rng::derive(seed, 1));
  return decode_codes(stage1, unnormalize_codes(codes.values, *stage1.stats),
                      Rng::derive(seed, 2), sample);
}

Reconstruction reconstruct(const Stage1Model& stage1, const Tensor<float>& images, int steps) {
  check(images.rank() == 4 &&
            images.dim(1) == static_cast<std::size_t>(stage1.unet_config.in_channels) &&
            images.dim(2) == static_cast<std::size_t>(stage1.unet_config.image_size) &&
            images.dim(3) == images.dim(2),
        ErrorCode::kShape, "reconstruct: image shape " + shape_str(images.shape()) +
                               " does not match the model");
  const NoiseSchedule sched = stage1.noise_schedule();
  const StepPlan plan = StepPlan::evenly_strided(sched.steps(), steps);
  const NoiseFn<float> fn = stage1.noise_fn();
  const std::size_t n = images.dim(0);
  std::vector<Tensor<float>> recon, noise;
  for (std::size_t s = 0; s < n; s += kChunk) {
    const std::size_t m = std::min(kChunk, n - s);
    const Tensor<float> x0 = rows(images, s, m).detach();
    const Tensor<float> z = stage1.encode(x0);
    noise.push_back(ddim_encode(x0, fn, &z, plan, sched));
    recon.push_back(ddim_sample(noise.back(), fn, &z, plan, sched, true));
  }
  Reconstruction r;
  r.images = recon.size() == 1 ? recon.front() : concat(recon, 0).detach();
  r.noise = noise.size() == 1 ? noise.front() : concat(noise, 0).detach();
  double se = 0;
  for (std::size_t i = 0; i < images.numel(); ++i) {
    const double d = static_cast<double>(r.images[i]) - images[i];
    se += d * d;
  }
  r.mse = n == 0 ? 0.0 : se / static_cast<double>(images.numel());
  return r;
}

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t hash) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= p[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::uint64_t hash_values(const std::vector<float>& values) {
  return fnv1a(values.data(), values.size() * sizeof(float));
}

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

std::uint64_t config_hash(const json& config) {
  const std::string text = config.dump();
  return fnv1a(text.data(), text.size());
}

RunDir::RunDir(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_);
  fs::create_directories(checkpoints());
}

void RunDir::write_config(const json& config) const {
  std::ofstream out(root_ / "config.json");
  check(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + (root_ / "config.json").string());
  out << config.dump(2) << "\n";
}

json RunDir::manifest() const {
  const fs::path p = root_ / "manifest.json";
  if (!fs::exists(p)) return json{{"entries", json::array()}};
  std::ifstream in(p);
  json m;
  try {
    in >> m;
  } catch (const json::exception& e) {
    fail(ErrorCode::kIo, "corrupt manifest " + p.string() + ": " + e.what());
  }
  check(m.contains("entries") && m["entries"].is_array(), ErrorCode::kIo,
        "corrupt manifest " + p.string());
  return m;
}

void RunDir::append_manifest(json entry) const {
  json m = manifest();
  if (entry.contains("config")) entry["config_hash"] = hex64(config_hash(entry["config"]));
  m["entries"].push_back(std::move(entry));
  const fs::path tmp = root_ / "manifest.json.tmp";
  {
    std::ofstream out(tmp);
    check(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + tmp.string());
    out << m.dump(2) << "\n";
  }
  fs::rename(tmp, root_ / "manifest.json");
}

void RunDir::append_losses(const std::string& series, const std::vector<EpochLoss>& losses) const {
  const fs::path p = root_ / "losses.csv";
  const bool fresh = !fs::exists(p);
  std::ofstream out(p, std::ios::app);
  check(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + p.string());
  if (fresh) out << "series,epoch,loss\n";
  out << std::setprecision(9);
  for (const auto& l : losses) out << series << ',' << l.epoch << ',' << l.loss << '\n';
}

void write_images(const Tensor<float>& images, const fs::path& dir, const std::string& prefix) {
  check(images.rank() == 4, ErrorCode::kShape, "write_images: expected [N,C,H,W]");
  check(images.dim(2) == images.dim(3), ErrorCode::kShape, "write_images: images must be square");
  fs::create_directories(dir);
  const std::size_t per = images.dim(1) * images.dim(2) * images.dim(3);
  auto data = images.data();
  for (std::size_t i = 0; i < images.dim(0); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%05zu.png", i);
    write_png(dir / (prefix + name), to_png(data.data() + i * per, static_cast<int>(images.dim(1)),
                                            static_cast<int>(images.dim(2))));
  }
}

}  // namespace vitdae
