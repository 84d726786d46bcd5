// Copyright 2026 The vitdae Authors
// SPDX-License-Identifier: Apache-2.0

#include "vitdae/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include "vitdae/checkpoint.hpp"
#include "vitdae/classifier.hpp"
#include "vitdae/data.hpp"
#include "vitdae/error.hpp"
#include "vitdae/eval.hpp"
#include "vitdae/pipeline.hpp"

namespace vitdae {

namespace fs = std::filesystem;
using json = nlohmann::json;

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{
      "toygen", "train-stage1", "train-stage2", "sample",        "reconstruct",
      "encode", "eval-fid",     "eval-pr",      "manifold-plot", "downstream"};
  return names;
}

std::string output_path(const std::string& path) {
  if (path.empty()) return path;
  const fs::path p(path);
  const char* root = std::getenv("VITDAE_OUTPUT_ROOT");
  if (p.is_absolute() || root == nullptr || *root == '\0') return path;
  return (fs::path(root) / p).string();
}

namespace {

json metric_defaults() {
  return {{"real", ""},
          {"generated", ""},
          {"extractor", "classifier"},
          {"stage1", ""},
          {"classifier", ClassifierConfig{}},
          {"out", ""}};
}

}  // namespace

json command_defaults(const std::string& command) {
  if (command == "toygen") {
    json j = ToySpec{};
    j["out"] = "toy";
    return j;
  }
  if (command == "train-stage1" || command == "train-stage2") {
    TrainConfig cfg;
    cfg.stage = command == "train-stage1" ? 1 : 2;
    json j = cfg;
    j["run_dir"] = "run";
    if (cfg.stage == 2) j["stage1"] = "";
    return j;
  }
  if (command == "sample")
    return {{"run_dir", "run"}, {"stage1", ""},        {"latents", json::array()},
            {"per_latent", 16}, {"seed", 0},           {"image_steps", 50},
            {"latent_steps", 50}, {"clip", true},      {"out", ""}};
  if (command == "reconstruct")
    return {{"stage1", ""}, {"dataset", ""}, {"steps", 50}, {"limit", 0}, {"out", ""}};
  if (command == "encode")
    return {{"stage1", ""}, {"dataset", ""}, {"normalized", false}, {"out", "codes"}};
  if (command == "eval-fid") {
    json j = metric_defaults();
    j["reg"] = 1e-6;
    return j;
  }
  if (command == "eval-pr") {
    json j = metric_defaults();
    j["k"] = 3;
    return j;
  }
  if (command == "manifold-plot") {
    json j = metric_defaults();
    j["k"] = 3;
    j["out"] = "manifold";
    return j;
  }
  if (command == "downstream")
    return {{"real_train", ""},
            {"synthetic", ""},
            {"test", ""},
            {"modes", {"real", "synthetic", "hybrid"}},
            {"classifier", ClassifierConfig{}},
            {"out", ""}};
  fail(ErrorCode::kInvalidArgument, "unknown command '" + command + "'");
}

namespace {

// Objects in the defaults are schemas; arrays and scalars are leaves.
void check_keys(const json& cfg, const json& defaults, const std::string& where) {
  check(cfg.is_object(), ErrorCode::kConfig, "config" + where + " must be a JSON object");
  for (const auto& [key, value] : cfg.items()) {
    check(defaults.contains(key), ErrorCode::kConfig,
          "unknown config key '" + (where.empty() ? key : where.substr(1) + "." + key) + "'");
    if (defaults[key].is_object()) check_keys(value, defaults[key], where + "." + key);
  }
}

json parse_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return text;
  }
}

}  // namespace

json effective_config(const std::string& command, const json& file_config,
                      const std::vector<std::pair<std::string, std::string>>& overrides) {
  const json defaults = command_defaults(command);
  json cfg = defaults;
  if (!file_config.is_null()) {
    check_keys(file_config, defaults, "");
    cfg.merge_patch(file_config);
  }
  for (const auto& [key, value] : overrides) {
    std::string pointer = "/" + key;
    std::replace(pointer.begin(), pointer.end(), '.', '/');
    const json::json_pointer ptr(pointer);
    check(defaults.contains(ptr), ErrorCode::kConfig, "unknown config key '" + key + "'");
    json v = parse_value(value);
    // Keep string-typed fields as strings even if they parse as numbers.
    if (defaults.at(ptr).is_string() && !v.is_string()) v = value;
    cfg[ptr] = v;
  }
  return cfg;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string require_path(const json& cfg, const char* key) {
  const std::string v = cfg.at(key).get<std::string>();
  check(!v.empty(), ErrorCode::kConfig, std::string("config: '") + key + "' is required");
  return v;
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  check(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  out << j.dump(2) << "\n";
}

json losses_json(const std::vector<EpochLoss>& losses) {
  json a = json::array();
  for (const auto& l : losses) a.push_back({{"epoch", l.epoch}, {"loss", l.loss}});
  return a;
}

TrainConfig train_config(const json& cfg) {
  json j = cfg;
  j.erase("run_dir");
  j.erase("stage1");
  return j.get<TrainConfig>();
}

json cmd_toygen(const json& cfg) {
  ToySpec spec = cfg.get<ToySpec>();
  const fs::path out = output_path(require_path(cfg, "out"));
  const Dataset data = generate_toy(spec);
  if (fs::exists(out)) fs::remove_all(out);
  write_dataset(data, out);
  // Deterministic record of the effective spec. No timestamps and no output
  // path, so trees generated from the same spec are byte-identical.
  json spec_only = cfg;
  spec_only.erase("out");
  const json record = {{"command", "toygen"},
                       {"config", spec_only},
                       {"config_hash", hex64(config_hash(spec_only))}};
  write_json(out / "toyspec.json", record);
  return {{"out", out.string()}, {"images", data.size()}, {"classes", data.class_names}};
}

json cmd_train_stage1(const json& cfg) {
  const auto start = Clock::now();
  TrainConfig tc = train_config(cfg);
  tc.stage = 1;
  tc.validate();
  check(!tc.dataset.empty(), ErrorCode::kConfig, "config: 'dataset' is required");
  const Dataset data = ingest(tc.dataset, tc.encoder.image_size);
  RunDir run(output_path(require_path(cfg, "run_dir")));
  run.write_config(cfg);

  Stage1Model model(tc.encoder, tc.unet, tc.schedule);
  Rng init_rng(Rng::derive(tc.seed, 0));
  model.init(init_rng);
  json checkpoints = json::array();
  auto hook = [&](int epoch, double loss) {
    std::cerr << "stage1 epoch " << epoch << "/" << tc.epochs << " loss " << loss << "\n";
    if (tc.checkpoint_every > 0 && epoch % tc.checkpoint_every == 0 && epoch < tc.epochs) {
      char name[32];
      std::snprintf(name, sizeof name, "stage1_epoch%04d", epoch);
      save_stage1(run.checkpoints() / name, model);
      checkpoints.push_back(std::string("checkpoints/") + name);
    }
  };
  const Stage1Result result = train_stage1(model, tc, data, hook);
  save_stage1(run.checkpoints() / "stage1", model);
  checkpoints.push_back("checkpoints/stage1");
  run.append_losses("stage1", result.losses);
  const json entry = {{"stage", "train-stage1"},
                      {"config", cfg},
                      {"seeds", {{"seed", tc.seed}}},
                      {"images", result.images},
                      {"losses", losses_json(result.losses)},
                      {"checkpoints", checkpoints},
                      {"wall_clock_s", seconds_since(start)}};
  run.append_manifest(entry);
  return {{"run_dir", run.root().string()},
          {"final_loss", result.losses.back().loss},
          {"first_loss", result.losses.front().loss},
          {"images", result.images}};
}

fs::path stage1_path(const json& cfg, const fs::path& run_dir) {
  const std::string given = cfg.value("stage1", "");
  return given.empty() ? run_dir / "checkpoints" / "stage1" : fs::path(given);
}

json cmd_train_stage2(const json& cfg) {
  const auto start = Clock::now();
  RunDir run(output_path(require_path(cfg, "run_dir")));
  const fs::path s1 = stage1_path(cfg, run.root());
  const Stage1Model stage1 = load_stage1(s1);
  TrainConfig tc = train_config(cfg);
  tc.stage = 2;
  // Model geometry comes from the stage-1 checkpoint.
  tc.encoder = stage1.encoder_config;
  tc.unet = stage1.unet_config;
  tc.schedule = stage1.schedule;
  tc.latent.code_dim = stage1.encoder_config.code_dim;
  tc.validate();
  check(!tc.dataset.empty(), ErrorCode::kConfig, "config: 'dataset' is required");
  const Dataset data = ingest(tc.dataset, stage1.encoder_config.image_size);
  run.write_config(cfg);
  const Stage2Result result = train_stage2(stage1, tc, data);
  json checkpoints = json::array(), models = json::array();
  for (const auto& r : result.runs) {
    const std::string name = r.model.label < 0 ? "latent_all" : "latent_" + r.model.class_name;
    save_latent(run.checkpoints() / name, r.model);
    checkpoints.push_back("checkpoints/" + name);
    run.append_losses("stage2/" + (r.model.label < 0 ? std::string("all") : r.model.class_name),
                      r.losses);
    models.push_back({{"checkpoint", "checkpoints/" + name},
                      {"label", r.model.label},
                      {"class_name", r.model.class_name},
                      {"codes", r.codes},
                      {"losses", losses_json(r.losses)}});
  }
  run.append_manifest({{"stage", "train-stage2"},
                       {"config", cfg},
                       {"seeds", {{"seed", tc.seed}}},
                       {"stage1", s1.string()},
                       {"encoder_hash", hex64(result.encoder_hash_after)},
                       {"models", models},
                       {"checkpoints", checkpoints},
                       {"wall_clock_s", seconds_since(start)}});
  return {{"run_dir", run.root().string()}, {"models", models}};
}

std::vector<fs::path> latent_checkpoints(const json& cfg, const fs::path& run_dir) {
  std::vector<fs::path> out;
  for (const auto& p : cfg.at("latents")) out.emplace_back(p.get<std::string>());
  if (!out.empty()) return out;
  const fs::path dir = run_dir / "checkpoints";
  if (fs::is_directory(dir))
    for (const auto& e : fs::directory_iterator(dir)) {
      const std::string name = e.path().filename().string();
      if (name.starts_with("latent_") && e.path().extension() == ".json")
        out.push_back(dir / e.path().stem());
    }
  std::sort(out.begin(), out.end());
  check(!out.empty(), ErrorCode::kConfig, "sample: no latent checkpoints found in " + dir.string());
  return out;
}

json cmd_sample(const json& cfg) {
  const auto start = Clock::now();
  const fs::path run_dir = output_path(require_path(cfg, "run_dir"));
  const Stage1Model stage1 = load_stage1(stage1_path(cfg, run_dir));
  SampleConfig sc;
  sc.image_steps = cfg.at("image_steps").get<int>();
  sc.latent_steps = cfg.at("latent_steps").get<int>();
  sc.clip = cfg.at("clip").get<bool>();
  const int per = cfg.at("per_latent").get<int>();
  check(per >= 0, ErrorCode::kConfig, "sample: per_latent must be >= 0");
  const auto seed = cfg.at("seed").get<std::uint64_t>();
  const std::string out_cfg = cfg.at("out").get<std::string>();
  const fs::path out = out_cfg.empty() ? run_dir / "samples" : fs::path(output_path(out_cfg));
  json written = json::array();
  std::uint64_t stream = 0;
  for (const auto& path : latent_checkpoints(cfg, run_dir)) {
    const LatentModel latent = load_latent(path);
    const std::string name = latent.label < 0 ? "all" : latent.class_name;
    const Tensor<float> images =
        generate(stage1, latent, static_cast<std::size_t>(per), Rng::derive(seed, stream++), sc);
    const fs::path dir = out / name;
    if (fs::exists(dir)) fs::remove_all(dir);
    fs::create_directories(dir);
    if (images.dim(0) > 0) write_images(images, dir, name + "_");
    written.push_back({{"class_name", name}, {"count", per}, {"dir", dir.string()}});
  }
  if (fs::exists(run_dir / "manifest.json") || out_cfg.empty()) {
    RunDir run(run_dir);
    run.append_manifest({{"stage", "sample"},
                         {"config", cfg},
                         {"seeds", {{"seed", seed}}},
                         {"outputs", written},
                         {"wall_clock_s", seconds_since(start)}});
  }
  return {{"out", out.string()}, {"sets", written}};
}

json cmd_reconstruct(const json& cfg) {
  const Stage1Model stage1 = load_stage1(require_path(cfg, "stage1"));
  Dataset data = ingest(require_path(cfg, "dataset"), stage1.encoder_config.image_size);
  const int limit = cfg.at("limit").get<int>();
  if (limit > 0 && static_cast<std::size_t>(limit) < data.size()) {
    std::vector<std::size_t> idx(static_cast<std::size_t>(limit));
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    data = data.subset(idx);
  }
  const Reconstruction r = reconstruct(stage1, data.all(), cfg.at("steps").get<int>());
  json result = {{"mse", r.mse}, {"images", data.size()}, {"steps", cfg.at("steps")}};
  const std::string out = cfg.at("out").get<std::string>();
  if (!out.empty()) {
    const fs::path dir = output_path(out);
    write_images(r.images, dir / "reconstructions", "rec_");
    write_json(dir / "reconstruct.json", {{"config", cfg}, {"result", result}});
  }
  return result;
}

void save_feature_matrix(const fs::path& path, const FeatureMatrix& m, json sidecar) {
  FeatureFile f;
  f.rows = m.rows;
  f.dim = m.dim;
  f.values.assign(m.values.begin(), m.values.end());
  f.sidecar = std::move(sidecar);
  save_features(path, f);
}

json cmd_encode(const json& cfg) {
  const Stage1Model stage1 = load_stage1(require_path(cfg, "stage1"));
  const Dataset data = ingest(require_path(cfg, "dataset"), stage1.encoder_config.image_size);
  const bool normalized = cfg.at("normalized").get<bool>();
  const Tensor<float> codes =
      normalized ? dataset_codes(stage1, data) : stage1.encode(data.all());
  FeatureMatrix m{codes.dim(0), codes.dim(1), {}};
  m.values.assign(codes.data().begin(), codes.data().end());
  const fs::path out = output_path(require_path(cfg, "out"));
  save_feature_matrix(out, m,
                      {{"extractor", "encoder"}, {"normalized", normalized}, {"ids", data.ids},
                       {"labels", data.labels}, {"class_names", data.class_names}});
  return {{"out", out.string()}, {"rows", m.rows}, {"dim", m.dim}};
}

struct FeaturePair {
  FeatureMatrix real, generated;
  std::string extractor;
};

FeaturePair metric_features(const json& cfg) {
  const std::string extractor = cfg.at("extractor").get<std::string>();
  ClassifierConfig cc = cfg.at("classifier").get<ClassifierConfig>();
  FeaturePair out;
  out.extractor = extractor;
  if (extractor == "classifier") {
    const Dataset real = ingest(require_path(cfg, "real"), cc.image_size);
    const Dataset gen = ingest(require_path(cfg, "generated"), cc.image_size);
    cc.classes = std::max(2, real.class_count());
    const ToyClassifier model = train_classifier(real, cc);
    out.real = extract_features(model, real);
    out.generated = extract_features(model, gen);
  } else if (extractor == "encoder") {
    const Stage1Model stage1 = load_stage1(require_path(cfg, "stage1"));
    const int res = stage1.encoder_config.image_size;
    auto feats = [&](const Dataset& d) {
      const Tensor<float> codes = stage1.encode(d.all());
      FeatureMatrix m{codes.dim(0), codes.dim(1), {}};
      m.values.assign(codes.data().begin(), codes.data().end());
      return m;
    };
    out.real = feats(ingest(require_path(cfg, "real"), res));
    out.generated = feats(ingest(require_path(cfg, "generated"), res));
  } else {
    fail(ErrorCode::kConfig, "unknown extractor '" + extractor + "' (classifier|encoder)");
  }
  const std::string dir = cfg.at("out").get<std::string>();
  if (!dir.empty()) {
    const fs::path base = output_path(dir);
    save_feature_matrix(base / "features_real", out.real, {{"extractor", extractor}});
    save_feature_matrix(base / "features_generated", out.generated, {{"extractor", extractor}});
  }
  return out;
}

json finish_metric(const json& cfg, const std::string& name, json result) {
  const std::string dir = cfg.at("out").get<std::string>();
  if (!dir.empty()) write_json(fs::path(output_path(dir)) / (name + ".json"), {{"config", cfg}, {"result", result}});
  return result;
}

json cmd_eval_fid(const json& cfg) {
  const FeaturePair f = metric_features(cfg);
  const double fd = frechet_distance(feature_stats(f.real), feature_stats(f.generated),
                                     cfg.at("reg").get<double>());
  return finish_metric(cfg, "fid", {{"frechet_distance", fd},
                                    {"extractor", f.extractor},
                                    {"real", f.real.rows},
                                    {"generated", f.generated.rows}});
}

json cmd_eval_pr(const json& cfg) {
  const FeaturePair f = metric_features(cfg);
  const auto k = cfg.at("k").get<std::size_t>();
  const PrecisionRecall pr = improved_pr(estimate_manifold(f.real, k), estimate_manifold(f.generated, k));
  return finish_metric(cfg, "pr", {{"precision", pr.precision},
                                   {"recall", pr.recall},
                                   {"k", k},
                                   {"extractor", f.extractor}});
}

json cmd_manifold_plot(const json& cfg) {
  json local = cfg;
  local["out"] = "";
  const FeaturePair f = metric_features(local);
  const ManifoldPlot plot = manifold_plot(f.real, f.generated, cfg.at("k").get<std::size_t>());
  const fs::path out = output_path(require_path(cfg, "out"));
  write_manifold_svg(out.string() + ".svg", plot);
  write_manifold_csv(out.string() + ".csv", plot);
  return {{"svg", out.string() + ".svg"},
          {"csv", out.string() + ".csv"},
          {"top_eigenvalues", {plot.eigenvalues[0], plot.eigenvalues[1]}}};
}

json cmd_downstream(const json& cfg) {
  ClassifierConfig cc = cfg.at("classifier").get<ClassifierConfig>();
  const Dataset real = ingest(require_path(cfg, "real_train"), cc.image_size);
  const Dataset test = ingest(require_path(cfg, "test"), cc.image_size);
  std::optional<Dataset> synthetic;
  const std::string syn = cfg.at("synthetic").get<std::string>();
  if (!syn.empty()) synthetic = ingest(syn, cc.image_size);
  json results = json::object();
  for (const auto& m : cfg.at("modes")) {
    const DownstreamMode mode = parse_downstream_mode(m.get<std::string>());
    const ClassMetrics metrics =
        downstream_eval(real, synthetic ? &*synthetic : nullptr, test, mode, cc);
    json f1 = json::object();
    for (std::size_t k = 0; k < metrics.f1.size(); ++k) f1[test.class_names[k]] = metrics.f1[k];
    results[downstream_mode_name(mode)] = {
        {"accuracy", metrics.accuracy}, {"f1", f1}, {"confusion", metrics.confusion}};
  }
  return finish_metric(cfg, "downstream", results);
}

}  // namespace

json run_command(const std::string& command, const json& config) {
  if (command == "toygen") return cmd_toygen(config);
  if (command == "train-stage1") return cmd_train_stage1(config);
  if (command == "train-stage2") return cmd_train_stage2(config);
  if (command == "sample") return cmd_sample(config);
  if (command == "reconstruct") return cmd_reconstruct(config);
  if (command == "encode") return cmd_encode(config);
  if (command == "eval-fid") return cmd_eval_fid(config);
  if (command == "eval-pr") return cmd_eval_pr(config);
  if (command == "manifold-plot") return cmd_manifold_plot(config);
  if (command == "downstream") return cmd_downstream(config);
  fail(ErrorCode::kInvalidArgument, "unknown command '" + command + "'");
}

}  // namespace vitdae
