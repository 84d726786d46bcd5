// Copyright 2026 The vitdae Authors
// SPDX-License-Identifier: Apache-2.0

// vitdae command-line front end. Every subcommand reads one JSON config file
// plus --set overrides and calls into the C API.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "vitdae/vitdae.h"

namespace {

constexpr int kUsageExit = 2;

struct Options {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  std::string run_dir;
  std::string seed;
  bool print_config = false;
};

const char* describe(const std::string& command) {
  if (command == "toygen") return "Generate the procedural toy dataset as class folders of PNGs";
  if (command == "train-stage1") return "Train the semantic encoder and conditional noise predictor";
  if (command == "train-stage2") return "Train latent denoisers over frozen semantic codes";
  if (command == "sample") return "Generate images from trained checkpoints";
  if (command == "reconstruct") return "Encode images to noise maps and decode them back";
  if (command == "encode") return "Write semantic codes of a dataset to a feature file";
  if (command == "eval-fid") return "Frechet distance between real and generated features";
  if (command == "eval-pr") return "Improved precision and recall";
  if (command == "manifold-plot") return "PCA manifold plot as SVG and CSV";
  if (command == "downstream") return "Downstream classification in real, synthetic and hybrid modes";
  return "";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

int report(vitdae_status status, const std::string& command) {
  std::cerr << "error: status=" << vitdae_status_name(status) << " command=" << command
            << " message=" << quote(vitdae_last_error()) << "\n";
  return static_cast<int>(status) + 2;
}

int run(const std::string& command, const Options& opt) {
  std::vector<std::string> keys, values;
  for (const auto& s : opt.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::cerr << "error: status=usage command=" << command
                << " message=" << quote("--set expects key=value, got '" + s + "'") << "\n";
      return kUsageExit;
    }
    keys.push_back(s.substr(0, eq));
    values.push_back(s.substr(eq + 1));
  }
  if (!opt.out.empty()) {
    keys.emplace_back("out");
    values.push_back(opt.out);
  }
  if (!opt.run_dir.empty()) {
    keys.emplace_back("run_dir");
    values.push_back(opt.run_dir);
  }
  if (!opt.seed.empty()) {
    keys.emplace_back("seed");
    values.push_back(opt.seed);
  }
  std::string file_text;
  if (!opt.config.empty()) {
    try {
      file_text = read_file(opt.config);
    } catch (const std::exception& e) {
      std::cerr << "error: status=io command=" << command << " message=" << quote(e.what()) << "\n";
      return static_cast<int>(VITDAE_ERR_IO) + 2;
    }
  }
  std::vector<const char*> kp, vp;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    kp.push_back(keys[i].c_str());
    vp.push_back(values[i].c_str());
  }
  char* effective = nullptr;
  vitdae_status st = vitdae_command_config(command.c_str(),
                                           opt.config.empty() ? nullptr : file_text.c_str(),
                                           kp.data(), vp.data(), keys.size(), &effective);
  if (st != VITDAE_OK) return report(st, command);
  if (opt.print_config) {
    std::cout << effective << "\n";
    vitdae_string_free(effective);
    return 0;
  }
  char* result = nullptr;
  st = vitdae_command_run(command.c_str(), effective, &result);
  vitdae_string_free(effective);
  if (st != VITDAE_OK) return report(st, command);
  std::cout << result << "\n";
  vitdae_string_free(result);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vitdae: semantic diffusion autoencoder toolkit"};
  app.set_version_flag("--version", std::string(vitdae_version()));
  app.require_subcommand(1, 1);
  app.footer(
      "Each subcommand merges its defaults, --config FILE and --set key=value overrides\n"
      "(dotted keys, e.g. --set unet.base_channels=16). Relative output paths resolve\n"
      "against $VITDAE_OUTPUT_ROOT when set.");

  Options opt;
  std::vector<std::pair<std::string, CLI::App*>> subs;
  for (std::size_t i = 0; i < vitdae_command_count(); ++i) {
    const std::string name = vitdae_command_name(i);
    CLI::App* sub = app.add_subcommand(name, describe(name));
    sub->add_option("-c,--config", opt.config, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("-s,--set", opt.sets, "Override, key=value (repeatable)");
    sub->add_option("-o,--out", opt.out, "Shortcut for --set out=PATH");
    if (name == "train-stage1" || name == "train-stage2" || name == "sample")
      sub->add_option("-r,--run-dir", opt.run_dir, "Shortcut for --set run_dir=PATH");
    if (name == "toygen" || name.starts_with("train") || name == "sample")
      sub->add_option("--seed", opt.seed, "Shortcut for --set seed=N");
    sub->add_flag("--print-config", opt.print_config, "Print the effective config and exit");
    subs.emplace_back(name, sub);
  }

  if (argc <= 1) {
    std::cerr << app.help();
    return kUsageExit;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageExit;
  }
  for (const auto& [name, sub] : subs)
    if (sub->parsed()) return run(name, opt);
  std::cerr << app.help();
  return kUsageExit;
}
