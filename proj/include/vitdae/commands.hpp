// Copyright 2026 The vitdae Authors
// SPDX-License-Identifier: Apache-2.0

// Command-level entry points shared by the C API and the CLI. Each command
// takes one flat JSON config (merged over its defaults) and returns a JSON
// summary.

#pragma once

#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace vitdae {

// toygen, train-stage1, train-stage2, sample, reconstruct, encode, eval-fid,
// eval-pr, manifold-plot, downstream.
const std::vector<std::string>& command_names();

// Defaults for a command; throws for unknown names.
nlohmann::json command_defaults(const std::string& command);

// defaults <- file config <- overrides. Override keys are dotted paths
// ("unet.base_channels"); values are parsed as JSON when possible and kept
// as strings otherwise. Unknown keys are rejected.
nlohmann::json effective_config(const std::string& command, const nlohmann::json& file_config,
                                const std::vector<std::pair<std::string, std::string>>& overrides);

// Runs a command on an already effective config.
nlohmann::json run_command(const std::string& command, const nlohmann::json& config);

// Relative output paths resolve against $VITDAE_OUTPUT_ROOT when it is set.
std::string output_path(const std::string& path);

}  // namespace vitdae
