#pragma once

#include <string>

#include "qdscope/config.hpp"

namespace qdscope {

std::string artifact_version();

// The four pipeline stages behind the CLI. All of them throw on failure:
// config_error (usage), error subclasses (computation), io_error (files).
// out_dir overrides cfg.run.out_dir when nonempty.

void cmd_simulate(const RunConfig& cfg, const std::string& out_dir, bool quiet = true);
void cmd_fit(const RunConfig& cfg, const std::string& out_dir, bool force = false);
void cmd_reconstruct(const RunConfig& cfg, const std::string& out_dir,
                     bool force = false);
void cmd_report(const RunConfig& cfg, const std::string& out_dir);

} // namespace qdscope
