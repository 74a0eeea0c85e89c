#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "llie/training.hpp"

namespace llie {

/// Everything a command needs: the training recipe plus paths.
///
/// File format is INI with sections [data], [train], [loss], [model] and
/// [ablation]. Precedence: built-in defaults < config file < command-line
/// overrides. Unknown sections or keys are errors.
struct RunConfig {
    TrainConfig train;
    std::filesystem::path train_dir;      // [data] train_dir
    std::filesystem::path reference_dir;  // [data] reference_dir
    std::filesystem::path eval_dir;       // [data] eval_dir
    uint64_t synth_seed = 0;              // [data] synth_seed
    std::filesystem::path run_dir = "run";  // [train] run_dir
    std::string niqe_params;              // [data] niqe_params, empty -> bundled
};

/// "section.key" / value pairs, e.g. {"train.learning_rate", "1e-3"}.
using Overrides = std::vector<std::pair<std::string, std::string>>;

/// Sets one field. Throws ConfigError naming the field on an unknown key or
/// a value that does not parse.
void set_field(RunConfig& cfg, const std::string& dotted_key, const std::string& value);

/// Reads `path` on top of `base`. Diagnostics carry the file name and line.
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});
void apply_overrides(RunConfig& cfg, const Overrides& overrides);

/// Serialises every field, so loading the result reproduces `cfg` exactly.
std::string to_ini(const RunConfig& cfg);

/// Parses "section.key=value".
std::pair<std::string, std::string> parse_override(const std::string& text);

}  // namespace llie
