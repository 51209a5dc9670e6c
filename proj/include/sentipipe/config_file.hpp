#pragma once

#include "sentipipe/core.hpp"

namespace sentipipe {

// Flat "key = value" config file mirroring the PipelineConfig field names;
// '#' starts a comment. Relative lexicon/stopword paths resolve against the
// config file's directory. The result is validated.
PipelineConfig load_config_file(const std::string& path);

// Applies one key/value pair (also used for command-line overrides).
// Throws ConfigError for unknown keys or unparseable values.
void apply_config_override(PipelineConfig& config, std::string_view key,
                           std::string_view value);

std::vector<std::string> load_stopword_file(const std::string& path);

}  // namespace sentipipe
