#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "svs/trainer.hpp"

// Flat dotted-key configuration: one `key = value` per line, '#' comments.
// Lists are comma separated; the ramp is `start:len,...`.
namespace svs::cfg {

using KeyValues = std::map<std::string, std::string>;

struct KeyDoc {
    std::string key;
    std::string description;
};

// Every accepted key with a one-line description, in documentation order.
const std::vector<KeyDoc>& schema();

KeyValues parse_text(std::string_view text, const std::string& origin);
KeyValues read_file(const std::filesystem::path& path);
// Sorted `key = value` lines.
std::string to_text(const KeyValues& values);

KeyValues to_key_values(const train::TrainConfig& config);
// Applies the values on top of `base`; unknown keys and malformed values are
// ConfigErrors. The result is validated.
train::TrainConfig from_key_values(const KeyValues& values, const train::TrainConfig& base = {});

// file < SVS_SEED (env_seed) < overrides. Returns the merged explicit values.
KeyValues merge(const std::optional<std::filesystem::path>& file, const char* env_seed, const KeyValues& overrides);

}  // namespace svs::cfg
