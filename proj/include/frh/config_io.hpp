#pragma once

// Plain-text training configuration: "key = value" lines under [trainer],
// [backbone] and [head] section headers, one key per TrainConfig field.

#include <string>

#include "frh/trainer.hpp"

namespace frh {

std::string config_to_string(const TrainConfig& cfg);
void write_config(const std::string& path, const TrainConfig& cfg);

// Parses onto a default-constructed config (absent keys keep defaults).
// Unknown sections/keys and malformed lines are errors naming the line.
TrainConfig parse_config(const std::string& text);
TrainConfig read_config(const std::string& path);

}  // namespace frh
