#pragma once

// Versioned JSON tensor dumps shared by the SAITS and RAE models:
// {"format": "spem-checkpoint", "version": 1, "kind": "saits"|"rae",
//  "config": {...}, "tensors": {name: {"shape": [r, c], "data": [...]}}}

#include <filesystem>
#include <string>

#include "spem/rae.hpp"
#include "spem/saits.hpp"

namespace spem {

std::string saits_config_to_json(const SaitsConfig& c);
SaitsConfig saits_config_from_json(const std::string& text);
std::string rae_config_to_json(const RaeConfig& c);
RaeConfig rae_config_from_json(const std::string& text);

std::string checkpoint_kind(const std::filesystem::path& file);

void save_checkpoint(const std::filesystem::path& file, const SaitsModel& m);
void save_checkpoint(const std::filesystem::path& file, const RaeModel& m);
SaitsModel load_saits(const std::filesystem::path& file);
RaeModel load_rae(const std::filesystem::path& file);

}  // namespace spem
