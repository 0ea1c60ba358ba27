#pragma once

// Internal helpers shared by the config/command translation units. Not
// installed; public headers stay free of the JSON dependency.

#include <initializer_list>
#include <string>

#include "deepvar/errors.hpp"
#include "deepvar/run_config.hpp"

#include <nlohmann/json.hpp>

namespace deepvar {

// Rejects keys outside the allowed set; configs must be fully understood.
void require_keys(const nlohmann::json& obj, std::initializer_list<const char*> allowed,
                  const std::string& context);

nlohmann::json load_json_file(const std::string& path);

RunConfig run_config_from_json(const nlohmann::json& j, const std::string& context);
nlohmann::json run_config_to_json(const RunConfig& config);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace deepvar
