#pragma once

// JSON run configuration (defaults, unknown-key rejection, dotted overrides) and the scenarios that
// drive every module and write their artifacts.

#include <json.hpp>
#include <string>

#include "lab/common.hpp"
#include "lab/simulator.hpp"

namespace lab {

inline constexpr const char* kSchemaVersion = "1";

// process exit codes, shared with the C API
enum ExitCode { kExitOk = 0, kExitNumerical = 1, kExitConfig = 2, kExitIo = 3 };
int exit_code(ErrorKind k);

nlohmann::json default_config();
// defaults filled in, unknown keys and type mismatches rejected with the field path (Config error),
// exponents checked unless allow_infeasible
nlohmann::json parse_config(const nlohmann::json& user);
// path like "simulate.bubbles[0].kappa"; value parsed as JSON, else taken as a string
void set_config_value(nlohmann::json& user, const std::string& path, const std::string& value);
// FNV-1a of the canonical dump
std::string config_hash(const nlohmann::json& cfg);

// the "simulate" section of a parsed config
SimConfig simulation_config(const nlohmann::json& cfg);
BlowupRunOptions blowup_options(const nlohmann::json& cfg);

// runs cfg["scenario"], writes files under cfg["out"] and returns the summary
nlohmann::json run_scenario(const nlohmann::json& cfg);

}  // namespace lab
