#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "cibhash/trainer.hpp"

namespace cibhash::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kDataError = 3, kCheckFailure = 4 };

/// Runs one command line (args[0] is the program name). The JSON report goes
/// to `out` (and to --report when given); diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

inline constexpr int kReportSchema = 1;

/// Flat JSON config mirroring TrainConfig. Unknown keys and wrong types throw
/// ErrorCode::invalid_argument.
TrainConfig config_from_json(const nlohmann::json& j, TrainConfig base = {});
nlohmann::json config_to_json(const TrainConfig& cfg);

/// Stable hex digest of the command name and its config echo.
std::string run_id(const std::string& command, const nlohmann::json& config);

/// Report skeleton shared by every command.
nlohmann::json make_report(const std::string& command, const nlohmann::json& config);

/// Structural check against the published report schema. Returns the list of
/// violations; empty means valid.
std::vector<std::string> validate_report(const nlohmann::json& report);

}  // namespace cibhash::cli
