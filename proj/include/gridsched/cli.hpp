#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace gridsched::cli {

// Exit codes are a stable contract: 0 success, 1 validation/report error,
// 2 config error.
constexpr int kExitOk = 0;
constexpr int kExitBadInput = 1;
constexpr int kExitConfig = 2;

struct BadReport : std::runtime_error {
    BadReport(const std::string& path, const std::string& field)
        : std::runtime_error("bad report " + path + ": missing field '" + field + "'"),
          field_(field) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

// Parses each profile file (computer or application, detected from the root
// element), printing one OK/ERROR line per file.
int cmd_validate(const std::vector<std::string>& paths, std::ostream& out, std::ostream& err);

struct SimulateOptions {
    std::string scenario_path;
    std::optional<uint64_t> seed;
    std::optional<std::string> policy;
    std::optional<std::string> execution_model;
    std::string out_path = "report.json";
    std::optional<std::string> traces_path;
    std::optional<std::string> csv_path;
    bool quiet = false;
};

int cmd_simulate(const SimulateOptions& options, std::ostream& out, std::ostream& err);

// Prints the metrics of one or more run reports side by side.
int cmd_report(const std::vector<std::string>& paths, const std::optional<std::string>& csv_out,
               std::ostream& out, std::ostream& err);

// Writes via a temp file in the same directory and renames into place.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace gridsched::cli
