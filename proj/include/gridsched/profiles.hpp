#pragma once

#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridsched {

// XML document cannot be parsed at all.
struct MalformedXml : std::runtime_error {
    explicit MalformedXml(const std::string& what) : std::runtime_error("malformed xml: " + what) {}
};

// Document parsed but a required element is missing or holds an out-of-range
// value. `element()` names the offending element.
struct SchemaViolation : std::runtime_error {
    SchemaViolation(const std::string& element, const std::string& detail)
        : std::runtime_error("schema violation at <" + element + ">: " + detail), element_(element) {}
    const std::string& element() const { return element_; }

private:
    std::string element_;
};

struct EmptyField : std::invalid_argument {
    explicit EmptyField(const std::string& field)
        : std::invalid_argument("empty field: " + field) {}
};

struct StaleSample : std::runtime_error {
    StaleSample(double have, double got)
        : std::runtime_error("volatile sample timestamp regressed: " + std::to_string(got) +
                             " < " + std::to_string(have)) {}
};

enum class IpcLevel { none, light, heavy };

std::string to_string(IpcLevel level);
IpcLevel ipc_level_from_string(const std::string& s);  // throws SchemaViolation("ipcLevel")

// Slowly changing facts about a node, used for requirement filtering.
struct NonVolatileFacts {
    std::string os;
    std::string arch;
    int memory_mb = 0;
    double capacity_marks_per_s = 0.0;  // computational output, marks per second
    std::set<std::string> libraries;
    std::set<std::string> hardware_features;

    friend bool operator==(const NonVolatileFacts&, const NonVolatileFacts&) = default;
};

// Periodically re-sampled node state.
struct VolatileSample {
    double timestamp = 0.0;  // simulation seconds
    double cpu_busy_fraction = 0.0;
    int free_memory_mb = 0;
    double subscribed_marks = 0.0;  // total marks committed in the node's ledger

    friend bool operator==(const VolatileSample&, const VolatileSample&) = default;
};

struct ComputerProfile {
    std::string node_id;
    NonVolatileFacts nonvolatile;
    VolatileSample volatile_sample;  // most recent

    friend bool operator==(const ComputerProfile&, const ComputerProfile&) = default;
};

// Requirements an application places on non-volatile node facts.
// Absent os/arch means "any".
struct NonVolatileRequirements {
    std::optional<std::string> os;
    std::optional<std::string> arch;
    int min_memory_mb = 0;
    std::set<std::string> required_libraries;
    std::set<std::string> required_hardware;

    friend bool operator==(const NonVolatileRequirements&, const NonVolatileRequirements&) = default;
};

// One completed execution, fed back into the application profile.
struct RunRecord {
    double demand_marks = 0.0;  // marks actually consumed
    double wall_time_s = 0.0;
    std::string node_id;
    double timestamp = 0.0;

    friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

struct ApplicationProfile {
    std::string app_id;  // hex digest, see compute_app_id()
    IpcLevel ipc_level = IpcLevel::none;
    NonVolatileRequirements requirements;
    double declared_demand_marks = 0.0;  // user / first-run estimate
    std::vector<RunRecord> history;      // ordered by record timestamp

    friend bool operator==(const ApplicationProfile&, const ApplicationProfile&) = default;
};

// Parsers accept any well-formed document matching the schema in
// docs/formats.md. Unknown elements are skipped; if `warnings` is non-null a
// human-readable note per skipped element is appended.
ComputerProfile parse_computer_profile(const std::string& xml_text,
                                       std::vector<std::string>* warnings = nullptr);
ApplicationProfile parse_application_profile(const std::string& xml_text,
                                             std::vector<std::string>* warnings = nullptr);

// Canonical form: fixed element order, two-space indent, reals with six
// fractional digits, set elements sorted. Byte-identical across calls.
std::string serialize_computer_profile(const ComputerProfile& p);
std::string serialize_application_profile(const ApplicationProfile& p);

// Stable hex digest of "name\nversion"; same inputs give the same id.
std::string compute_app_id(const std::string& name, const std::string& version);

// Replaces the volatile sample. The timestamp may not regress.
ComputerProfile update_volatile(const ComputerProfile& p, const VolatileSample& s);

}  // namespace gridsched
