#pragma once

#include "gridsched/demand.hpp"
#include "gridsched/monitor.hpp"
#include "gridsched/profiles.hpp"
#include "gridsched/sord.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace gridsched {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error("config error: " + what) {}
};

enum class SchedulerPolicy { subscribed_load, spot_load };
enum class ExecutionModel { fair_share, edf };

std::string to_string(SchedulerPolicy p);
std::string to_string(ExecutionModel m);
SchedulerPolicy policy_from_string(const std::string& s);        // throws ConfigError
ExecutionModel execution_model_from_string(const std::string& s);  // throws ConfigError

// Uniform in [0,1) from the scenario generator. Hand-rolled so sequences are
// stable across standard-library versions.
double unit_uniform(std::mt19937_64& rng);

struct Distribution {
    enum class Kind { constant, uniform, lognormal };
    Kind kind = Kind::constant;
    double a = 0.0;  // constant: value; uniform: lo; lognormal: median
    double b = 0.0;  // uniform: hi; lognormal: sigma of the log

    double sample(std::mt19937_64& rng) const;
};

struct AppSpec {
    std::string name;
    std::string version;
    IpcLevel ipc_level = IpcLevel::none;
    NonVolatileRequirements requirements;
    double declared_demand_marks = 0.0;
    double weight = 1.0;
    Distribution true_demand;                // hidden from the scheduler
    std::optional<Distribution> window;      // requested turnaround
    std::string key() const { return name + "/" + version; }
};

struct TraceArrival {
    double time = 0.0;
    std::string app;  // "name/version"
    std::optional<double> window_s;
    std::optional<std::string> origin;
};

struct ArrivalSpec {
    enum class Process { poisson, trace };
    Process process = Process::poisson;
    double rate_per_s = 0.0;
    std::vector<TraceArrival> arrivals;
};

struct Workload {
    ArrivalSpec arrival;
    std::vector<AppSpec> apps;
};

struct OverlayParams {
    int k_close = 2;
    int k_far = 1;
};

struct SimConfig {
    DemandConfig demand;
    SordConfig sord;
    MonitorConfig monitor;
    double sample_period_s = 5.0;
    int query_ttl = -1;  // -1 means "use sord.ttl_max"

    int effective_query_ttl() const { return query_ttl < 0 ? sord.ttl_max : query_ttl; }
};

// Fully determines a run given the seed.
struct Scenario {
    uint64_t seed = 0;
    double duration_s = 0.0;
    SchedulerPolicy policy = SchedulerPolicy::subscribed_load;
    ExecutionModel execution_model = ExecutionModel::fair_share;
    OverlayParams overlay;
    std::vector<ComputerProfile> nodes;
    Workload workload;
    SimConfig config;
};

Scenario parse_scenario(const nlohmann::json& doc);       // throws ConfigError
Scenario load_scenario_file(const std::string& path);     // throws ConfigError

}  // namespace gridsched
