#include "gridsched/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace gridsched {

std::string to_string(SchedulerPolicy p) {
    return p == SchedulerPolicy::subscribed_load ? "subscribed_load" : "spot_load";
}

std::string to_string(ExecutionModel m) {
    return m == ExecutionModel::fair_share ? "fair_share" : "edf";
}

SchedulerPolicy policy_from_string(const std::string& s) {
    if (s == "subscribed_load") return SchedulerPolicy::subscribed_load;
    if (s == "spot_load") return SchedulerPolicy::spot_load;
    throw ConfigError("unknown policy '" + s + "' (expected subscribed_load|spot_load)");
}

ExecutionModel execution_model_from_string(const std::string& s) {
    if (s == "fair_share") return ExecutionModel::fair_share;
    if (s == "edf") return ExecutionModel::edf;
    throw ConfigError("unknown execution model '" + s + "' (expected fair_share|edf)");
}

double unit_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double Distribution::sample(std::mt19937_64& rng) const {
    switch (kind) {
        case Kind::constant:
            return a;
        case Kind::uniform:
            return a + unit_uniform(rng) * (b - a);
        case Kind::lognormal: {
            const double u1 = 1.0 - unit_uniform(rng);  // (0,1]
            const double u2 = unit_uniform(rng);
            const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
            return std::exp(std::log(a) + b * z);
        }
    }
    return a;
}

namespace {

using nlohmann::json;

const json& require(const json& obj, const std::string& key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ConfigError("missing '" + key + "' in " + where);
    return *it;
}

double require_positive(const json& obj, const std::string& key, const std::string& where) {
    const json& v = require(obj, key, where);
    if (!v.is_number() || !(v.get<double>() > 0.0))
        throw ConfigError("'" + key + "' in " + where + " must be a positive number");
    return v.get<double>();
}

std::string require_string(const json& obj, const std::string& key, const std::string& where) {
    const json& v = require(obj, key, where);
    if (!v.is_string() || v.get<std::string>().empty())
        throw ConfigError("'" + key + "' in " + where + " must be a non-empty string");
    return v.get<std::string>();
}

std::set<std::string> optional_string_set(const json& obj, const std::string& key,
                                          const std::string& where) {
    std::set<std::string> out;
    auto it = obj.find(key);
    if (it == obj.end()) return out;
    if (!it->is_array()) throw ConfigError("'" + key + "' in " + where + " must be an array");
    for (const auto& v : *it) {
        if (!v.is_string()) throw ConfigError("'" + key + "' entries in " + where + " must be strings");
        if (!out.insert(v.get<std::string>()).second)
            throw ConfigError("duplicate entry in '" + key + "' in " + where);
    }
    return out;
}

Distribution parse_distribution(const json& obj, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be an object");
    const std::string kind = require_string(obj, "dist", where);
    Distribution d;
    if (kind == "constant") {
        d.kind = Distribution::Kind::constant;
        d.a = require_positive(obj, "value", where);
    } else if (kind == "uniform") {
        d.kind = Distribution::Kind::uniform;
        d.a = require_positive(obj, "lo", where);
        d.b = require_positive(obj, "hi", where);
        if (d.b < d.a) throw ConfigError("'hi' < 'lo' in " + where);
    } else if (kind == "lognormal") {
        d.kind = Distribution::Kind::lognormal;
        d.a = require_positive(obj, "median", where);
        const json& sigma = require(obj, "sigma", where);
        if (!sigma.is_number() || sigma.get<double>() < 0.0)
            throw ConfigError("'sigma' in " + where + " must be non-negative");
        d.b = sigma.get<double>();
    } else {
        throw ConfigError("unknown dist '" + kind + "' in " + where +
                          " (expected constant|uniform|lognormal)");
    }
    return d;
}

NonVolatileRequirements parse_requirements_json(const json& obj, const std::string& where) {
    NonVolatileRequirements req;
    if (obj.contains("os")) req.os = require_string(obj, "os", where);
    if (obj.contains("arch")) req.arch = require_string(obj, "arch", where);
    if (obj.contains("min_memory_mb")) {
        const json& v = obj.at("min_memory_mb");
        if (!v.is_number_integer() || v.get<int64_t>() < 0)
            throw ConfigError("'min_memory_mb' in " + where + " must be a non-negative integer");
        req.min_memory_mb = v.get<int>();
    }
    req.required_libraries = optional_string_set(obj, "libraries", where);
    req.required_hardware = optional_string_set(obj, "hardware", where);
    return req;
}

ComputerProfile parse_node(const json& obj) {
    const std::string id = require_string(obj, "node_id", "node");
    const std::string where = "node '" + id + "'";
    ComputerProfile p;
    p.node_id = id;
    p.nonvolatile.os = require_string(obj, "os", where);
    if (obj.contains("arch")) p.nonvolatile.arch = require_string(obj, "arch", where);
    const json& mem = require(obj, "memory_mb", where);
    if (!mem.is_number_integer() || mem.get<int64_t>() <= 0)
        throw ConfigError("'memory_mb' in " + where + " must be a positive integer");
    p.nonvolatile.memory_mb = mem.get<int>();
    p.nonvolatile.capacity_marks_per_s = require_positive(obj, "capacity_marks_per_s", where);
    p.nonvolatile.libraries = optional_string_set(obj, "libraries", where);
    p.nonvolatile.hardware_features = optional_string_set(obj, "hardware", where);
    p.volatile_sample.free_memory_mb = p.nonvolatile.memory_mb;
    return p;
}

AppSpec parse_app(const json& obj) {
    AppSpec app;
    app.name = require_string(obj, "name", "app");
    app.version = require_string(obj, "version", "app");
    const std::string where = "app '" + app.key() + "'";
    if (obj.contains("ipc_level")) {
        try {
            app.ipc_level = ipc_level_from_string(obj.at("ipc_level").get<std::string>());
        } catch (const SchemaViolation& e) {
            throw ConfigError(std::string(e.what()) + " in " + where);
        }
    }
    if (obj.contains("weight")) {
        const json& w = obj.at("weight");
        if (!w.is_number() || !(w.get<double>() > 0.0))
            throw ConfigError("'weight' in " + where + " must be positive");
        app.weight = w.get<double>();
    }
    app.declared_demand_marks = require_positive(obj, "declared_demand_marks", where);
    app.true_demand = parse_distribution(require(obj, "true_demand", where), where + " true_demand");
    if (obj.contains("window"))
        app.window = parse_distribution(obj.at("window"), where + " window");
    if (obj.contains("requirements"))
        app.requirements = parse_requirements_json(obj.at("requirements"), where);
    return app;
}

void apply_config_key(SimConfig& cfg, const std::string& key, const json& value) {
    auto as_positive = [&](const char* what) {
        if (!value.is_number() || !(value.get<double>() > 0.0))
            throw ConfigError(std::string("'") + key + "' must be a positive number (" + what + ")");
        return value.get<double>();
    };
    auto as_fraction = [&] {
        if (!value.is_number() || value.get<double>() < 0.0 || value.get<double>() > 1.0)
            throw ConfigError("'" + key + "' must be within [0,1]");
        return value.get<double>();
    };
    auto as_count = [&] {
        if (!value.is_number_integer() || value.get<int64_t>() < 0)
            throw ConfigError("'" + key + "' must be a non-negative integer");
        return value.get<int>();
    };

    if (key == "demand.quantile") {
        const double q = value.is_number() ? value.get<double>() : -1.0;
        if (!(q > 0.0) || q > 1.0) throw ConfigError("'demand.quantile' must be in (0,1]");
        cfg.demand.quantile = q;
    } else if (key == "demand.safety_factor") {
        cfg.demand.safety_factor = as_positive("safety factor");
    } else if (key == "demand.cold_start_confidence") {
        cfg.demand.cold_start_confidence = as_fraction();
    } else if (key == "sord.ttl_max") {
        cfg.sord.ttl_max = as_count();
    } else if (key == "sord.query_ttl") {
        cfg.query_ttl = as_count();
    } else if (key == "sord.collect_timeout_s") {
        cfg.sord.collect_timeout_s = as_positive("timeout");
    } else if (key == "sord.hop_latency_s") {
        if (!value.is_number() || value.get<double>() < 0.0)
            throw ConfigError("'sord.hop_latency_s' must be non-negative");
        cfg.sord.hop_latency_s = value.get<double>();
    } else if (key == "sord.min_confidence") {
        cfg.sord.min_confidence = as_fraction();
    } else if (key == "monitor.beacon_period_s") {
        cfg.monitor.beacon_period_s = as_positive("period");
    } else if (key == "monitor.integrity_factor") {
        cfg.monitor.integrity_factor = as_positive("factor");
    } else if (key == "sim.sample_period_s") {
        cfg.sample_period_s = as_positive("period");
    } else {
        throw ConfigError("unknown config key '" + key + "'");
    }
}

}  // namespace

Scenario parse_scenario(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ConfigError("scenario must be a JSON object");
    Scenario sc;

    const json& seed = require(doc, "seed", "scenario");
    if (!seed.is_number_integer() || seed.get<int64_t>() < 0)
        throw ConfigError("'seed' must be a non-negative integer");
    sc.seed = seed.get<uint64_t>();
    sc.duration_s = require_positive(doc, "duration_s", "scenario");

    if (doc.contains("policy")) sc.policy = policy_from_string(doc.at("policy").get<std::string>());
    if (doc.contains("execution_model"))
        sc.execution_model = execution_model_from_string(doc.at("execution_model").get<std::string>());

    if (doc.contains("overlay")) {
        const json& ov = doc.at("overlay");
        if (ov.contains("k_close")) sc.overlay.k_close = ov.at("k_close").get<int>();
        if (ov.contains("k_far")) sc.overlay.k_far = ov.at("k_far").get<int>();
    }

    const json& nodes = require(doc, "nodes", "scenario");
    if (!nodes.is_array() || nodes.empty()) throw ConfigError("'nodes' must be a non-empty array");
    std::set<std::string> node_ids;
    for (const auto& n : nodes) {
        ComputerProfile p = parse_node(n);
        if (!node_ids.insert(p.node_id).second)
            throw ConfigError("duplicate node_id '" + p.node_id + "'");
        sc.nodes.push_back(std::move(p));
    }

    const json& workload = require(doc, "workload", "scenario");
    const json& apps = require(workload, "apps", "workload");
    if (!apps.is_array() || apps.empty()) throw ConfigError("'apps' must be a non-empty array");
    std::set<std::string> app_keys;
    for (const auto& a : apps) {
        AppSpec app = parse_app(a);
        if (!app_keys.insert(app.key()).second)
            throw ConfigError("duplicate app '" + app.key() + "'");
        sc.workload.apps.push_back(std::move(app));
    }

    const json& arrival = require(workload, "arrival", "workload");
    const std::string process = require_string(arrival, "process", "arrival");
    if (process == "poisson") {
        sc.workload.arrival.process = ArrivalSpec::Process::poisson;
        sc.workload.arrival.rate_per_s = require_positive(arrival, "rate_per_s", "arrival");
        for (const auto& app : sc.workload.apps)
            if (!app.window)
                throw ConfigError("app '" + app.key() + "' needs a 'window' distribution under a "
                                  "poisson arrival process");
    } else if (process == "trace") {
        sc.workload.arrival.process = ArrivalSpec::Process::trace;
        const json& arrivals = require(arrival, "arrivals", "arrival");
        if (!arrivals.is_array()) throw ConfigError("'arrivals' must be an array");
        double last = 0.0;
        for (const auto& entry : arrivals) {
            TraceArrival t;
            const json& time = require(entry, "time", "trace arrival");
            if (!time.is_number() || time.get<double>() < 0.0)
                throw ConfigError("trace arrival 'time' must be non-negative");
            t.time = time.get<double>();
            if (t.time < last) throw ConfigError("trace arrivals must be ordered by time");
            last = t.time;
            t.app = require_string(entry, "app", "trace arrival");
            if (!app_keys.count(t.app)) throw ConfigError("trace arrival references unknown app '" + t.app + "'");
            if (entry.contains("window_s")) {
                const json& w = entry.at("window_s");
                if (!w.is_number() || !(w.get<double>() > 0.0))
                    throw ConfigError("trace arrival 'window_s' must be positive");
                t.window_s = w.get<double>();
            } else {
                auto it = std::find_if(sc.workload.apps.begin(), sc.workload.apps.end(),
                                       [&](const AppSpec& a) { return a.key() == t.app; });
                if (!it->window)
                    throw ConfigError("trace arrival for '" + t.app +
                                      "' has no window_s and the app has no window distribution");
            }
            if (entry.contains("origin")) {
                const std::string origin = entry.at("origin").get<std::string>();
                if (!node_ids.count(origin))
                    throw ConfigError("trace arrival references unknown origin '" + origin + "'");
                t.origin = origin;
            }
            sc.workload.arrival.arrivals.push_back(std::move(t));
        }
    } else {
        throw ConfigError("unknown arrival process '" + process + "' (expected poisson|trace)");
    }

    if (doc.contains("config")) {
        const json& cfg = doc.at("config");
        if (!cfg.is_object()) throw ConfigError("'config' must be an object");
        for (const auto& [key, value] : cfg.items()) apply_config_key(sc.config, key, value);
    }
    if (sc.config.query_ttl > sc.config.sord.ttl_max)
        throw ConfigError("'sord.query_ttl' exceeds 'sord.ttl_max'");

    return sc;
}

Scenario load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("scenario JSON parse failure in " + path + ": " + e.what());
    }
    return parse_scenario(doc);
}

}  // namespace gridsched
