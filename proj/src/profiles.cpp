#include "gridsched/profiles.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <cctype>
#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace gridsched {

namespace {

using boost::property_tree::ptree;

ptree read_tree(const std::string& xml_text) {
    std::istringstream in(xml_text);
    ptree pt;
    try {
        boost::property_tree::read_xml(
            in, pt,
            boost::property_tree::xml_parser::trim_whitespace |
                boost::property_tree::xml_parser::no_comments);
    } catch (const boost::property_tree::xml_parser_error& e) {
        throw MalformedXml(e.message());
    }
    return pt;
}

void warn(std::vector<std::string>* warnings, const std::string& msg) {
    if (warnings) warnings->push_back(msg);
}

double to_real(const std::string& element, const std::string& text) {
    if (text.empty()) throw SchemaViolation(element, "empty value");
    char* end = nullptr;
    errno = 0;
    double v = std::strtod(text.c_str(), &end);
    if (errno != 0 || end != text.c_str() + text.size() || !std::isfinite(v))
        throw SchemaViolation(element, "not a finite number: '" + text + "'");
    return v;
}

int to_int(const std::string& element, const std::string& text) {
    if (text.empty()) throw SchemaViolation(element, "empty value");
    char* end = nullptr;
    errno = 0;
    long long v = std::strtoll(text.c_str(), &end, 10);
    if (errno != 0 || end != text.c_str() + text.size())
        throw SchemaViolation(element, "not an integer: '" + text + "'");
    if (v < INT32_MIN || v > INT32_MAX) throw SchemaViolation(element, "out of range: '" + text + "'");
    return static_cast<int>(v);
}

// Collects <item> children of a container element into a duplicate-free set.
std::set<std::string> to_string_set(const ptree& container, const std::string& container_name,
                                    const std::string& item_name,
                                    std::vector<std::string>* warnings) {
    std::set<std::string> out;
    for (const auto& [key, child] : container) {
        if (key == "<xmlattr>") {
            warn(warnings, "attributes on <" + container_name + "> ignored");
            continue;
        }
        if (key != item_name) {
            warn(warnings, "unknown element <" + key + "> inside <" + container_name + "> ignored");
            continue;
        }
        const std::string value = child.get_value<std::string>();
        if (value.empty()) throw SchemaViolation(container_name, "empty <" + item_name + ">");
        if (!out.insert(value).second)
            throw SchemaViolation(container_name, "duplicate <" + item_name + "> '" + value + "'");
    }
    return out;
}

bool is_lower_hex(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!(std::isdigit(static_cast<unsigned char>(c)) || (c >= 'a' && c <= 'f'))) return false;
    return true;
}

NonVolatileFacts parse_nonvolatile(const ptree& node, std::vector<std::string>* warnings) {
    NonVolatileFacts facts;
    bool saw_memory = false, saw_capacity = false;
    for (const auto& [key, child] : node) {
        if (key == "os") {
            facts.os = child.get_value<std::string>();
        } else if (key == "arch") {
            facts.arch = child.get_value<std::string>();
        } else if (key == "memoryMB") {
            facts.memory_mb = to_int("memoryMB", child.get_value<std::string>());
            saw_memory = true;
        } else if (key == "capacityMarksPerS") {
            facts.capacity_marks_per_s = to_real("capacityMarksPerS", child.get_value<std::string>());
            saw_capacity = true;
        } else if (key == "libraries") {
            facts.libraries = to_string_set(child, "libraries", "lib", warnings);
        } else if (key == "hardware") {
            facts.hardware_features = to_string_set(child, "hardware", "feature", warnings);
        } else if (key == "<xmlattr>") {
            warn(warnings, "attributes on <nonVolatile> ignored");
        } else {
            warn(warnings, "unknown element <" + key + "> inside <nonVolatile> ignored");
        }
    }
    if (!saw_memory) throw SchemaViolation("memoryMB", "missing required element");
    if (!saw_capacity) throw SchemaViolation("capacityMarksPerS", "missing required element");
    if (facts.memory_mb <= 0) throw SchemaViolation("memoryMB", "must be positive");
    if (facts.capacity_marks_per_s <= 0.0)
        throw SchemaViolation("capacityMarksPerS", "must be positive");
    return facts;
}

VolatileSample parse_volatile(const ptree& node, std::vector<std::string>* warnings) {
    VolatileSample s;
    for (const auto& [key, child] : node) {
        if (key == "timestamp") {
            s.timestamp = to_real("timestamp", child.get_value<std::string>());
        } else if (key == "cpuBusyFraction") {
            s.cpu_busy_fraction = to_real("cpuBusyFraction", child.get_value<std::string>());
        } else if (key == "freeMemoryMB") {
            s.free_memory_mb = to_int("freeMemoryMB", child.get_value<std::string>());
        } else if (key == "subscribedMarks") {
            s.subscribed_marks = to_real("subscribedMarks", child.get_value<std::string>());
        } else if (key == "<xmlattr>") {
            warn(warnings, "attributes on <volatile> ignored");
        } else {
            warn(warnings, "unknown element <" + key + "> inside <volatile> ignored");
        }
    }
    if (s.timestamp < 0.0) throw SchemaViolation("timestamp", "must be non-negative");
    if (s.cpu_busy_fraction < 0.0 || s.cpu_busy_fraction > 1.0)
        throw SchemaViolation("cpuBusyFraction", "must be within [0,1]");
    if (s.free_memory_mb < 0) throw SchemaViolation("freeMemoryMB", "must be non-negative");
    if (s.subscribed_marks < 0.0) throw SchemaViolation("subscribedMarks", "must be non-negative");
    return s;
}

NonVolatileRequirements parse_requirements(const ptree& node, std::vector<std::string>* warnings) {
    NonVolatileRequirements req;
    for (const auto& [key, child] : node) {
        if (key == "os") {
            const std::string v = child.get_value<std::string>();
            if (v.empty()) throw SchemaViolation("os", "empty requirement value");
            req.os = v;
        } else if (key == "arch") {
            const std::string v = child.get_value<std::string>();
            if (v.empty()) throw SchemaViolation("arch", "empty requirement value");
            req.arch = v;
        } else if (key == "minMemoryMB") {
            req.min_memory_mb = to_int("minMemoryMB", child.get_value<std::string>());
        } else if (key == "libraries") {
            req.required_libraries = to_string_set(child, "libraries", "lib", warnings);
        } else if (key == "hardware") {
            req.required_hardware = to_string_set(child, "hardware", "feature", warnings);
        } else if (key == "<xmlattr>") {
            warn(warnings, "attributes on <requirements> ignored");
        } else {
            warn(warnings, "unknown element <" + key + "> inside <requirements> ignored");
        }
    }
    if (req.min_memory_mb < 0) throw SchemaViolation("minMemoryMB", "must be non-negative");
    return req;
}

RunRecord parse_run(const ptree& node, std::vector<std::string>* warnings) {
    RunRecord rec;
    bool saw_demand = false, saw_wall = false;
    for (const auto& [key, child] : node) {
        if (key == "demandMarks") {
            rec.demand_marks = to_real("demandMarks", child.get_value<std::string>());
            saw_demand = true;
        } else if (key == "wallTimeS") {
            rec.wall_time_s = to_real("wallTimeS", child.get_value<std::string>());
            saw_wall = true;
        } else if (key == "nodeId") {
            rec.node_id = child.get_value<std::string>();
        } else if (key == "timestamp") {
            rec.timestamp = to_real("timestamp", child.get_value<std::string>());
        } else if (key == "<xmlattr>") {
            warn(warnings, "attributes on <run> ignored");
        } else {
            warn(warnings, "unknown element <" + key + "> inside <run> ignored");
        }
    }
    if (!saw_demand) throw SchemaViolation("demandMarks", "missing required element");
    if (!saw_wall) throw SchemaViolation("wallTimeS", "missing required element");
    if (rec.demand_marks <= 0.0) throw SchemaViolation("demandMarks", "must be positive");
    if (rec.wall_time_s <= 0.0) throw SchemaViolation("wallTimeS", "must be positive");
    return rec;
}

std::string fmt_real(double v) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

void emit_leaf(std::string& out, int depth, const std::string& tag, const std::string& text) {
    out.append(static_cast<size_t>(depth) * 2, ' ');
    if (text.empty()) {
        out += "<" + tag + "/>\n";
    } else {
        out += "<" + tag + ">" + xml_escape(text) + "</" + tag + ">\n";
    }
}

void emit_set(std::string& out, int depth, const std::string& tag, const std::string& item_tag,
              const std::set<std::string>& values) {
    out.append(static_cast<size_t>(depth) * 2, ' ');
    if (values.empty()) {
        out += "<" + tag + "/>\n";
        return;
    }
    out += "<" + tag + ">\n";
    for (const auto& v : values) emit_leaf(out, depth + 1, item_tag, v);
    out.append(static_cast<size_t>(depth) * 2, ' ');
    out += "</" + tag + ">\n";
}

}  // namespace

std::string to_string(IpcLevel level) {
    switch (level) {
        case IpcLevel::none: return "none";
        case IpcLevel::light: return "light";
        case IpcLevel::heavy: return "heavy";
    }
    return "none";
}

IpcLevel ipc_level_from_string(const std::string& s) {
    if (s == "none") return IpcLevel::none;
    if (s == "light") return IpcLevel::light;
    if (s == "heavy") return IpcLevel::heavy;
    throw SchemaViolation("ipcLevel", "expected none|light|heavy, got '" + s + "'");
}

ComputerProfile parse_computer_profile(const std::string& xml_text,
                                       std::vector<std::string>* warnings) {
    const ptree pt = read_tree(xml_text);
    auto root = pt.get_child_optional("computerProfile");
    if (!root) throw SchemaViolation("computerProfile", "missing root element");

    ComputerProfile p;
    bool saw_nonvolatile = false;
    for (const auto& [key, child] : *root) {
        if (key == "nodeId") {
            p.node_id = child.get_value<std::string>();
        } else if (key == "nonVolatile") {
            p.nonvolatile = parse_nonvolatile(child, warnings);
            saw_nonvolatile = true;
        } else if (key == "volatile") {
            p.volatile_sample = parse_volatile(child, warnings);
        } else if (key == "<xmlattr>") {
            warn(warnings, "attributes on <computerProfile> ignored");
        } else {
            warn(warnings, "unknown element <" + key + "> inside <computerProfile> ignored");
        }
    }
    if (p.node_id.empty()) throw SchemaViolation("nodeId", "missing or empty");
    if (!saw_nonvolatile) throw SchemaViolation("nonVolatile", "missing required element");
    if (p.volatile_sample.free_memory_mb > p.nonvolatile.memory_mb)
        throw SchemaViolation("freeMemoryMB", "exceeds memoryMB");
    return p;
}

ApplicationProfile parse_application_profile(const std::string& xml_text,
                                             std::vector<std::string>* warnings) {
    const ptree pt = read_tree(xml_text);
    auto root = pt.get_child_optional("applicationProfile");
    if (!root) throw SchemaViolation("applicationProfile", "missing root element");

    ApplicationProfile p;
    bool saw_ipc = false, saw_declared = false;
    for (const auto& [key, child] : *root) {
        if (key == "appId") {
            p.app_id = child.get_value<std::string>();
        } else if (key == "ipcLevel") {
            p.ipc_level = ipc_level_from_string(child.get_value<std::string>());
            saw_ipc = true;
        } else if (key == "requirements") {
            p.requirements = parse_requirements(child, warnings);
        } else if (key == "declaredDemandMarks") {
            p.declared_demand_marks =
                to_real("declaredDemandMarks", child.get_value<std::string>());
            saw_declared = true;
        } else if (key == "history") {
            for (const auto& [run_key, run_node] : child) {
                if (run_key == "<xmlattr>") {
                    warn(warnings, "attributes on <history> ignored");
                    continue;
                }
                if (run_key != "run") {
                    warn(warnings, "unknown element <" + run_key + "> inside <history> ignored");
                    continue;
                }
                p.history.push_back(parse_run(run_node, warnings));
            }
        } else if (key == "<xmlattr>") {
            warn(warnings, "attributes on <applicationProfile> ignored");
        } else {
            warn(warnings, "unknown element <" + key + "> inside <applicationProfile> ignored");
        }
    }
    if (!is_lower_hex(p.app_id)) throw SchemaViolation("appId", "missing or not a lowercase hex digest");
    if (!saw_ipc) throw SchemaViolation("ipcLevel", "missing required element");
    if (!saw_declared) throw SchemaViolation("declaredDemandMarks", "missing required element");
    if (p.declared_demand_marks <= 0.0)
        throw SchemaViolation("declaredDemandMarks", "must be positive");
    for (size_t i = 1; i < p.history.size(); ++i) {
        if (p.history[i].timestamp < p.history[i - 1].timestamp)
            throw SchemaViolation("history", "run records not ordered by timestamp");
    }
    return p;
}

std::string serialize_computer_profile(const ComputerProfile& p) {
    std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<computerProfile>\n";
    emit_leaf(out, 1, "nodeId", p.node_id);
    out += "  <nonVolatile>\n";
    emit_leaf(out, 2, "os", p.nonvolatile.os);
    emit_leaf(out, 2, "arch", p.nonvolatile.arch);
    emit_leaf(out, 2, "memoryMB", std::to_string(p.nonvolatile.memory_mb));
    emit_leaf(out, 2, "capacityMarksPerS", fmt_real(p.nonvolatile.capacity_marks_per_s));
    emit_set(out, 2, "libraries", "lib", p.nonvolatile.libraries);
    emit_set(out, 2, "hardware", "feature", p.nonvolatile.hardware_features);
    out += "  </nonVolatile>\n  <volatile>\n";
    emit_leaf(out, 2, "timestamp", fmt_real(p.volatile_sample.timestamp));
    emit_leaf(out, 2, "cpuBusyFraction", fmt_real(p.volatile_sample.cpu_busy_fraction));
    emit_leaf(out, 2, "freeMemoryMB", std::to_string(p.volatile_sample.free_memory_mb));
    emit_leaf(out, 2, "subscribedMarks", fmt_real(p.volatile_sample.subscribed_marks));
    out += "  </volatile>\n</computerProfile>\n";
    return out;
}

std::string serialize_application_profile(const ApplicationProfile& p) {
    std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<applicationProfile>\n";
    emit_leaf(out, 1, "appId", p.app_id);
    emit_leaf(out, 1, "ipcLevel", to_string(p.ipc_level));
    out += "  <requirements>\n";
    if (p.requirements.os) emit_leaf(out, 2, "os", *p.requirements.os);
    if (p.requirements.arch) emit_leaf(out, 2, "arch", *p.requirements.arch);
    emit_leaf(out, 2, "minMemoryMB", std::to_string(p.requirements.min_memory_mb));
    emit_set(out, 2, "libraries", "lib", p.requirements.required_libraries);
    emit_set(out, 2, "hardware", "feature", p.requirements.required_hardware);
    out += "  </requirements>\n";
    emit_leaf(out, 1, "declaredDemandMarks", fmt_real(p.declared_demand_marks));
    if (p.history.empty()) {
        out += "  <history/>\n";
    } else {
        out += "  <history>\n";
        for (const auto& rec : p.history) {
            out += "    <run>\n";
            emit_leaf(out, 3, "demandMarks", fmt_real(rec.demand_marks));
            emit_leaf(out, 3, "wallTimeS", fmt_real(rec.wall_time_s));
            emit_leaf(out, 3, "nodeId", rec.node_id);
            emit_leaf(out, 3, "timestamp", fmt_real(rec.timestamp));
            out += "    </run>\n";
        }
        out += "  </history>\n";
    }
    out += "</applicationProfile>\n";
    return out;
}

std::string compute_app_id(const std::string& name, const std::string& version) {
    if (name.empty()) throw EmptyField("name");
    if (version.empty()) throw EmptyField("version");
    const std::string bytes = name + "\n" + version;
    // FNV-1a, 64-bit
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
    return buf;
}

ComputerProfile update_volatile(const ComputerProfile& p, const VolatileSample& s) {
    if (s.timestamp < p.volatile_sample.timestamp)
        throw StaleSample(p.volatile_sample.timestamp, s.timestamp);
    ComputerProfile next = p;
    next.volatile_sample = s;
    return next;
}

}  // namespace gridsched
