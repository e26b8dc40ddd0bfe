#include "gridsched/cli.hpp"

#include "gridsched/profiles.hpp"
#include "gridsched/scenario.hpp"
#include "gridsched/simkernel.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace gridsched::cli {

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Name of the first element in the document, skipping the declaration,
// comments and doctype.
std::string root_element(const std::string& xml) {
    size_t pos = 0;
    while ((pos = xml.find('<', pos)) != std::string::npos) {
        if (xml.compare(pos, 2, "<?") == 0 || xml.compare(pos, 2, "<!") == 0) {
            ++pos;
            continue;
        }
        size_t end = pos + 1;
        while (end < xml.size() && (std::isalnum(static_cast<unsigned char>(xml[end])) || xml[end] == '_'))
            ++end;
        return xml.substr(pos + 1, end - pos - 1);
    }
    return {};
}

}  // namespace

void write_file_atomic(const std::string& path, const std::string& content) {
    const std::filesystem::path target(path);
    if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
    const std::filesystem::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        if (!out.flush()) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, target);
}

int cmd_validate(const std::vector<std::string>& paths, std::ostream& out, std::ostream& err) {
    bool all_ok = true;
    for (const auto& path : paths) {
        try {
            const std::string text = read_file(path);
            const std::string root = root_element(text);
            std::vector<std::string> warnings;
            if (root == "computerProfile") {
                parse_computer_profile(text, &warnings);
            } else if (root == "applicationProfile") {
                parse_application_profile(text, &warnings);
            } else {
                throw SchemaViolation(root.empty() ? "?" : root,
                                      "expected computerProfile or applicationProfile root");
            }
            for (const auto& w : warnings) err << path << ": warning: " << w << "\n";
            out << "OK " << path << "\n";
        } catch (const std::exception& e) {
            out << "ERROR " << path << ": " << e.what() << "\n";
            all_ok = false;
        }
    }
    return all_ok ? kExitOk : kExitBadInput;
}

int cmd_simulate(const SimulateOptions& options, std::ostream& out, std::ostream& err) {
    Scenario scenario;
    try {
        scenario = load_scenario_file(options.scenario_path);
        if (options.seed) scenario.seed = *options.seed;
        if (options.policy) scenario.policy = policy_from_string(*options.policy);
        if (options.execution_model)
            scenario.execution_model = execution_model_from_string(*options.execution_model);
    } catch (const ConfigError& e) {
        err << e.what() << "\n";
        return kExitConfig;
    }

    RunResult result;
    try {
        result = run(scenario);
    } catch (const ConfigError& e) {
        err << e.what() << "\n";
        return kExitConfig;
    }

    try {
        write_file_atomic(options.out_path, result.report_json().dump(2) + "\n");
        if (options.traces_path) write_file_atomic(*options.traces_path, result.traces_jsonl());
        if (options.csv_path) write_file_atomic(*options.csv_path, result.samples_csv());
    } catch (const std::exception& e) {
        err << e.what() << "\n";
        return kExitBadInput;
    }

    if (!options.quiet) {
        const auto& m = result.metrics;
        const double pct =
            m.jobs_completed > 0 ? 100.0 * m.jobs_on_time / m.jobs_completed : 0.0;
        char line[160];
        std::snprintf(line, sizeof(line), "jobs=%d on_time=%.1f%% rejects=%d -> %s\n",
                      m.jobs_submitted, pct, m.jobs_rejected, options.out_path.c_str());
        out << line;
    }
    return kExitOk;
}

namespace {

const char* const kMetricKeys[] = {
    "jobs_submitted",  "jobs_admitted",       "jobs_rejected",    "jobs_completed",
    "jobs_on_time",    "jobs_missed_deadline", "integrity_alerts", "query_messages",
    "reply_messages",  "beacon_messages",
};

struct ReportColumn {
    std::string label;
    std::vector<std::string> values;  // aligned with rows
};

}  // namespace

int cmd_report(const std::vector<std::string>& paths, const std::optional<std::string>& csv_out,
               std::ostream& out, std::ostream& err) {
    std::vector<std::string> rows = {"policy", "execution_model", "seed"};
    for (const char* key : kMetricKeys) rows.push_back(key);

    std::vector<ReportColumn> columns;
    try {
        for (const auto& path : paths) {
            nlohmann::json doc;
            try {
                doc = nlohmann::json::parse(read_file(path));
            } catch (const std::exception& e) {
                err << "bad report " << path << ": " << e.what() << "\n";
                return kExitBadInput;
            }
            ReportColumn col;
            col.label = std::filesystem::path(path).filename().string();

            if (!doc.contains("scenario")) throw BadReport(path, "scenario");
            const auto& scenario = doc.at("scenario");
            for (const char* key : {"policy", "execution_model", "seed"}) {
                if (!scenario.contains(key)) throw BadReport(path, std::string("scenario.") + key);
                const auto& v = scenario.at(key);
                col.values.push_back(v.is_string() ? v.get<std::string>() : v.dump());
            }
            if (!doc.contains("metrics")) throw BadReport(path, "metrics");
            const auto& metrics = doc.at("metrics");
            for (const char* key : kMetricKeys) {
                if (!metrics.contains(key)) throw BadReport(path, std::string("metrics.") + key);
                col.values.push_back(metrics.at(key).dump());
            }
            columns.push_back(std::move(col));
        }
    } catch (const BadReport& e) {
        err << e.what() << "\n";
        return kExitBadInput;
    }

    size_t name_width = 0;
    for (const auto& row : rows) name_width = std::max(name_width, row.size());
    std::vector<size_t> widths;
    for (const auto& col : columns) {
        size_t w = col.label.size();
        for (const auto& v : col.values) w = std::max(w, v.size());
        widths.push_back(w);
    }

    out << std::left << std::setw(static_cast<int>(name_width)) << "metric";
    for (size_t c = 0; c < columns.size(); ++c)
        out << "  " << std::right << std::setw(static_cast<int>(widths[c])) << columns[c].label;
    out << "\n";
    for (size_t r = 0; r < rows.size(); ++r) {
        out << std::left << std::setw(static_cast<int>(name_width)) << rows[r];
        for (size_t c = 0; c < columns.size(); ++c)
            out << "  " << std::right << std::setw(static_cast<int>(widths[c]))
                << columns[c].values[r];
        out << "\n";
    }

    if (csv_out) {
        std::string csv = "metric";
        for (const auto& col : columns) csv += "," + col.label;
        csv += "\n";
        for (size_t r = 0; r < rows.size(); ++r) {
            csv += rows[r];
            for (const auto& col : columns) csv += "," + col.values[r];
            csv += "\n";
        }
        try {
            write_file_atomic(*csv_out, csv);
        } catch (const std::exception& e) {
            err << e.what() << "\n";
            return kExitBadInput;
        }
    }
    return kExitOk;
}

}  // namespace gridsched::cli
