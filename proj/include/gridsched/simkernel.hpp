#pragma once

#include "gridsched/monitor.hpp"
#include "gridsched/scenario.hpp"

#include <map>
#include <string>
#include <vector>

namespace gridsched {

struct RunMetrics {
    int jobs_submitted = 0;
    int jobs_admitted = 0;
    int jobs_rejected = 0;
    int jobs_completed = 0;
    int jobs_on_time = 0;
    int jobs_missed_deadline = 0;
    int integrity_alerts = 0;
    long query_messages = 0;
    long reply_messages = 0;
    long beacon_messages = 0;
};

struct NodeMetrics {
    std::string node_id;
    double utilization = 0.0;      // busy seconds / duration
    double consumed_marks = 0.0;   // total marks executed
    double busy_seconds = 0.0;
    int jobs_admitted = 0;
    int jobs_completed = 0;
    int jobs_missed = 0;
    int beacons_emitted = 0;
};

// One volatile-sample row of the time series.
struct SampleRow {
    double time = 0.0;
    std::string node_id;
    double cpu_busy_fraction = 0.0;
    double subscribed_marks = 0.0;
    double unsubscribed_60s_marks = 0.0;
};

struct RunResult {
    SchedulerPolicy policy = SchedulerPolicy::subscribed_load;
    ExecutionModel execution_model = ExecutionModel::fair_share;
    uint64_t seed = 0;
    double duration_s = 0.0;

    RunMetrics metrics;
    std::map<std::string, SlaRow> sla;  // keyed by app_id
    std::vector<NodeMetrics> per_node;  // ordered by node_id
    AccountingLog accounting;
    std::vector<nlohmann::json> trace_lines;  // message / beacon / sample records
    std::vector<SampleRow> samples;
    // node -> peer -> timestamp of the last beacon received, at end of run
    std::map<std::string, std::map<std::string, double>> beacon_view;

    nlohmann::json report_json() const;  // deterministic for a given run
    std::string traces_jsonl() const;
    std::string samples_csv() const;
};

// Deterministic discrete-event run: identical scenario and seed give a
// byte-identical accounting log and report.
RunResult run(const Scenario& scenario);

// Placement with one retry: the best reply is tried first; if the admission
// races and fails, the next-best reply gets the one retry, then the job is
// rejected. Returns the node that admitted the job.
std::optional<std::string> place_with_retry(
    std::vector<BidReply> replies, const std::function<bool(const std::string&)>& try_admit);

}  // namespace gridsched
