#pragma once

#include "gridsched/ledger.hpp"
#include "gridsched/profiles.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gridsched {

struct OutOfOrder : std::runtime_error {
    OutOfOrder(const std::string& node_id, double have, double got)
        : std::runtime_error("out-of-order event for node " + node_id + ": " +
                             std::to_string(got) + " < " + std::to_string(have)) {}
};

enum class EventKind {
    job_admitted,
    job_completed,
    job_missed_deadline,
    job_rejected,
    integrity_alert,
    policy_update,
};

std::string to_string(EventKind kind);
EventKind event_kind_from_string(const std::string& s);

// Tier-1 record: infrequent, reliable accounting. Emitted only on
// admission, completion, rejection, deadline miss, integrity alert, or a
// policy update - never on beacon cadence.
struct AccountingEvent {
    double timestamp = 0.0;
    int64_t seq = 0;  // assigned by the log
    EventKind kind = EventKind::policy_update;
    std::string job_id;  // empty when not job-related
    std::string node_id;
    nlohmann::json payload;  // booked marks, due time, actual marks, ...
};

// Append-only, totally ordered by (timestamp, seq). Single writer per run.
class AccountingLog {
public:
    // Assigns the sequence number. Timestamps must be non-decreasing within
    // each node's stream; throws OutOfOrder otherwise.
    const AccountingEvent& append(AccountingEvent e);

    const std::vector<AccountingEvent>& events() const { return events_; }
    std::string to_jsonl() const;  // one event per line

private:
    std::vector<AccountingEvent> events_;
    std::map<std::string, double> last_timestamp_;
    int64_t next_seq_ = 0;
};

nlohmann::json to_json(const AccountingEvent& e);

struct SlaRow {
    int jobs = 0;  // admissions
    double on_time_fraction = 0.0;
    double mean_turnaround_s = 0.0;
    int rejected = 0;
};

// Pure aggregation per app_id over events with timestamp <= horizon.
// On-time fraction is over completions; zero completions yield zero.
std::map<std::string, SlaRow> sla_report(const AccountingLog& log, double horizon);

// Tier-2 record: periodic volatile-state dissemination to overlay neighbours.
struct NodeStateBeacon {
    std::string node_id;
    double timestamp = 0.0;
    double cpu_busy_fraction = 0.0;
    double subscribed_marks = 0.0;
    double unsubscribed_1min_marks = 0.0;  // unsubscribed capacity over a 60 s window
};

NodeStateBeacon make_beacon(const ComputerProfile& profile, const LoadLedger& ledger, double now);

nlohmann::json to_json(const NodeStateBeacon& b);

// Last-known beacon per peer, as seen by one node.
class BeaconTable {
public:
    void observe(const NodeStateBeacon& beacon);
    const NodeStateBeacon* latest(const std::string& node_id) const;
    const std::map<std::string, NodeStateBeacon>& all() const { return latest_; }

private:
    std::map<std::string, NodeStateBeacon> latest_;
};

// Tier-3 record: local overconsumption watchdog.
struct IntegrityAlert {
    std::string node_id;
    std::string job_id;
    double observed_marks = 0.0;
    double threshold_marks = 0.0;
    double timestamp = 0.0;
};

struct MonitorConfig {
    double beacon_period_s = 5.0;
    double integrity_factor = 2.0;  // alert when consumed > factor * booked
};

// At most one alert per job: pass already_alerted from the caller's per-job
// state. threshold = integrity_factor * booked_marks.
std::optional<IntegrityAlert> integrity_check(const std::string& node_id,
                                              const std::string& job_id, double consumed_marks,
                                              double booked_marks, double integrity_factor,
                                              double now, bool already_alerted);

}  // namespace gridsched
