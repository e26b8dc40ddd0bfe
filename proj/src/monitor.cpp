#include "gridsched/monitor.hpp"

namespace gridsched {

std::string to_string(EventKind kind) {
    switch (kind) {
        case EventKind::job_admitted: return "job_admitted";
        case EventKind::job_completed: return "job_completed";
        case EventKind::job_missed_deadline: return "job_missed_deadline";
        case EventKind::job_rejected: return "job_rejected";
        case EventKind::integrity_alert: return "integrity_alert";
        case EventKind::policy_update: return "policy_update";
    }
    return "policy_update";
}

EventKind event_kind_from_string(const std::string& s) {
    if (s == "job_admitted") return EventKind::job_admitted;
    if (s == "job_completed") return EventKind::job_completed;
    if (s == "job_missed_deadline") return EventKind::job_missed_deadline;
    if (s == "job_rejected") return EventKind::job_rejected;
    if (s == "integrity_alert") return EventKind::integrity_alert;
    if (s == "policy_update") return EventKind::policy_update;
    throw std::invalid_argument("unknown event kind: " + s);
}

const AccountingEvent& AccountingLog::append(AccountingEvent e) {
    auto [it, inserted] = last_timestamp_.try_emplace(e.node_id, e.timestamp);
    if (!inserted) {
        if (e.timestamp < it->second) throw OutOfOrder(e.node_id, it->second, e.timestamp);
        it->second = e.timestamp;
    }
    e.seq = next_seq_++;
    events_.push_back(std::move(e));
    return events_.back();
}

nlohmann::json to_json(const AccountingEvent& e) {
    nlohmann::json out{{"timestamp", e.timestamp},
                       {"seq", e.seq},
                       {"kind", to_string(e.kind)},
                       {"node_id", e.node_id},
                       {"payload", e.payload}};
    if (!e.job_id.empty()) out["job_id"] = e.job_id;
    return out;
}

std::string AccountingLog::to_jsonl() const {
    std::string out;
    for (const auto& e : events_) {
        out += to_json(e).dump();
        out += '\n';
    }
    return out;
}

std::map<std::string, SlaRow> sla_report(const AccountingLog& log, double horizon) {
    struct Acc {
        int jobs = 0, completed = 0, on_time = 0, rejected = 0;
        double turnaround_sum = 0.0;
    };
    std::map<std::string, Acc> acc;

    for (const auto& e : log.events()) {
        if (e.timestamp > horizon) continue;
        const std::string app = e.payload.value("app_id", std::string{});
        if (app.empty()) continue;
        switch (e.kind) {
            case EventKind::job_admitted:
                acc[app].jobs += 1;
                break;
            case EventKind::job_completed: {
                auto& a = acc[app];
                a.completed += 1;
                if (e.payload.value("on_time", false)) a.on_time += 1;
                a.turnaround_sum += e.payload.value("turnaround_s", 0.0);
                break;
            }
            case EventKind::job_rejected:
                acc[app].rejected += 1;
                break;
            default:
                break;
        }
    }

    std::map<std::string, SlaRow> report;
    for (const auto& [app, a] : acc) {
        SlaRow row;
        row.jobs = a.jobs;
        row.rejected = a.rejected;
        if (a.completed > 0) {
            row.on_time_fraction = static_cast<double>(a.on_time) / a.completed;
            row.mean_turnaround_s = a.turnaround_sum / a.completed;
        }
        report[app] = row;
    }
    return report;
}

NodeStateBeacon make_beacon(const ComputerProfile& profile, const LoadLedger& ledger, double now) {
    return NodeStateBeacon{profile.node_id, now, profile.volatile_sample.cpu_busy_fraction,
                           ledger.subscribed_marks(), ledger.unsubscribed(60.0)};
}

nlohmann::json to_json(const NodeStateBeacon& b) {
    return {{"node_id", b.node_id},
            {"timestamp", b.timestamp},
            {"cpu_busy_fraction", b.cpu_busy_fraction},
            {"subscribed_marks", b.subscribed_marks},
            {"unsubscribed_1min_marks", b.unsubscribed_1min_marks}};
}

void BeaconTable::observe(const NodeStateBeacon& beacon) {
    auto [it, inserted] = latest_.try_emplace(beacon.node_id, beacon);
    if (!inserted && beacon.timestamp >= it->second.timestamp) it->second = beacon;
}

const NodeStateBeacon* BeaconTable::latest(const std::string& node_id) const {
    auto it = latest_.find(node_id);
    return it == latest_.end() ? nullptr : &it->second;
}

std::optional<IntegrityAlert> integrity_check(const std::string& node_id,
                                              const std::string& job_id, double consumed_marks,
                                              double booked_marks, double integrity_factor,
                                              double now, bool already_alerted) {
    if (already_alerted) return std::nullopt;
    const double threshold = integrity_factor * booked_marks;
    if (consumed_marks <= threshold) return std::nullopt;
    return IntegrityAlert{node_id, job_id, consumed_marks, threshold, now};
}

}  // namespace gridsched
