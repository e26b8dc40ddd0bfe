#pragma once

#include <nlohmann/json.hpp>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridsched {

struct DuplicateJobId : std::runtime_error {
    explicit DuplicateJobId(const std::string& id) : std::runtime_error("duplicate job id: " + id) {}
};
struct PastDeadline : std::runtime_error {
    PastDeadline(double due, double now)
        : std::runtime_error("due time " + std::to_string(due) + " not after now " +
                             std::to_string(now)) {}
};
struct UnknownJob : std::runtime_error {
    explicit UnknownJob(const std::string& id) : std::runtime_error("unknown job id: " + id) {}
};
struct TimeRegression : std::runtime_error {
    TimeRegression(double now, double t)
        : std::runtime_error("time regression: " + std::to_string(t) + " < " +
                             std::to_string(now)) {}
};

// One subscribed-load entry: marks still owed and the time they are due.
struct Commitment {
    std::string job_id;
    std::string app_id;
    double remaining_marks = 0.0;
    double due_time = 0.0;      // absolute simulation seconds
    double booked_marks = 0.0;  // original booking
    double on_time_prob = 1.0;  // confidence at admission
    bool missed = false;        // deadline passed with work remaining

    friend bool operator==(const Commitment&, const Commitment&) = default;
};

// Answer to a discovery query: how many marks the node can still promise over
// the window, and how confident it is that existing commitments finish as
// profiled.
struct Bid {
    std::string node_id;
    double window_s = 0.0;
    double unsubscribed_marks = 0.0;
    double confidence = 1.0;
};

struct DeadlineMiss {
    std::string job_id;
    std::string app_id;
    double due_time = 0.0;
    double remaining_marks = 0.0;
};

struct ConsumeOutcome;
struct AdvanceOutcome;

// Per-node subscribed-load ledger. A value type: mutating operations return a
// new ledger and leave the receiver untouched, so feasibility established at
// admission can never be silently invalidated.
//
// Feasibility is the single-machine processor-demand criterion: for every due
// time d, the marks due by d must fit into rate * (d - now). It is exact for
// deadline-ordered preemptive execution. Commitments already past their due
// time stay on the ledger (the work still has to run) but no longer impose a
// constraint of their own.
class LoadLedger {
public:
    LoadLedger(std::string node_id, double rate, double now = 0.0);

    const std::string& node_id() const { return node_id_; }
    double rate() const { return rate_; }
    double now() const { return now_; }
    const std::vector<Commitment>& commitments() const { return commitments_; }
    const Commitment* find(const std::string& job_id) const;

    // Total marks currently committed.
    double subscribed_marks() const;

    bool is_feasible() const;

    // Adds the commitment iff the resulting ledger stays feasible; nullopt
    // means rejected for insufficient capacity. Throws DuplicateJobId and
    // PastDeadline on precondition violations.
    std::optional<LoadLedger> admit(const std::string& job_id, const std::string& app_id,
                                    double booked_marks, double due_time,
                                    double on_time_prob) const;

    // Adds the commitment without the feasibility test. Used by the spot-load
    // baseline policy, which admits unconditionally.
    LoadLedger admit_unchecked(const std::string& job_id, const std::string& app_id,
                               double booked_marks, double due_time, double on_time_prob) const;

    // Decrements remaining marks, floored at zero; at zero the commitment is
    // retired. Throws UnknownJob.
    ConsumeOutcome consume(const std::string& job_id, double marks) const;

    AdvanceOutcome advance_time(double t) const;  // throws TimeRegression

    // Largest additional booking (marks due at now + window_s) the ledger can
    // accept and stay feasible.
    double unsubscribed(double window_s) const;

    // Bid = (unsubscribed marks over the window, product of per-commitment
    // on-time probabilities). Empty ledger bids full capacity at confidence 1.
    Bid make_bid(double window_s) const;

private:
    double demand_by(double due) const;
    double slack_tolerance() const { return 1e-9 * rate_; }

    std::string node_id_;
    double rate_;
    double now_;
    std::vector<Commitment> commitments_;
};

struct ConsumeOutcome {
    LoadLedger ledger;
    bool completed = false;  // commitment hit zero and was retired
};

struct AdvanceOutcome {
    LoadLedger ledger;
    std::vector<DeadlineMiss> misses;  // newly late commitments, flagged once
};

nlohmann::json to_json(const LoadLedger& ledger);
nlohmann::json to_json(const Bid& bid);

}  // namespace gridsched
