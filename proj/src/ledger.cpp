#include "gridsched/ledger.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

namespace gridsched {

LoadLedger::LoadLedger(std::string node_id, double rate, double now)
    : node_id_(std::move(node_id)), rate_(rate), now_(now) {
    assert(rate_ > 0.0);
}

const Commitment* LoadLedger::find(const std::string& job_id) const {
    for (const auto& c : commitments_)
        if (c.job_id == job_id) return &c;
    return nullptr;
}

double LoadLedger::subscribed_marks() const {
    double total = 0.0;
    for (const auto& c : commitments_) total += c.remaining_marks;
    return total;
}

// Marks due at or before `due`, late work included.
double LoadLedger::demand_by(double due) const {
    double total = 0.0;
    for (const auto& c : commitments_)
        if (c.due_time <= due) total += c.remaining_marks;
    return total;
}

bool LoadLedger::is_feasible() const {
    for (const auto& c : commitments_) {
        if (c.due_time < now_) continue;  // already missed, not a constraint
        const double capacity = rate_ * (c.due_time - now_);
        if (capacity - demand_by(c.due_time) < -slack_tolerance()) return false;
    }
    return true;
}

std::optional<LoadLedger> LoadLedger::admit(const std::string& job_id, const std::string& app_id,
                                            double booked_marks, double due_time,
                                            double on_time_prob) const {
    assert(booked_marks > 0.0);
    assert(on_time_prob >= 0.0 && on_time_prob <= 1.0);
    if (find(job_id)) throw DuplicateJobId(job_id);
    if (!(due_time > now_)) throw PastDeadline(due_time, now_);

    LoadLedger next = admit_unchecked(job_id, app_id, booked_marks, due_time, on_time_prob);
    if (!next.is_feasible()) return std::nullopt;
    return next;
}

LoadLedger LoadLedger::admit_unchecked(const std::string& job_id, const std::string& app_id,
                                       double booked_marks, double due_time,
                                       double on_time_prob) const {
    LoadLedger next = *this;
    next.commitments_.push_back(
        Commitment{job_id, app_id, booked_marks, due_time, booked_marks, on_time_prob, false});
    return next;
}

ConsumeOutcome LoadLedger::consume(const std::string& job_id, double marks) const {
    assert(marks > 0.0);
    LoadLedger next = *this;
    for (auto it = next.commitments_.begin(); it != next.commitments_.end(); ++it) {
        if (it->job_id != job_id) continue;
        it->remaining_marks = std::max(0.0, it->remaining_marks - marks);
        // Absorb accumulated rounding from incremental consumption.
        if (it->remaining_marks <= 1e-9 * std::max(1.0, it->booked_marks)) {
            next.commitments_.erase(it);
            return ConsumeOutcome{std::move(next), true};
        }
        return ConsumeOutcome{std::move(next), false};
    }
    throw UnknownJob(job_id);
}

AdvanceOutcome LoadLedger::advance_time(double t) const {
    if (t < now_) throw TimeRegression(now_, t);
    LoadLedger next = *this;
    next.now_ = t;
    std::vector<DeadlineMiss> misses;
    for (auto& c : next.commitments_) {
        if (!c.missed && c.due_time + 1e-9 < t && c.remaining_marks > 0.0) {
            c.missed = true;
            misses.push_back(DeadlineMiss{c.job_id, c.app_id, c.due_time, c.remaining_marks});
        }
    }
    return AdvanceOutcome{std::move(next), std::move(misses)};
}

double LoadLedger::unsubscribed(double window_s) const {
    assert(window_s > 0.0);
    const double horizon = now_ + window_s;

    // A booking of x marks due at `horizon` adds x to the demand at every
    // constraint point d >= horizon, so x is bounded by the smallest slack
    // over those points. Points before the horizon are unaffected.
    double slack = rate_ * window_s - demand_by(horizon);
    for (const auto& c : commitments_) {
        if (c.due_time < horizon) continue;
        slack = std::min(slack, rate_ * (c.due_time - now_) - demand_by(c.due_time));
    }
    return std::max(0.0, slack);
}

Bid LoadLedger::make_bid(double window_s) const {
    double confidence = 1.0;
    for (const auto& c : commitments_) confidence *= c.on_time_prob;
    return Bid{node_id_, window_s, unsubscribed(window_s), confidence};
}

nlohmann::json to_json(const LoadLedger& ledger) {
    nlohmann::json commitments = nlohmann::json::array();
    for (const auto& c : ledger.commitments()) {
        commitments.push_back({{"job_id", c.job_id},
                               {"app_id", c.app_id},
                               {"remaining_marks", c.remaining_marks},
                               {"due_time", c.due_time},
                               {"booked_marks", c.booked_marks},
                               {"on_time_prob", c.on_time_prob},
                               {"missed", c.missed}});
    }
    return {{"node_id", ledger.node_id()},
            {"now", ledger.now()},
            {"rate", ledger.rate()},
            {"commitments", std::move(commitments)}};
}

nlohmann::json to_json(const Bid& bid) {
    return {{"node_id", bid.node_id},
            {"window_s", bid.window_s},
            {"unsubscribed_marks", bid.unsubscribed_marks},
            {"confidence", bid.confidence}};
}

}  // namespace gridsched
