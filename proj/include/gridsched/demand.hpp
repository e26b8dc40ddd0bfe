#pragma once

#include "gridsched/profiles.hpp"

namespace gridsched {

struct InvalidQuantile : std::invalid_argument {
    explicit InvalidQuantile(double q)
        : std::invalid_argument("quantile must be in (0,1], got " + std::to_string(q)) {}
};

enum class DemandSource { declared_with_margin, empirical_quantile };

// What gets entered into a ledger for one run of the application.
struct DemandEstimate {
    double booked_marks = 0.0;
    double quantile_q = 0.0;
    DemandSource source = DemandSource::declared_with_margin;
};

struct DemandConfig {
    double quantile = 0.9;
    double safety_factor = 1.5;
    double cold_start_confidence = 0.5;
};

// Appends one completed-run record; every other field is unchanged.
ApplicationProfile record_run(const ApplicationProfile& profile, const RunRecord& rec);

// Cold start books declared_demand_marks * safety_factor. With history, books
// the lower empirical q-quantile of observed demands: the smallest observed
// value whose empirical CDF reaches q.
DemandEstimate estimate_demand(const ApplicationProfile& profile, double q,
                               double safety_factor = 1.5);

// Fraction of recorded runs that fit within booked_marks; the configured
// prior when there is no history yet.
double on_time_confidence(const ApplicationProfile& profile, double booked_marks,
                          double cold_start_prior = 0.5);

}  // namespace gridsched
