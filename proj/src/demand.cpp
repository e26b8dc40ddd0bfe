#include "gridsched/demand.hpp"

#include <algorithm>
#include <cassert>

namespace gridsched {

ApplicationProfile record_run(const ApplicationProfile& profile, const RunRecord& rec) {
    assert(rec.demand_marks > 0.0 && rec.wall_time_s > 0.0);
    ApplicationProfile next = profile;
    next.history.push_back(rec);
    return next;
}

DemandEstimate estimate_demand(const ApplicationProfile& profile, double q, double safety_factor) {
    if (!(q > 0.0) || q > 1.0) throw InvalidQuantile(q);

    if (profile.history.empty()) {
        return DemandEstimate{profile.declared_demand_marks * safety_factor, q,
                              DemandSource::declared_with_margin};
    }

    std::vector<double> demands;
    demands.reserve(profile.history.size());
    for (const auto& rec : profile.history) demands.push_back(rec.demand_marks);
    std::sort(demands.begin(), demands.end());

    // Smallest k in 1..n with k/n >= q. Comparing k/n against q (instead of
    // k against q*n) keeps exact-ratio quantiles like q=0.3, n=10 stable.
    const size_t n = demands.size();
    size_t k = n;
    for (size_t i = 1; i <= n; ++i) {
        if (static_cast<double>(i) / static_cast<double>(n) >= q) {
            k = i;
            break;
        }
    }
    return DemandEstimate{demands[k - 1], q, DemandSource::empirical_quantile};
}

double on_time_confidence(const ApplicationProfile& profile, double booked_marks,
                          double cold_start_prior) {
    assert(booked_marks > 0.0);
    if (profile.history.empty()) return cold_start_prior;
    size_t within = 0;
    for (const auto& rec : profile.history)
        if (rec.demand_marks <= booked_marks) ++within;
    return static_cast<double>(within) / static_cast<double>(profile.history.size());
}

}  // namespace gridsched
