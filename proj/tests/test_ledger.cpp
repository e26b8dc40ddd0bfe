#include "gridsched/ledger.hpp"

#include "doctest.h"
#include "generators.hpp"
#include "oracles.hpp"

#include <cmath>
#include <random>

using namespace gridsched;

namespace {

LoadLedger ledger_with(double rate, std::vector<std::tuple<std::string, double, double>> jobs,
                       double now = 0.0) {
    LoadLedger ledger("n1", rate, now);
    for (const auto& [id, marks, due] : jobs)
        ledger = ledger.admit_unchecked(id, "app", marks, due, 1.0);
    return ledger;
}

}  // namespace

TEST_CASE("feasibility follows the processor-demand criterion") {
    CHECK(LoadLedger("n1", 100.0).is_feasible());  // empty

    const LoadLedger one = ledger_with(100.0, {{"A", 500.0, 8.0}});
    CHECK(one.is_feasible());  // 500 <= 800

    const LoadLedger two = ledger_with(100.0, {{"A", 500.0, 8.0}, {"B", 600.0, 10.0}});
    CHECK_FALSE(two.is_feasible());  // 1100 > 1000
}

TEST_CASE("admit accepts exactly the feasible extensions") {
    const LoadLedger base = ledger_with(100.0, {{"A", 500.0, 8.0}});

    const auto accepted = base.admit("B", "app", 400.0, 10.0, 1.0);
    REQUIRE(accepted.has_value());
    CHECK(accepted->commitments().size() == 2);
    CHECK(base.commitments().size() == 1);  // input unchanged

    const auto rejected = base.admit("B", "app", 600.0, 10.0, 1.0);
    CHECK_FALSE(rejected.has_value());

    const LoadLedger empty("n1", 50.0);
    CHECK(empty.admit("J", "app", 50.0 * 4.0, 4.0, 1.0).has_value());

    CHECK_THROWS_AS(base.admit("A", "app", 1.0, 5.0, 1.0), DuplicateJobId);
    CHECK_THROWS_AS(base.admit("C", "app", 1.0, -1.0, 1.0), PastDeadline);
    CHECK_THROWS_AS(base.admit("C", "app", 1.0, 0.0, 1.0), PastDeadline);
}

TEST_CASE("feasibility agrees with exhaustive preemptive scheduling") {
    std::mt19937_64 rng(2718);
    int infeasible_seen = 0;
    for (int i = 0; i < 1000; ++i) {
        const int n = testgen::pick_int(rng, 1, 4);
        std::vector<oracle::OracleJob> jobs;
        LoadLedger ledger("n1", 1.0, 0.0);
        for (int k = 0; k < n; ++k) {
            oracle::OracleJob j{testgen::pick_int(rng, 1, 20), testgen::pick_int(rng, 1, 20)};
            jobs.push_back(j);
            ledger = ledger.admit_unchecked("job" + std::to_string(k), "app",
                                            static_cast<double>(j.marks),
                                            static_cast<double>(j.due), 1.0);
        }
        const bool expected = oracle::feasible_exhaustive(jobs);
        if (!expected) ++infeasible_seen;
        CHECK(ledger.is_feasible() == expected);
    }
    CHECK(infeasible_seen > 100);  // the instance family exercises both sides
}

TEST_CASE("unsubscribed capacity: closed form examples") {
    CHECK(LoadLedger("n1", 100.0).unsubscribed(10.0) == doctest::Approx(1000.0));

    const LoadLedger mid = ledger_with(100.0, {{"A", 500.0, 8.0}, {"B", 400.0, 12.0}});
    CHECK(mid.unsubscribed(10.0) == doctest::Approx(300.0));  // min(1000-500, 1200-900)

    // A single 300-mark commitment due at 9 leaves two thirds of the window
    // free even while the CPU runs flat out.
    const LoadLedger busy = ledger_with(100.0, {{"J", 300.0, 9.0}});
    CHECK(busy.unsubscribed(9.0) == doctest::Approx(600.0));
}

TEST_CASE("unsubscribed is the exact admissibility threshold") {
    std::mt19937_64 rng(13);
    int nontrivial = 0;
    for (int i = 0; i < 300; ++i) {
        const double rate = testgen::grid_real(rng, 1.0, 500.0);
        const LoadLedger ledger = testgen::random_feasible_ledger(rng, rate, 5);
        const double w = testgen::grid_real(rng, 1.0, 30.0);
        const double x = ledger.unsubscribed(w);
        const double eps = 1e-6 * rate * w;
        CHECK(x >= 0.0);
        CHECK(x <= rate * w);
        if (x > 0.0) {
            ++nontrivial;
            CHECK(ledger.admit("probe", "app", x, ledger.now() + w, 1.0).has_value());
        }
        CHECK_FALSE(ledger.admit("probe2", "app", x + eps, ledger.now() + w, 1.0).has_value());

        // Cross-check the closed form against a bisection driven only by admit.
        double lo = 0.0, hi = rate * w + 1.0;
        for (int step = 0; step < 60; ++step) {
            const double midpoint = 0.5 * (lo + hi);
            if (ledger.admit("bisect", "app", midpoint, ledger.now() + w, 1.0).has_value())
                lo = midpoint;
            else
                hi = midpoint;
        }
        CHECK(std::abs(lo - x) <= 1e-6 * std::max(1.0, rate * w));
    }
    CHECK(nontrivial > 50);
}

TEST_CASE("unsubscribed shrinks as commitments are added") {
    std::mt19937_64 rng(404);
    for (int i = 0; i < 200; ++i) {
        const double rate = testgen::grid_real(rng, 1.0, 200.0);
        LoadLedger ledger("n1", rate, 0.0);
        const double w = testgen::grid_real(rng, 1.0, 20.0);
        double last = ledger.unsubscribed(w);
        for (int k = 0; k < 4; ++k) {
            const double due = testgen::grid_real(rng, 0.5, 30.0);
            const double marks = testgen::grid_real(rng, 0.1, rate * due);
            const auto next = ledger.admit("j" + std::to_string(k), "app", marks, due, 1.0);
            if (!next) continue;
            ledger = *next;
            const double now_free = ledger.unsubscribed(w);
            CHECK(now_free <= last + 1e-9 * rate);
            CHECK(now_free >= 0.0);
            CHECK(now_free <= rate * w);
            last = now_free;
        }
    }
}

TEST_CASE("bids quote unsubscribed marks and multiply confidences") {
    const LoadLedger empty("n1", 100.0);
    const Bid b0 = empty.make_bid(10.0);
    CHECK(b0.unsubscribed_marks == doctest::Approx(1000.0));
    CHECK(b0.confidence == doctest::Approx(1.0));
    CHECK(b0.node_id == "n1");

    LoadLedger one = *empty.admit("A", "app", 100.0, 10.0, 2.0 / 3.0);
    CHECK(one.make_bid(5.0).confidence == doctest::Approx(2.0 / 3.0));

    LoadLedger two = *one.admit("B", "app", 100.0, 20.0, 0.9);
    CHECK(two.make_bid(5.0).confidence == doctest::Approx(0.6).epsilon(1e-12));

    // Monte Carlo cross-check under independence.
    std::mt19937_64 rng(55);
    int both = 0;
    const int trials = 200000;
    for (int i = 0; i < trials; ++i) {
        const bool a = (rng() >> 11) * 0x1.0p-53 < 2.0 / 3.0;
        const bool b = (rng() >> 11) * 0x1.0p-53 < 0.9;
        if (a && b) ++both;
    }
    CHECK(static_cast<double>(both) / trials == doctest::Approx(0.6).epsilon(0.01));
}

TEST_CASE("bid confidence equals the product of commitment probabilities") {
    std::mt19937_64 rng(77);
    for (int i = 0; i < 200; ++i) {
        const LoadLedger ledger = testgen::random_feasible_ledger(rng, 100.0, 6);
        double expected = 1.0;
        for (const auto& c : ledger.commitments()) expected *= c.on_time_prob;
        CHECK(std::abs(ledger.make_bid(7.0).confidence - expected) <= 1e-12);
    }
}

TEST_CASE("consume decrements, floors at zero, and retires") {
    LoadLedger ledger = ledger_with(100.0, {{"A", 100.0, 10.0}});
    auto r1 = ledger.consume("A", 40.0);
    CHECK_FALSE(r1.completed);
    CHECK(r1.ledger.find("A")->remaining_marks == doctest::Approx(60.0));

    auto r2 = r1.ledger.consume("A", 60.0);
    CHECK(r2.completed);
    CHECK(r2.ledger.find("A") == nullptr);
    CHECK(r2.ledger.commitments().empty());

    auto r3 = ledger.consume("A", 100.0);
    CHECK(r3.completed);

    CHECK_THROWS_AS(ledger.consume("nope", 1.0), UnknownJob);
}

TEST_CASE("advance_time reports each late commitment once") {
    LoadLedger ledger = ledger_with(100.0, {{"A", 100.0, 2.0}, {"B", 100.0, 8.0}});

    SUBCASE("completed work is never flagged") {
        auto done = ledger.consume("A", 100.0).ledger;
        auto advanced = done.advance_time(5.0);
        CHECK(advanced.misses.empty());
        CHECK(advanced.ledger.now() == 5.0);
    }
    SUBCASE("unfinished work past due is flagged exactly once") {
        auto first = ledger.advance_time(3.0);
        REQUIRE(first.misses.size() == 1);
        CHECK(first.misses[0].job_id == "A");
        CHECK(first.ledger.find("A")->missed);

        auto second = first.ledger.advance_time(4.0);
        CHECK(second.misses.empty());  // already flagged

        // late work still occupies capacity
        CHECK(second.ledger.subscribed_marks() == doctest::Approx(200.0));
    }
    SUBCASE("same-time advance is a no-op") {
        auto same = ledger.advance_time(0.0);
        CHECK(same.misses.empty());
        CHECK(same.ledger.commitments().size() == 2);
    }
    SUBCASE("time cannot regress") {
        auto fwd = ledger.advance_time(5.0);
        CHECK_THROWS_AS(fwd.ledger.advance_time(4.0), TimeRegression);
    }
}

TEST_CASE("ledger exports a complete JSON object") {
    const LoadLedger ledger = ledger_with(100.0, {{"A", 500.0, 8.0}});
    const nlohmann::json j = to_json(ledger);
    CHECK(j.at("node_id") == "n1");
    CHECK(j.at("rate") == doctest::Approx(100.0));
    CHECK(j.at("now") == doctest::Approx(0.0));
    REQUIRE(j.at("commitments").size() == 1);
    CHECK(j.at("commitments")[0].at("job_id") == "A");
    CHECK(j.at("commitments")[0].at("remaining_marks") == doctest::Approx(500.0));
}
