#include "gridsched/sord.hpp"

#include "doctest.h"
#include "generators.hpp"

#include <algorithm>
#include <map>
#include <queue>
#include <random>

using namespace gridsched;

namespace {

std::vector<std::string> make_ids(int n) {
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) {
        char buf[8];
        std::snprintf(buf, sizeof(buf), "n%02d", i);
        ids.push_back(buf);
    }
    return ids;
}

// Node fleet with independent ledgers for discovery tests.
struct Fleet {
    std::map<std::string, NonVolatileFacts> facts;
    std::map<std::string, LoadLedger> ledgers;
    std::map<std::string, SordNodeState> states;

    NodeView view(const std::string& id) {
        NodeView v;
        v.facts = &facts.at(id);
        LoadLedger* ledger = &ledgers.at(id);
        v.bid_for_window = [ledger](double w) { return ledger->make_bid(w); };
        return v;
    }
};

Fleet random_fleet(const std::vector<std::string>& ids, std::mt19937_64& rng) {
    Fleet fleet;
    for (const auto& id : ids) {
        NonVolatileFacts f;
        f.os = (rng() % 4 == 0) ? "windows" : "linux";
        f.arch = "x86";
        f.memory_mb = testgen::pick_int(rng, 256, 8192);
        f.capacity_marks_per_s = testgen::grid_real(rng, 10.0, 200.0);
        fleet.facts.emplace(id, f);
        LoadLedger ledger(id, f.capacity_marks_per_s, 0.0);
        const int jobs = testgen::pick_int(rng, 0, 3);
        for (int j = 0; j < jobs; ++j) {
            const double due = testgen::grid_real(rng, 1.0, 30.0);
            auto next = ledger.admit("seed" + std::to_string(j), "app",
                                     testgen::grid_real(rng, 0.5, f.capacity_marks_per_s * due),
                                     due, testgen::grid_real(rng, 0.3, 1.0));
            if (next) ledger = std::move(*next);
        }
        fleet.ledgers.emplace(id, std::move(ledger));
        fleet.states.emplace(id, SordNodeState{});
    }
    return fleet;
}

// Hop eccentricity of the origin over directed out-links.
int eccentricity(const Overlay& overlay, const std::string& origin) {
    std::map<std::string, int> dist{{origin, 0}};
    std::queue<std::string> frontier;
    frontier.push(origin);
    int furthest = 0;
    while (!frontier.empty()) {
        const std::string id = frontier.front();
        frontier.pop();
        for (const auto& nb : overlay.neighbors(id)) {
            if (dist.count(nb)) continue;
            dist[nb] = dist[id] + 1;
            furthest = std::max(furthest, dist[nb]);
            frontier.push(nb);
        }
    }
    return furthest;
}

Query basic_query(const std::string& origin, double demand, double window, int ttl) {
    Query q;
    q.query_id = "q-" + origin + "-" + std::to_string(demand);
    q.origin = origin;
    q.demand_marks = demand;
    q.window_s = window;
    q.ttl = ttl;
    q.min_confidence = 0.0;
    return q;
}

}  // namespace

TEST_CASE("ring overlay links each node to its neighbours") {
    const Overlay overlay = build_overlay(make_ids(8), 2, 0, 1);
    for (int i = 0; i < 8; ++i) {
        const auto nbs = overlay.neighbors(overlay.nodes[static_cast<size_t>(i)]);
        REQUIRE(nbs.size() == 2);
        CHECK(nbs[0] == overlay.nodes[static_cast<size_t>((i + 7) % 8)]);
        CHECK(nbs[1] == overlay.nodes[static_cast<size_t>((i + 1) % 8)]);
    }
}

TEST_CASE("overlay construction is deterministic and far links are constrained") {
    const auto ids = make_ids(12);
    const Overlay a = build_overlay(ids, 4, 2, 99);
    const Overlay b = build_overlay(ids, 4, 2, 99);
    CHECK(a.far_links == b.far_links);

    const Overlay c = build_overlay(ids, 4, 2, 100);
    CHECK(a.far_links != c.far_links);  // different seed, different far links

    for (const auto& id : ids) {
        const auto ring = a.ring_neighbors(id);
        const auto& far = a.far_links.at(id);
        CHECK(far.size() == 2);
        std::set<std::string> seen;
        for (const auto& f : far) {
            CHECK(f != id);
            CHECK(std::find(ring.begin(), ring.end(), f) == ring.end());
            CHECK(seen.insert(f).second);
        }
    }
}

TEST_CASE("degenerate degrees are rejected") {
    CHECK_THROWS_AS(build_overlay(make_ids(8), 3, 0, 1), BadDegree);   // odd
    CHECK_THROWS_AS(build_overlay(make_ids(8), 8, 0, 1), BadDegree);   // too wide
    CHECK_THROWS_AS(build_overlay(make_ids(4), 2, 3, 1), BadDegree);   // not enough candidates
    CHECK_THROWS_AS(build_overlay({}, 0, 0, 1), BadDegree);
}

TEST_CASE("handle_query: dedupe, filter-first forwarding, ttl bound") {
    const auto ids = make_ids(4);
    const Overlay overlay = build_overlay(ids, 2, 0, 7);
    std::mt19937_64 rng(1);
    Fleet fleet = random_fleet(ids, rng);
    fleet.facts.at("n01").os = "windows";  // will fail a linux-only filter

    Query q = basic_query("n00", 1.0, 10.0, 2);
    q.requirements.os = "linux";

    SUBCASE("failing the filter still forwards") {
        auto r = handle_query(fleet.states.at("n01"), "n01", fleet.view("n01"), overlay, q, "n00", 1);
        CHECK_FALSE(r.reply.has_value());
        REQUIRE(r.forwards.size() == 1);  // both ring neighbours minus the sender
        CHECK(r.forwards[0].to == "n02");
        CHECK(r.forwards[0].query.ttl == 1);
        CHECK(r.forwards[0].hop == 2);
    }
    SUBCASE("duplicate query ids are dropped") {
        handle_query(fleet.states.at("n02"), "n02", fleet.view("n02"), overlay, q, "n01", 1);
        auto again =
            handle_query(fleet.states.at("n02"), "n02", fleet.view("n02"), overlay, q, "n03", 2);
        CHECK_FALSE(again.reply.has_value());
        CHECK(again.forwards.empty());
    }
    SUBCASE("ttl zero means no forwarding") {
        Query leaf = basic_query("n00", 1.0, 10.0, 0);
        auto r = handle_query(fleet.states.at("n03"), "n03", fleet.view("n03"), overlay, leaf, "n00", 1);
        CHECK(r.forwards.empty());
    }
}

TEST_CASE("an idle node bids its full window capacity") {
    NonVolatileFacts f;
    f.os = "linux";
    f.memory_mb = 1024;
    f.capacity_marks_per_s = 100.0;
    LoadLedger ledger("n0", 100.0, 0.0);
    NodeView view{&f, [&](double w) { return ledger.make_bid(w); }};

    const Query q = basic_query("n0", 600.0, 10.0, 1);
    const auto reply = evaluate_query(view, q, 0);
    REQUIRE(reply.has_value());
    CHECK(reply->bid.unsubscribed_marks == doctest::Approx(1000.0));
    CHECK(reply->bid.confidence == doctest::Approx(1.0));
}

TEST_CASE("select_winner is deterministic and matches a brute-force argmax") {
    SUBCASE("singleton and tie-break") {
        BidReply a{"q", Bid{"a", 10.0, 500.0, 0.91}, 1};
        BidReply b{"q", Bid{"b", 10.0, 500.0, 0.93}, 1};  // same 0.05 bucket
        CHECK(select_winner({a}) == "a");
        CHECK(select_winner({a, b}) == "a");
        CHECK(select_winner({b, a}) == "a");
        CHECK_FALSE(select_winner({}).has_value());
    }
    SUBCASE("random reply sets") {
        std::mt19937_64 rng(42);
        for (int trial = 0; trial < 300; ++trial) {
            std::vector<BidReply> replies;
            const int n = testgen::pick_int(rng, 1, 10);
            for (int i = 0; i < n; ++i) {
                replies.push_back(BidReply{
                    "q",
                    Bid{"node" + std::to_string(i), 10.0, testgen::grid_real(rng, 0.0, 400.0),
                        testgen::grid_real(rng, 0.0, 1.0)},
                    1});
            }
            // independent argmax over the stated key
            const BidReply* best = nullptr;
            for (const auto& r : replies) {
                if (!best) {
                    best = &r;
                    continue;
                }
                const int rb = static_cast<int>(std::floor(r.bid.confidence / 0.05));
                const int bb = static_cast<int>(std::floor(best->bid.confidence / 0.05));
                if (rb > bb ||
                    (rb == bb && r.bid.unsubscribed_marks > best->bid.unsubscribed_marks) ||
                    (rb == bb && r.bid.unsubscribed_marks == best->bid.unsubscribed_marks &&
                     r.bid.node_id < best->bid.node_id)) {
                    best = &r;
                }
            }
            const std::string expected = best->bid.node_id;
            CHECK(select_winner(replies) == expected);

            std::shuffle(replies.begin(), replies.end(), rng);
            CHECK(select_winner(replies) == expected);
        }
    }
}

TEST_CASE("full flood finds the global argmax over eligible nodes") {
    std::mt19937_64 rng(777);
    SordConfig cfg;
    cfg.ttl_max = 64;
    for (int trial = 0; trial < 40; ++trial) {
        const int n = testgen::pick_int(rng, 8, 16);
        const int k_far = testgen::pick_int(rng, 0, 2);
        const auto ids = make_ids(n);
        const Overlay overlay = build_overlay(ids, 2, k_far, rng());
        Fleet fleet = random_fleet(ids, rng);
        const std::string origin = ids[rng() % ids.size()];

        Query q = basic_query(origin, testgen::grid_real(rng, 10.0, 900.0),
                              testgen::grid_real(rng, 2.0, 20.0), 0);
        q.requirements.os = "linux";
        q.ttl = eccentricity(overlay, origin);

        auto view_of = [&](const std::string& id) { return fleet.view(id); };
        const DiscoveryResult res = discover(origin, q, overlay, view_of, fleet.states, cfg, 0.0);

        // exhaustive evaluation of every node
        std::vector<BidReply> all;
        for (const auto& id : ids) {
            auto reply = evaluate_query(fleet.view(id), q, 0);
            if (reply) all.push_back(*reply);
        }
        std::set<std::string> expected_nodes, got_nodes;
        for (const auto& r : all) expected_nodes.insert(r.bid.node_id);
        for (const auto& r : res.replies) got_nodes.insert(r.bid.node_id);
        CHECK(got_nodes == expected_nodes);
        CHECK(res.winner == select_winner(all));

        if (res.winner) {
            for (const auto& r : res.replies)
                if (r.bid.node_id == *res.winner) CHECK(r.bid.unsubscribed_marks >= q.demand_marks);
        }
        for (const auto& r : res.replies) CHECK(r.hop_count <= q.ttl + 1);
    }
}

TEST_CASE("dedupe keeps evaluations unique and bounds messages") {
    std::mt19937_64 rng(31337);
    SordConfig cfg;
    cfg.ttl_max = 64;
    for (int trial = 0; trial < 50; ++trial) {
        const int n = testgen::pick_int(rng, 6, 20);
        const int k_far = testgen::pick_int(rng, 0, 2);
        const auto ids = make_ids(n);
        const Overlay overlay = build_overlay(ids, 2, k_far, rng());
        Fleet fleet = random_fleet(ids, rng);
        const std::string origin = ids[rng() % ids.size()];
        Query q = basic_query(origin, 1.0, 10.0, testgen::pick_int(rng, 0, 20));

        auto view_of = [&](const std::string& id) { return fleet.view(id); };
        const DiscoveryResult res = discover(origin, q, overlay, view_of, fleet.states, cfg, 0.0);

        long query_messages = 0;
        for (const auto& m : res.messages)
            if (m.kind == "query") ++query_messages;
        CHECK(query_messages <= static_cast<long>(n) * (2 + k_far));
        for (const auto& [id, count] : res.evaluations) CHECK(count <= 1);
    }
}

TEST_CASE("ttl zero reaches only the origin and its direct neighbours") {
    const auto ids = make_ids(8);
    const Overlay overlay = build_overlay(ids, 2, 0, 5);
    std::mt19937_64 rng(3);
    Fleet fleet = random_fleet(ids, rng);
    // make every node eligible so the reply set mirrors the reachable set
    for (auto& [id, f] : fleet.facts) f.os = "linux";
    for (auto& [id, ledger] : fleet.ledgers) ledger = LoadLedger(id, 100.0, 0.0);

    SordConfig cfg;
    const Query q = basic_query("n00", 1.0, 10.0, 0);
    auto view_of = [&](const std::string& id) { return fleet.view(id); };
    const DiscoveryResult res = discover("n00", q, overlay, view_of, fleet.states, cfg, 0.0);

    std::set<std::string> got;
    for (const auto& r : res.replies) got.insert(r.bid.node_id);
    CHECK(got == std::set<std::string>{"n00", "n01", "n07"});
}

TEST_CASE("queries and replies serialize to JSON for trace logs") {
    Query q = basic_query("n00", 250.0, 12.0, 2);
    q.requirements.os = "linux";
    q.requirements.required_libraries = {"blas"};
    const nlohmann::json qj = to_json(q);
    CHECK(qj.at("origin") == "n00");
    CHECK(qj.at("demand_marks") == doctest::Approx(250.0));
    CHECK(qj.at("ttl") == 2);
    CHECK(qj.at("requirements").at("os") == "linux");

    const BidReply reply{q.query_id, Bid{"n03", 12.0, 800.0, 0.75}, 2};
    const nlohmann::json rj = to_json(reply);
    CHECK(rj.at("query_id") == q.query_id);
    CHECK(rj.at("bid").at("node_id") == "n03");
    CHECK(rj.at("bid").at("confidence") == doctest::Approx(0.75));
    CHECK(rj.at("hop_count") == 2);
}

TEST_CASE("no eligible node yields no winner") {
    const auto ids = make_ids(4);
    const Overlay overlay = build_overlay(ids, 2, 0, 5);
    std::mt19937_64 rng(4);
    Fleet fleet = random_fleet(ids, rng);
    Query q = basic_query("n00", 1.0, 10.0, 4);
    q.requirements.required_hardware = {"nonexistent-asic"};

    SordConfig cfg;
    cfg.ttl_max = 8;
    auto view_of = [&](const std::string& id) { return fleet.view(id); };
    const DiscoveryResult res = discover("n00", q, overlay, view_of, fleet.states, cfg, 0.0);
    CHECK_FALSE(res.winner.has_value());
    CHECK(res.replies.empty());
}

TEST_CASE("replies past the collect timeout are dropped") {
    const auto ids = make_ids(8);
    const Overlay overlay = build_overlay(ids, 2, 0, 5);
    std::mt19937_64 rng(6);
    Fleet fleet = random_fleet(ids, rng);
    for (auto& [id, f] : fleet.facts) f.os = "linux";
    for (auto& [id, ledger] : fleet.ledgers) ledger = LoadLedger(id, 100.0, 0.0);

    SordConfig cfg;
    cfg.ttl_max = 16;
    cfg.hop_latency_s = 0.9;
    cfg.collect_timeout_s = 2.0;  // reply arrival needs hops*0.9 + 0.9 <= 2.0

    const Query q = basic_query("n00", 1.0, 10.0, 7);
    auto view_of = [&](const std::string& id) { return fleet.view(id); };
    const DiscoveryResult res = discover("n00", q, overlay, view_of, fleet.states, cfg, 0.0);

    std::set<std::string> got;
    for (const auto& r : res.replies) got.insert(r.bid.node_id);
    // origin plus one hop out: two hops would arrive at 2.7 > 2.0
    CHECK(got == std::set<std::string>{"n00", "n01", "n07"});
    bool saw_undelivered = false;
    for (const auto& m : res.messages) saw_undelivered = saw_undelivered || !m.delivered;
    CHECK(saw_undelivered);
}
