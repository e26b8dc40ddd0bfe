#pragma once

#include "gridsched/ledger.hpp"
#include "gridsched/matcher.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace gridsched {

struct BadDegree : std::runtime_error {
    explicit BadDegree(const std::string& what) : std::runtime_error("bad overlay degree: " + what) {}
};

// Small-world overlay: a ring of close neighbours plus a few seeded-random
// distant links per node. Far links are directed.
struct Overlay {
    std::vector<std::string> nodes;  // ordered; ring follows this order
    int k_close = 0;
    int k_far = 0;
    std::map<std::string, std::vector<std::string>> far_links;

    std::vector<std::string> ring_neighbors(const std::string& id) const;
    // Ring neighbours then far links, duplicate-free, stable order.
    std::vector<std::string> neighbors(const std::string& id) const;
};

// Deterministic for fixed (node_ids, k_close, k_far, seed). k_close must be
// even and smaller than the node count; each node needs enough non-ring
// candidates for its k_far links.
Overlay build_overlay(const std::vector<std::string>& node_ids, int k_close, int k_far,
                      uint64_t seed);

struct Query {
    std::string query_id;
    std::string origin;
    NonVolatileRequirements requirements;
    double demand_marks = 0.0;
    double window_s = 0.0;
    int ttl = 0;
    double min_confidence = 0.0;
};

struct BidReply {
    std::string query_id;
    Bid bid;
    int hop_count = 0;
};

struct SordConfig {
    int ttl_max = 3;
    double collect_timeout_s = 2.0;
    double hop_latency_s = 0.01;
    double min_confidence = 0.0;  // default for queries built by the dispatcher
};

// Per-node protocol state: which query ids this node has already evaluated.
struct SordNodeState {
    std::set<std::string> seen_queries;
};

// The slice of local node state a query needs: non-volatile facts for the
// filter, and a bid for the requested window (policy decides how the bid is
// computed, see the simulation kernel).
struct NodeView {
    const NonVolatileFacts* facts = nullptr;
    std::function<Bid(double window_s)> bid_for_window;
};

struct QueryDelivery {
    std::string to;
    std::string from;
    Query query;
    int hop = 0;
};

struct HandleResult {
    std::optional<BidReply> reply;
    std::vector<QueryDelivery> forwards;
};

// Filter-first evaluation: nodes failing the non-volatile filter return no
// reply (the bid is never computed); eligible bids must clear the query's
// demand and confidence floors.
std::optional<BidReply> evaluate_query(const NodeView& view, const Query& q, int hop);

// The receiving half of the protocol state machine. A repeated query id
// yields no reply and no forwards. Otherwise the node evaluates the query
// and, while ttl > 0, forwards it with ttl-1 to all neighbours except the
// sender.
HandleResult handle_query(SordNodeState& state, const std::string& self, const NodeView& view,
                          const Overlay& overlay, const Query& q, const std::string& from,
                          int hop);

// Deterministic winner: highest confidence bucket (width 0.05), then most
// unsubscribed marks, then lexicographically smallest node id.
int confidence_bucket(double confidence);
std::optional<std::string> select_winner(const std::vector<BidReply>& replies);

struct MessageRecord {
    double time = 0.0;  // send time on the query's clock
    std::string kind;   // "query" | "reply"
    std::string from;
    std::string to;
    std::string query_id;
    int ttl = 0;
    int hop = 0;
    bool delivered = true;  // false when arrival would fall past the collect timeout
};

struct DiscoveryResult {
    std::optional<std::string> winner;
    std::vector<BidReply> replies;  // replies collected within the timeout
    std::vector<MessageRecord> messages;
    std::map<std::string, int> evaluations;  // per node, for dedupe auditing
};

// Runs one query to completion: the origin evaluates itself, fans out to its
// neighbours, and collects replies whose (simulated) arrival falls within
// cfg.collect_timeout_s of `now`. Per-hop latency is cfg.hop_latency_s.
DiscoveryResult discover(const std::string& origin, const Query& q, const Overlay& overlay,
                         const std::function<NodeView(const std::string&)>& view_of,
                         std::map<std::string, SordNodeState>& states, const SordConfig& cfg,
                         double now = 0.0);

nlohmann::json to_json(const Query& q);
nlohmann::json to_json(const BidReply& r);

}  // namespace gridsched
