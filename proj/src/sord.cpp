#include "gridsched/sord.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <random>

namespace gridsched {

namespace {

int index_of(const std::vector<std::string>& nodes, const std::string& id) {
    auto it = std::find(nodes.begin(), nodes.end(), id);
    if (it == nodes.end()) throw std::invalid_argument("node not in overlay: " + id);
    return static_cast<int>(it - nodes.begin());
}

}  // namespace

std::vector<std::string> Overlay::ring_neighbors(const std::string& id) const {
    const int n = static_cast<int>(nodes.size());
    const int i = index_of(nodes, id);
    std::vector<std::string> out;
    for (int o = 1; o <= k_close / 2; ++o) {
        out.push_back(nodes[(i - o + n) % n]);
        out.push_back(nodes[(i + o) % n]);
    }
    return out;
}

std::vector<std::string> Overlay::neighbors(const std::string& id) const {
    std::vector<std::string> out = ring_neighbors(id);
    auto far = far_links.find(id);
    if (far != far_links.end()) {
        for (const auto& f : far->second)
            if (std::find(out.begin(), out.end(), f) == out.end()) out.push_back(f);
    }
    return out;
}

Overlay build_overlay(const std::vector<std::string>& node_ids, int k_close, int k_far,
                      uint64_t seed) {
    const int n = static_cast<int>(node_ids.size());
    if (n == 0) throw BadDegree("no nodes");
    if (k_close < 0 || k_close % 2 != 0) throw BadDegree("k_close must be even and non-negative");
    if (k_close >= n) throw BadDegree("k_close must be smaller than the node count");
    if (k_far < 0) throw BadDegree("k_far must be non-negative");

    Overlay overlay;
    overlay.nodes = node_ids;
    overlay.k_close = k_close;
    overlay.k_far = k_far;

    std::mt19937_64 rng(seed);
    for (const auto& id : node_ids) {
        const auto ring = overlay.ring_neighbors(id);
        std::vector<std::string> candidates;
        for (const auto& other : node_ids) {
            if (other == id) continue;
            if (std::find(ring.begin(), ring.end(), other) != ring.end()) continue;
            candidates.push_back(other);
        }
        if (static_cast<int>(candidates.size()) < k_far)
            throw BadDegree("not enough candidates for " + std::to_string(k_far) +
                            " far links at node " + id);
        std::vector<std::string> links;
        for (int j = 0; j < k_far; ++j) {
            const size_t pick = static_cast<size_t>(rng() % candidates.size());
            links.push_back(candidates[pick]);
            candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(pick));
        }
        overlay.far_links[id] = std::move(links);
    }
    return overlay;
}

std::optional<BidReply> evaluate_query(const NodeView& view, const Query& q, int hop) {
    if (!matches(q.requirements, *view.facts)) return std::nullopt;
    Bid bid = view.bid_for_window(q.window_s);
    if (bid.confidence < q.min_confidence) return std::nullopt;
    if (bid.unsubscribed_marks < q.demand_marks) return std::nullopt;
    return BidReply{q.query_id, std::move(bid), hop};
}

HandleResult handle_query(SordNodeState& state, const std::string& self, const NodeView& view,
                          const Overlay& overlay, const Query& q, const std::string& from,
                          int hop) {
    HandleResult result;
    if (!state.seen_queries.insert(q.query_id).second) return result;  // dedupe

    result.reply = evaluate_query(view, q, hop);

    if (q.ttl > 0) {
        Query forwarded = q;
        forwarded.ttl = q.ttl - 1;
        for (const auto& nb : overlay.neighbors(self)) {
            if (nb == from) continue;
            result.forwards.push_back(QueryDelivery{nb, self, forwarded, hop + 1});
        }
    }
    return result;
}

int confidence_bucket(double confidence) {
    return static_cast<int>(std::floor(confidence / 0.05));
}

namespace {

// Strict "a beats b" under the selection key.
bool beats(const BidReply& a, const BidReply& b) {
    const int ba = confidence_bucket(a.bid.confidence);
    const int bb = confidence_bucket(b.bid.confidence);
    if (ba != bb) return ba > bb;
    if (a.bid.unsubscribed_marks != b.bid.unsubscribed_marks)
        return a.bid.unsubscribed_marks > b.bid.unsubscribed_marks;
    return a.bid.node_id < b.bid.node_id;
}

}  // namespace

std::optional<std::string> select_winner(const std::vector<BidReply>& replies) {
    if (replies.empty()) return std::nullopt;
    const BidReply* best = &replies.front();
    for (const auto& r : replies)
        if (beats(r, *best)) best = &r;
    return best->bid.node_id;
}

DiscoveryResult discover(const std::string& origin, const Query& q, const Overlay& overlay,
                         const std::function<NodeView(const std::string&)>& view_of,
                         std::map<std::string, SordNodeState>& states, const SordConfig& cfg,
                         double now) {
    if (q.ttl < 0 || q.ttl > cfg.ttl_max)
        throw std::invalid_argument("query ttl outside [0, ttl_max]");
    if (!(q.demand_marks > 0.0) || !(q.window_s > 0.0))
        throw std::invalid_argument("query demand and window must be positive");

    DiscoveryResult result;
    const double cutoff = now + cfg.collect_timeout_s;

    // The origin evaluates itself; loops back to it are then deduped.
    states[origin].seen_queries.insert(q.query_id);
    result.evaluations[origin] += 1;
    if (auto self_reply = evaluate_query(view_of(origin), q, 0)) {
        result.replies.push_back(std::move(*self_reply));
    }

    struct Pending {
        double time;  // delivery time
        uint64_t seq;
        QueryDelivery delivery;
        bool operator>(const Pending& other) const {
            return std::tie(time, seq) > std::tie(other.time, other.seq);
        }
    };
    std::priority_queue<Pending, std::vector<Pending>, std::greater<Pending>> queue;
    uint64_t seq = 0;

    auto send_query = [&](const QueryDelivery& d, double send_time) {
        const double arrival = send_time + cfg.hop_latency_s;
        result.messages.push_back(MessageRecord{send_time, "query", d.from, d.to, d.query.query_id,
                                                d.query.ttl, d.hop, arrival <= cutoff});
        queue.push(Pending{arrival, seq++, d});
    };

    for (const auto& nb : overlay.neighbors(origin))
        send_query(QueryDelivery{nb, origin, q, 1}, now);

    while (!queue.empty()) {
        const Pending p = queue.top();
        queue.pop();
        if (p.time > cutoff) continue;  // arrives too late to matter

        auto& state = states[p.delivery.to];
        const bool fresh = state.seen_queries.count(p.delivery.query.query_id) == 0;
        HandleResult hr = handle_query(state, p.delivery.to, view_of(p.delivery.to), overlay,
                                       p.delivery.query, p.delivery.from, p.delivery.hop);
        if (fresh) result.evaluations[p.delivery.to] += 1;

        if (hr.reply) {
            const double arrival = p.time + cfg.hop_latency_s;
            result.messages.push_back(MessageRecord{p.time, "reply", p.delivery.to, origin,
                                                    q.query_id, 0, p.delivery.hop,
                                                    arrival <= cutoff});
            if (arrival <= cutoff) result.replies.push_back(std::move(*hr.reply));
        }
        for (const auto& fwd : hr.forwards) send_query(fwd, p.time);
    }

    result.winner = select_winner(result.replies);
    return result;
}

nlohmann::json to_json(const Query& q) {
    nlohmann::json req;
    if (q.requirements.os) req["os"] = *q.requirements.os;
    if (q.requirements.arch) req["arch"] = *q.requirements.arch;
    req["min_memory_mb"] = q.requirements.min_memory_mb;
    req["libraries"] = q.requirements.required_libraries;
    req["hardware"] = q.requirements.required_hardware;
    return {{"query_id", q.query_id},   {"origin", q.origin},
            {"requirements", req},      {"demand_marks", q.demand_marks},
            {"window_s", q.window_s},   {"ttl", q.ttl},
            {"min_confidence", q.min_confidence}};
}

nlohmann::json to_json(const BidReply& r) {
    return {{"query_id", r.query_id}, {"bid", to_json(r.bid)}, {"hop_count", r.hop_count}};
}

}  // namespace gridsched
