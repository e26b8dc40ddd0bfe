#include "gridsched/simkernel.hpp"

#include "gridsched/demand.hpp"
#include "gridsched/matcher.hpp"
#include "gridsched/sord.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdio>
#include <limits>
#include <queue>
#include <random>

namespace gridsched {

namespace {

constexpr double kTimeSlop = 1e-9;

enum class EvKind { job_arrival, job_completion_check, message_delivery, beacon_tick, volatile_sample_tick };

struct Ev {
    double time = 0.0;
    uint64_t seq = 0;
    EvKind kind = EvKind::job_arrival;
    int index = 0;        // arrival index or tick index
    std::string node_id;  // owner for checks/ticks, receiver for deliveries
    uint64_t epoch = 0;   // completion checks only
    NodeStateBeacon beacon;

    bool operator>(const Ev& other) const {
        return std::tie(time, seq) > std::tie(other.time, other.seq);
    }
};

struct SimJob {
    std::string job_id;
    std::string app_id;
    std::string app_key;
    double submit_time = 0.0;
    double admit_time = 0.0;
    double due_time = 0.0;
    double window_s = 0.0;
    double true_demand = 0.0;  // hidden from the scheduler
    double consumed = 0.0;
    double booked = 0.0;
    bool missed = false;
    bool alerted = false;
    bool ledger_active = true;  // commitment still on the ledger
};

struct SimNode {
    ComputerProfile profile;
    LoadLedger ledger;
    BeaconTable beacons;
    std::map<std::string, SimJob> running;
    double last_advance = 0.0;
    double busy_in_period = 0.0;
    double busy_total = 0.0;
    double consumed_total = 0.0;
    uint64_t epoch = 0;
    NodeMetrics stats;

    SimNode(ComputerProfile p)
        : profile(std::move(p)), ledger(profile.node_id, profile.nonvolatile.capacity_marks_per_s) {
        stats.node_id = profile.node_id;
    }
};

struct PlannedArrival {
    double time = 0.0;
    std::string app_key;
    double window_s = 0.0;
    std::string origin;
    double true_demand = 0.0;
};

std::string zero_padded(const char* prefix, int value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%06d", prefix, value);
    return buf;
}

struct Kernel {
    const Scenario& sc;
    const SimConfig& cfg;
    Overlay overlay;
    std::map<std::string, SimNode> nodes;
    std::map<std::string, SordNodeState> sord_states;
    std::map<std::string, ApplicationProfile> app_store;  // keyed by "name/version"
    std::map<std::string, const AppSpec*> app_specs;
    std::vector<PlannedArrival> planned;

    std::priority_queue<Ev, std::vector<Ev>, std::greater<Ev>> queue;
    uint64_t next_seq = 0;
    int next_job = 0;
    int next_query = 0;

    RunResult result;

    explicit Kernel(const Scenario& scenario) : sc(scenario), cfg(scenario.config) {
        std::vector<std::string> ids;
        for (const auto& p : sc.nodes) ids.push_back(p.node_id);
        try {
            overlay = build_overlay(ids, sc.overlay.k_close, sc.overlay.k_far, sc.seed);
        } catch (const BadDegree& e) {
            throw ConfigError(e.what());
        }
        for (const auto& p : sc.nodes) nodes.emplace(p.node_id, SimNode(p));
        for (const auto& app : sc.workload.apps) {
            ApplicationProfile profile;
            profile.app_id = compute_app_id(app.name, app.version);
            profile.ipc_level = app.ipc_level;
            profile.requirements = app.requirements;
            profile.declared_demand_marks = app.declared_demand_marks;
            app_store.emplace(app.key(), std::move(profile));
            app_specs.emplace(app.key(), &app);
        }
        result.policy = sc.policy;
        result.execution_model = sc.execution_model;
        result.seed = sc.seed;
        result.duration_s = sc.duration_s;
    }

    void push(Ev e) {
        e.seq = next_seq++;
        queue.push(std::move(e));
    }

    // All workload randomness is drawn here, in arrival order, before the
    // event loop starts.
    void plan_arrivals() {
        std::mt19937_64 rng(sc.seed);
        auto pick_origin = [&]() -> std::string {
            return sc.nodes[rng() % sc.nodes.size()].node_id;
        };
        const auto& arrival = sc.workload.arrival;
        if (arrival.process == ArrivalSpec::Process::poisson) {
            const auto& apps = sc.workload.apps;
            double weight_total = 0.0;
            for (const auto& a : apps) weight_total += a.weight;
            double t = 0.0;
            for (;;) {
                const double u = 1.0 - unit_uniform(rng);  // (0,1]
                t += -std::log(u) / arrival.rate_per_s;
                if (t > sc.duration_s) break;
                double pick = unit_uniform(rng) * weight_total;
                const AppSpec* chosen = &apps.back();
                for (const auto& a : apps) {
                    if (pick < a.weight) {
                        chosen = &a;
                        break;
                    }
                    pick -= a.weight;
                }
                PlannedArrival p;
                p.time = t;
                p.app_key = chosen->key();
                p.window_s = chosen->window->sample(rng);
                p.origin = pick_origin();
                p.true_demand = chosen->true_demand.sample(rng);
                planned.push_back(std::move(p));
            }
        } else {
            for (const auto& entry : arrival.arrivals) {
                if (entry.time > sc.duration_s) continue;
                const AppSpec* spec = app_specs.at(entry.app);
                PlannedArrival p;
                p.time = entry.time;
                p.app_key = entry.app;
                p.window_s = entry.window_s ? *entry.window_s : spec->window->sample(rng);
                p.origin = entry.origin ? *entry.origin : pick_origin();
                p.true_demand = spec->true_demand.sample(rng);
                planned.push_back(std::move(p));
            }
        }
    }

    void trace(nlohmann::json line) { result.trace_lines.push_back(std::move(line)); }

    void account(double t, EventKind kind, const std::string& node_id, const std::string& job_id,
                 nlohmann::json payload) {
        AccountingEvent e;
        e.timestamp = t;
        e.kind = kind;
        e.node_id = node_id;
        e.job_id = job_id;
        e.payload = std::move(payload);
        const AccountingEvent& stored = result.accounting.append(std::move(e));
        nlohmann::json line = to_json(stored);
        line["type"] = "accounting";
        trace(std::move(line));
    }

    double rate_of(const SimNode& node) const { return node.profile.nonvolatile.capacity_marks_per_s; }

    // Advances one node's execution state to `t`. The running set is constant
    // over the interval: arrivals and completions are queue events, so they
    // always punctuate consumption.
    void advance_node(SimNode& node, double t) {
        const double dt = t - node.last_advance;
        if (dt > 0.0) {
            if (!node.running.empty()) {
                node.busy_in_period += dt;
                node.busy_total += dt;
                const double rate = rate_of(node);
                if (sc.execution_model == ExecutionModel::fair_share) {
                    const double share = rate * dt / static_cast<double>(node.running.size());
                    for (auto& [id, job] : node.running) consume_job(node, job, share);
                } else {
                    SimJob* active = earliest_due(node);
                    if (active) consume_job(node, *active, rate * dt);
                }
            }
            node.last_advance = t;
        }
        node.ledger = node.ledger.advance_time(t).ledger;

        for (auto& [id, job] : node.running) {
            if (!job.missed && job.due_time + kTimeSlop < t) {
                job.missed = true;
                node.stats.jobs_missed += 1;
                result.metrics.jobs_missed_deadline += 1;
                account(t, EventKind::job_missed_deadline, node.profile.node_id, job.job_id,
                        {{"app_id", job.app_id},
                         {"due_time", job.due_time},
                         {"consumed_marks", job.consumed},
                         {"booked_marks", job.booked}});
            }
            if (auto alert = integrity_check(node.profile.node_id, job.job_id, job.consumed,
                                             job.booked, cfg.monitor.integrity_factor, t,
                                             job.alerted)) {
                job.alerted = true;
                result.metrics.integrity_alerts += 1;
                account(t, EventKind::integrity_alert, node.profile.node_id, job.job_id,
                        {{"app_id", job.app_id},
                         {"observed_marks", alert->observed_marks},
                         {"threshold_marks", alert->threshold_marks}});
            }
        }
    }

    void consume_job(SimNode& node, SimJob& job, double marks) {
        job.consumed += marks;
        node.consumed_total += marks;
        if (job.ledger_active) {
            auto res = node.ledger.consume(job.job_id, marks);
            node.ledger = std::move(res.ledger);
            if (res.completed) job.ledger_active = false;
        }
    }

    SimJob* earliest_due(SimNode& node) {
        SimJob* best = nullptr;
        for (auto& [id, job] : node.running) {
            if (!best || job.due_time < best->due_time ||
                (job.due_time == best->due_time && job.job_id < best->job_id)) {
                best = &job;
            }
        }
        return best;
    }

    void advance_all(double t) {
        for (auto& [id, node] : nodes) advance_node(node, t);
    }

    void schedule_completion_check(SimNode& node, double now) {
        node.epoch += 1;
        if (node.running.empty()) return;
        const double rate = rate_of(node);
        double eta = std::numeric_limits<double>::infinity();
        if (sc.execution_model == ExecutionModel::fair_share) {
            const double n = static_cast<double>(node.running.size());
            for (const auto& [id, job] : node.running)
                eta = std::min(eta, (job.true_demand - job.consumed) * n / rate);
        } else {
            const SimJob* active = earliest_due(node);
            eta = (active->true_demand - active->consumed) / rate;
        }
        eta = std::max(eta, 0.0);
        push(Ev{now + eta, 0, EvKind::job_completion_check, 0, node.profile.node_id, node.epoch, {}});
    }

    NodeView view_of(SimNode& node) {
        NodeView view;
        view.facts = &node.profile.nonvolatile;
        if (sc.policy == SchedulerPolicy::subscribed_load) {
            view.bid_for_window = [&node](double w) { return node.ledger.make_bid(w); };
        } else {
            view.bid_for_window = [this, &node](double w) {
                const double spot = node.profile.volatile_sample.cpu_busy_fraction;
                return Bid{node.profile.node_id, w, (1.0 - spot) * rate_of(node) * w, 1.0};
            };
        }
        return view;
    }

    void handle_arrival(const PlannedArrival& a, double now) {
        result.metrics.jobs_submitted += 1;
        ApplicationProfile& profile = app_store.at(a.app_key);
        const AppSpec& spec = *app_specs.at(a.app_key);

        const DemandEstimate est =
            estimate_demand(profile, cfg.demand.quantile, cfg.demand.safety_factor);
        const double booked = est.booked_marks;
        const double confidence =
            on_time_confidence(profile, booked, cfg.demand.cold_start_confidence);
        const std::string job_id = zero_padded("j", next_job++);

        Query q;
        q.query_id = zero_padded("q", next_query++);
        q.origin = a.origin;
        q.requirements = spec.requirements;
        q.demand_marks = booked;
        q.window_s = a.window_s;
        q.ttl = std::min(cfg.effective_query_ttl(), cfg.sord.ttl_max);
        q.min_confidence = cfg.sord.min_confidence;

        auto views = [this](const std::string& id) { return view_of(nodes.at(id)); };
        DiscoveryResult dres = discover(a.origin, q, overlay, views, sord_states, cfg.sord, now);
        for (const auto& m : dres.messages) {
            if (m.kind == "query")
                result.metrics.query_messages += 1;
            else
                result.metrics.reply_messages += 1;
            trace({{"type", "message"},
                   {"kind", m.kind},
                   {"time", m.time},
                   {"from", m.from},
                   {"to", m.to},
                   {"query_id", m.query_id},
                   {"ttl", m.ttl},
                   {"hop", m.hop},
                   {"delivered", m.delivered}});
        }

        const double due = now + a.window_s;
        auto try_admit = [&](const std::string& node_id) {
            SimNode& candidate = nodes.at(node_id);
            if (sc.policy == SchedulerPolicy::spot_load) {
                candidate.ledger = candidate.ledger.admit_unchecked(job_id, profile.app_id, booked,
                                                                    due, confidence);
                return true;
            }
            auto admitted = candidate.ledger.admit(job_id, profile.app_id, booked, due, confidence);
            if (!admitted) return false;
            candidate.ledger = std::move(*admitted);
            return true;
        };
        const std::optional<std::string> placed = place_with_retry(dres.replies, try_admit);

        if (!placed) {
            result.metrics.jobs_rejected += 1;
            account(now, EventKind::job_rejected, a.origin, job_id,
                    {{"app_id", profile.app_id},
                     {"reason", dres.winner ? "capacity_race" : "no_eligible_node"},
                     {"demand_marks", booked},
                     {"window_s", a.window_s}});
            return;
        }

        SimNode& host = nodes.at(*placed);
        SimJob job;
        job.job_id = job_id;
        job.app_id = profile.app_id;
        job.app_key = a.app_key;
        job.submit_time = now;
        job.admit_time = now;
        job.due_time = due;
        job.window_s = a.window_s;
        job.true_demand = a.true_demand;
        job.booked = booked;
        host.running.emplace(job_id, std::move(job));
        host.stats.jobs_admitted += 1;
        result.metrics.jobs_admitted += 1;
        account(now, EventKind::job_admitted, *placed, job_id,
                {{"app_id", profile.app_id},
                 {"booked_marks", booked},
                 {"due_time", due},
                 {"window_s", a.window_s},
                 {"submit_time", now},
                 {"on_time_prob", confidence}});
        schedule_completion_check(host, now);
    }

    void handle_completion_check(const Ev& e) {
        SimNode& node = nodes.at(e.node_id);
        if (e.epoch != node.epoch) return;  // superseded by a later reschedule

        std::vector<std::string> done;
        for (const auto& [id, job] : node.running) {
            if (job.consumed >= job.true_demand - 1e-9 * std::max(1.0, job.true_demand))
                done.push_back(id);
        }
        for (const auto& id : done) complete_job(node, node.running.at(id), e.time);
        if (!done.empty()) schedule_completion_check(node, e.time);
    }

    void complete_job(SimNode& node, SimJob& job, double now) {
        const bool on_time = now <= job.due_time + kTimeSlop;
        account(now, EventKind::job_completed, node.profile.node_id, job.job_id,
                {{"app_id", job.app_id},
                 {"actual_marks", job.consumed},
                 {"booked_marks", job.booked},
                 {"due_time", job.due_time},
                 {"turnaround_s", now - job.submit_time},
                 {"on_time", on_time}});
        result.metrics.jobs_completed += 1;
        if (on_time) result.metrics.jobs_on_time += 1;
        node.stats.jobs_completed += 1;

        ApplicationProfile& profile = app_store.at(job.app_key);
        profile = record_run(profile, RunRecord{job.consumed, now - job.admit_time,
                                                node.profile.node_id, now});

        if (job.ledger_active) {
            const Commitment* c = node.ledger.find(job.job_id);
            if (c && c->remaining_marks > 0.0) {
                auto res = node.ledger.consume(job.job_id, c->remaining_marks);
                node.ledger = std::move(res.ledger);
            }
        }
        const std::string id = job.job_id;
        node.running.erase(id);
    }

    void handle_beacon_tick(const Ev& e) {
        SimNode& node = nodes.at(e.node_id);
        const NodeStateBeacon beacon = make_beacon(node.profile, node.ledger, e.time);
        node.stats.beacons_emitted += 1;
        trace({{"type", "beacon"},
               {"time", e.time},
               {"node_id", beacon.node_id},
               {"cpu_busy_fraction", beacon.cpu_busy_fraction},
               {"subscribed_marks", beacon.subscribed_marks},
               {"unsubscribed_1min_marks", beacon.unsubscribed_1min_marks}});
        for (const auto& nb : overlay.neighbors(e.node_id)) {
            result.metrics.beacon_messages += 1;
            Ev delivery;
            delivery.time = e.time + cfg.sord.hop_latency_s;
            delivery.kind = EvKind::message_delivery;
            delivery.node_id = nb;
            delivery.beacon = beacon;
            push(std::move(delivery));
        }
        schedule_tick(EvKind::beacon_tick, e.node_id, e.index + 1, cfg.monitor.beacon_period_s);
    }

    void handle_sample_tick(const Ev& e) {
        SimNode& node = nodes.at(e.node_id);
        const double busy =
            std::clamp(node.busy_in_period / cfg.sample_period_s, 0.0, 1.0);
        node.busy_in_period = 0.0;
        VolatileSample sample;
        sample.timestamp = e.time;
        sample.cpu_busy_fraction = busy;
        sample.free_memory_mb = node.profile.nonvolatile.memory_mb;
        sample.subscribed_marks = node.ledger.subscribed_marks();
        node.profile = update_volatile(node.profile, sample);

        result.samples.push_back(SampleRow{e.time, node.profile.node_id, busy,
                                           sample.subscribed_marks, node.ledger.unsubscribed(60.0)});
        trace({{"type", "sample"},
               {"time", e.time},
               {"node_id", node.profile.node_id},
               {"cpu_busy_fraction", busy},
               {"subscribed_marks", sample.subscribed_marks}});
        schedule_tick(EvKind::volatile_sample_tick, e.node_id, e.index + 1, cfg.sample_period_s);
    }

    // Tick times are index * period, not accumulated sums, so long runs do
    // not drift.
    void schedule_tick(EvKind kind, const std::string& node_id, int index, double period) {
        const double t = static_cast<double>(index) * period;
        if (t > sc.duration_s) return;
        Ev e;
        e.time = t;
        e.kind = kind;
        e.index = index;
        e.node_id = node_id;
        push(std::move(e));
    }

    RunResult run() {
        plan_arrivals();
        for (size_t i = 0; i < planned.size(); ++i) {
            Ev e;
            e.time = planned[i].time;
            e.kind = EvKind::job_arrival;
            e.index = static_cast<int>(i);
            push(std::move(e));
        }
        for (const auto& [id, node] : nodes) {
            schedule_tick(EvKind::volatile_sample_tick, id, 1, cfg.sample_period_s);
            schedule_tick(EvKind::beacon_tick, id, 1, cfg.monitor.beacon_period_s);
        }

        while (!queue.empty()) {
            const Ev e = queue.top();
            if (e.time > sc.duration_s) break;
            queue.pop();
            advance_all(e.time);
            switch (e.kind) {
                case EvKind::job_arrival:
                    handle_arrival(planned[static_cast<size_t>(e.index)], e.time);
                    break;
                case EvKind::job_completion_check:
                    handle_completion_check(e);
                    break;
                case EvKind::message_delivery:
                    nodes.at(e.node_id).beacons.observe(e.beacon);
                    break;
                case EvKind::beacon_tick:
                    handle_beacon_tick(e);
                    break;
                case EvKind::volatile_sample_tick:
                    handle_sample_tick(e);
                    break;
            }
        }
        advance_all(sc.duration_s);

        for (auto& [id, node] : nodes) {
            node.stats.busy_seconds = node.busy_total;
            node.stats.utilization = node.busy_total / sc.duration_s;
            node.stats.consumed_marks = node.consumed_total;
            result.per_node.push_back(node.stats);
            for (const auto& [peer, beacon] : node.beacons.all())
                result.beacon_view[id][peer] = beacon.timestamp;
        }
        result.sla = sla_report(result.accounting, sc.duration_s);
        return std::move(result);
    }
};

}  // namespace

nlohmann::json RunResult::report_json() const {
    nlohmann::json sla_json = nlohmann::json::object();
    for (const auto& [app_id, row] : sla) {
        sla_json[app_id] = {{"jobs", row.jobs},
                            {"on_time_fraction", row.on_time_fraction},
                            {"mean_turnaround_s", row.mean_turnaround_s},
                            {"rejected", row.rejected}};
    }
    nlohmann::json per_node_json = nlohmann::json::array();
    for (const auto& n : per_node) {
        per_node_json.push_back({{"node_id", n.node_id},
                                 {"utilization", n.utilization},
                                 {"busy_seconds", n.busy_seconds},
                                 {"consumed_marks", n.consumed_marks},
                                 {"jobs_admitted", n.jobs_admitted},
                                 {"jobs_completed", n.jobs_completed},
                                 {"jobs_missed", n.jobs_missed},
                                 {"beacons_emitted", n.beacons_emitted}});
    }
    return {{"scenario",
             {{"seed", seed},
              {"duration_s", duration_s},
              {"policy", to_string(policy)},
              {"execution_model", to_string(execution_model)},
              {"node_count", per_node.size()}}},
            {"metrics",
             {{"jobs_submitted", metrics.jobs_submitted},
              {"jobs_admitted", metrics.jobs_admitted},
              {"jobs_rejected", metrics.jobs_rejected},
              {"jobs_completed", metrics.jobs_completed},
              {"jobs_on_time", metrics.jobs_on_time},
              {"jobs_missed_deadline", metrics.jobs_missed_deadline},
              {"integrity_alerts", metrics.integrity_alerts},
              {"query_messages", metrics.query_messages},
              {"reply_messages", metrics.reply_messages},
              {"beacon_messages", metrics.beacon_messages}}},
            {"sla", std::move(sla_json)},
            {"per_node", std::move(per_node_json)}};
}

std::string RunResult::traces_jsonl() const {
    std::string out;
    for (const auto& line : trace_lines) {
        out += line.dump();
        out += '\n';
    }
    return out;
}

std::string RunResult::samples_csv() const {
    std::string out = "time,node_id,cpu_busy_fraction,subscribed_marks,unsubscribed_60s_marks\n";
    char buf[256];
    for (const auto& row : samples) {
        std::snprintf(buf, sizeof(buf), "%.6f,%s,%.6f,%.6f,%.6f\n", row.time,
                      row.node_id.c_str(), row.cpu_busy_fraction, row.subscribed_marks,
                      row.unsubscribed_60s_marks);
        out += buf;
    }
    return out;
}

RunResult run(const Scenario& scenario) {
    Kernel kernel(scenario);
    return kernel.run();
}

std::optional<std::string> place_with_retry(
    std::vector<BidReply> replies, const std::function<bool(const std::string&)>& try_admit) {
    for (int attempt = 0; attempt < 2; ++attempt) {
        const std::optional<std::string> target = select_winner(replies);
        if (!target) return std::nullopt;
        if (try_admit(*target)) return target;
        std::erase_if(replies, [&](const BidReply& r) { return r.bid.node_id == *target; });
    }
    return std::nullopt;
}

}  // namespace gridsched
