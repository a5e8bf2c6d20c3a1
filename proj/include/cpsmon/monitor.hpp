#pragma once

// Monitor abstraction: detection predicates over monitored streams, behaviour
// patterns over the event-calculus timeline, the monitor dependence graph,
// and the deterministic per-tick scheduler.

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cpsmon/ec.hpp"
#include "cpsmon/ec_pattern.hpp"
#include "cpsmon/streams.hpp"
#include "cpsmon/util.hpp"

namespace cpsmon::mon {

struct BadPrefix {
    std::string stream_id;
    Tick from = 0;
    Tick to = 0;  // closed interval
    std::vector<streams::Sample> samples;
    std::string predicate_id;
};

enum class VerdictStatus { Holds, Rejected };

struct SafetyVerdict {
    VerdictStatus status = VerdictStatus::Holds;
    std::vector<BadPrefix> witnesses;  // non-empty iff Rejected
    Tick at = 0;
};

// Pure check over a stream window slice; true = safe. `at` is the evaluation
// tick (the witness's closing tick on re-runs), so checks that reason about
// sample age stay reproducible from the stored slice alone.
using PredicateFn = std::function<bool(std::span<const streams::Sample>, Tick at)>;

enum class Cadence { OnSample, EveryTick };

struct DetectionPredicate {
    std::string id;
    std::string stream_id;
    Cadence cadence = Cadence::OnSample;
    PredicateFn check;
};

struct MonitorEvent {
    Tick tick = 0;
    std::string source;
    std::string target;
    std::string label;
    std::map<std::string, std::string> payload;
    bool actuation = false;  // delivered over a mitigate edge
    Tick visible_at = 0;
    std::int64_t seq = 0;
};

class Monitor {
public:
    Monitor(std::string id, std::vector<std::string> language);

    const std::string& id() const { return id_; }
    const std::vector<std::string>& language() const { return language_; }

    // Construction interface; frozen at simulation start (Condition 2).
    void add_predicate(DetectionPredicate p);
    void add_pattern(ec::Pattern p);
    void freeze(const ec::Engine& engine);
    bool frozen() const { return frozen_; }

    // Per-tick pattern bookkeeping; call once per tick after the monitor ran.
    void step_patterns(Tick t);

    // Holds iff every predicate is safe and every pattern is
    // satisfied-or-pending; Rejected collects one witness per failure.
    SafetyVerdict evaluate(const streams::MonitoredStreams& ms, Tick at) const;

    const std::vector<DetectionPredicate>& predicates() const { return predicates_; }
    const std::vector<ec::Pattern>& patterns() const { return patterns_; }
    std::vector<std::pair<std::string, ec::PatternOutcome>> pattern_outcomes() const;

    // Mailbox.
    void deliver(MonitorEvent ev);
    std::vector<MonitorEvent> drain(Tick now);

private:
    void check_not_frozen() const;

    std::string id_;
    std::vector<std::string> language_;
    std::vector<DetectionPredicate> predicates_;
    std::vector<ec::Pattern> patterns_;
    std::vector<std::unique_ptr<ec::PatternTracker>> trackers_;
    std::vector<MonitorEvent> mailbox_;
    bool frozen_ = false;
};

enum class EdgeKind { Observe, Event, Mitigate };
enum class Grouping { Sequential, Parallel };

struct Edge {
    std::string from;
    std::string to;
    EdgeKind kind = EdgeKind::Observe;
    Grouping grouping = Grouping::Sequential;
};

// G = (system vertices, monitors, edges). Monitors evaluate in registration
// order; sequential event edges deliver same-tick (and must point forward in
// that order), parallel edges deliver next-tick.
class MonitorGraph {
public:
    void add_system_vertex(const std::string& id);
    void add_monitor(Monitor* monitor);
    void add_edge(const std::string& from, const std::string& to, EdgeKind kind, Grouping grouping);

    // Structural checks; throws CycleWithoutDelay for a same-tick event loop.
    void validate() const;

    bool has_vertex(const std::string& id) const;
    Monitor* monitor(const std::string& id) const;
    const std::vector<Monitor*>& monitors() const { return monitors_; }
    const std::vector<Edge>& edges() const { return edges_; }
    const std::vector<std::string>& system_vertices() const { return system_; }

    // Copies the event to each successor mailbox (event edges) and marks
    // mitigate-edge deliveries as actuation commands. Returns the delivered
    // copies; an empty result means no route (callers log the drop).
    std::vector<MonitorEvent> propagate(MonitorEvent event);

private:
    int monitor_order(const std::string& id) const;

    std::vector<std::string> system_;
    std::vector<Monitor*> monitors_;
    std::vector<Edge> edges_;
    std::int64_t next_seq_ = 0;
};

// Domain half of a monitor: consumes plant observations, updates fluents and
// streams, emits events. Implemented by hrim/i2m/eim.
class MonitorAgent {
public:
    virtual ~MonitorAgent() = default;
    virtual Monitor& core() = 0;
    virtual void step(Tick t) = 0;
};

class Scheduler {
public:
    using ActuationSink = std::function<void(const MonitorEvent&)>;
    using DropSink = std::function<void(const MonitorEvent&)>;

    Scheduler(MonitorGraph& graph, std::vector<MonitorAgent*> agents, ActuationSink on_actuation,
              DropSink on_drop = {});

    // Evaluates each monitor once, in fixed order. Events emitted with emit()
    // during an agent's step are propagated immediately, so sequential
    // successors see them the same tick.
    std::vector<std::pair<std::string, SafetyVerdict>> step_all(const streams::MonitoredStreams& ms,
                                                                Tick at);

    void emit(MonitorEvent ev);

private:
    MonitorGraph& graph_;
    std::vector<MonitorAgent*> agents_;
    ActuationSink on_actuation_;
    DropSink on_drop_;
};

}  // namespace cpsmon::mon
