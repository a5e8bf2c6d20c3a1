#pragma once

// Discrete-time event calculus: effect rules, action occurrences, and
// HoldsAt/Clipped queries over an append-mostly timeline.

#include <compare>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cpsmon/util.hpp"

namespace cpsmon::ec {

// Actions are plain labels; per-entity actions use a ":subject" suffix,
// e.g. "cross_bar_en:gps" (see act()).
using ActionLabel = std::string;

inline ActionLabel act(const std::string& name, const std::string& subject) {
    return subject.empty() ? name : name + ":" + subject;
}

struct FluentId {
    std::string name;
    std::string subject;  // optional entity, e.g. which sensor

    auto operator<=>(const FluentId&) const = default;
    std::string str() const { return subject.empty() ? name : name + ":" + subject; }
};

inline FluentId fluent(const std::string& name, const std::string& subject = "") {
    return FluentId{name, subject};
}

enum class RuleKind { Initiates, Terminates };

// Snapshot recorded with an occurrence at its trigger tick; guards are pure
// functions of this map, so fluent derivation stays replayable from the log.
using OccurrenceContext = std::map<std::string, std::string>;
using Guard = std::function<bool(const OccurrenceContext&)>;

struct EcRule {
    RuleKind kind = RuleKind::Initiates;
    ActionLabel trigger;
    FluentId fluent;
    Guard guard;  // empty = unconditional
    bool applies(const OccurrenceContext& ctx) const { return !guard || guard(ctx); }
};

class RuleSet {
public:
    // Throws ConflictingRule if the same (trigger, fluent) pair would both
    // initiate and terminate.
    void add(EcRule rule);
    void add(RuleKind kind, const ActionLabel& trigger, const FluentId& f, Guard guard = {});

    const std::vector<EcRule>& rules() const { return rules_; }
    bool has_rule(RuleKind kind, const ActionLabel& trigger, const FluentId& f) const;
    const std::vector<const EcRule*>& for_trigger(const ActionLabel& action) const;
    std::vector<const EcRule*> initiators_of(const FluentId& f) const;

private:
    std::vector<EcRule> rules_;
    std::map<ActionLabel, std::vector<const EcRule*>> by_trigger_;
    void reindex();
};

struct Occurrence {
    Tick tick = 0;
    ActionLabel action;
    OccurrenceContext context;
};

class Timeline {
public:
    explicit Timeline(Tick horizon) : horizon_(horizon) {}

    Tick horizon() const { return horizon_; }
    void set_initially(const FluentId& f) { initially_.insert(f); }
    bool initially(const FluentId& f) const { return initially_.count(f) != 0; }
    const std::set<FluentId>& initial_fluents() const { return initially_; }

    // Records an occurrence. Duplicate (tick, action) pairs are an error.
    void record_happens(const ActionLabel& action, Tick t, OccurrenceContext ctx = {});

    // Occurrences sorted by (tick, action); materialized lazily.
    const std::vector<Occurrence>& occurrences() const;
    // Append-only store in recording order; indices into it are stable.
    const std::vector<Occurrence>& store() const { return store_; }

    bool happens(const ActionLabel& action, Tick t) const;
    std::vector<Tick> occurrence_ticks(const ActionLabel& action) const;
    // Tick-sorted indices into store() for one action; null if none.
    const std::vector<std::uint32_t>* action_index(const ActionLabel& action) const;

private:
    Tick horizon_;
    std::vector<Occurrence> store_;
    std::map<ActionLabel, std::vector<std::uint32_t>> by_action_;
    std::set<FluentId> initially_;
    mutable std::vector<Occurrence> sorted_cache_;
    mutable bool sorted_dirty_ = false;
};

struct FluentState {
    FluentId fluent;
    bool holds = false;
    Tick since = 0;  // tick the current value was established
};

// Query engine over (rules, timeline). Keeps a per-fluent index of effective
// initiation/termination ticks, extended incrementally as the timeline grows.
class Engine {
public:
    Engine(const RuleSet& rules, const Timeline& timeline);

    // Registering fluents defines the queryable alphabet; rules and
    // InitiallyP declarations register implicitly.
    void declare_fluent(const FluentId& f) { declared_.insert(f); }
    bool known_fluent(const FluentId& f) const;
    std::vector<FluentId> known_fluents() const;

    bool holds_at(const FluentId& f, Tick t) const;
    // True iff a terminating occurrence for f lies strictly within (t1, t2].
    bool clipped(Tick t1, const FluentId& f, Tick t2) const;
    FluentState state_at(const FluentId& f, Tick t) const;
    // Fluents whose value changes at exactly tick t (vs. t-1).
    std::vector<FluentState> changes_at(Tick t) const;

    const RuleSet& rules() const { return rules_; }
    const Timeline& timeline() const { return timeline_; }

private:
    struct FluentIndex {
        std::vector<Tick> inits;
        std::vector<Tick> terms;
    };
    void ensure_index() const;
    const FluentIndex* index_for(const FluentId& f) const;
    void check_known(const FluentId& f) const;

    const RuleSet& rules_;
    const Timeline& timeline_;
    std::set<FluentId> declared_;
    mutable std::map<FluentId, FluentIndex> index_;
    mutable std::size_t indexed_count_ = 0;
};

}  // namespace cpsmon::ec
