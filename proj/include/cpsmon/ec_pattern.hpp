#pragma once

// Sequential event patterns over an event-calculus timeline: a trigger
// occurrence binds time variables, consequent clauses must then be
// satisfiable within the pattern's deadline. Patterns come in three shapes:
// static (InitiallyP / rule assertions), tick-universal state invariants, and
// trigger/consequent sequences.

#include <optional>
#include <string>
#include <vector>

#include "cpsmon/ec.hpp"

namespace cpsmon::ec {

enum class ClauseKind {
    Happens,
    HoldsAt,
    NotHoldsAt,
    ClippedSince,     // fluent terminated within (0, T]
    NotClippedSince,  // no termination within (0, T]
    AbsentThroughout, // fluent holds at no tick of (T - window, T]
    InitiallyP,
    RuleExists,
    AnyOf,
};

struct Clause {
    ClauseKind kind = ClauseKind::Happens;
    ActionLabel action;
    FluentId fluent;
    RuleKind rule_kind = RuleKind::Initiates;
    int tvar = -1;    // variable bound (Happens) or referenced (state clauses)
    int bind_to = -1; // Happens in consequent: occurrence required at exactly t[bind_to]+offset
    Tick offset = 0;
    Tick window = 0;  // AbsentThroughout span
    std::vector<std::vector<Clause>> alternatives;  // AnyOf

    int index = 0;  // 1-based position in the pattern, assigned by Pattern
};

// Clause builders.
Clause happens(const ActionLabel& a, int tvar);
Clause happens_at(const ActionLabel& a, int bind_to, Tick offset);
Clause holds_at(const FluentId& f, int tvar, Tick offset = 0);
Clause not_holds_at(const FluentId& f, int tvar, Tick offset = 0);
Clause not_clipped_since(const FluentId& f, int tvar, Tick offset = 0);
Clause absent_throughout(const FluentId& f, int tvar, Tick offset, Tick window);
Clause initially_p(const FluentId& f);
Clause rule_exists(RuleKind kind, const ActionLabel& a, const FluentId& f);
Clause any_of(std::vector<std::vector<Clause>> alternatives);

enum class PatternStatus { Satisfied, Violated, Pending };

struct PatternOutcome {
    PatternStatus status = PatternStatus::Pending;
    int failing_clause = 0;       // 1-based; 0 when not violated
    Tick violation_tick = -1;     // trigger tick of the first violated instance
    std::int64_t trigger_count = 0;
    std::int64_t pending_count = 0;

    bool fired() const { return trigger_count > 0 && status == PatternStatus::Satisfied; }
};

class Pattern {
public:
    // Static pattern: InitiallyP / RuleExists clauses only.
    static Pattern statics(std::string name, std::vector<Clause> clauses);
    // Invariant checked at every tick t (tvar 0 = t): antecedent gates consequent.
    static Pattern tick_universal(std::string name, std::vector<Clause> antecedent,
                                  std::vector<Clause> consequent);
    // Trigger occurrences bind tvars; consequent must resolve within deadline
    // ticks of the first trigger binding. Throws MalformedPattern when a free
    // consequent variable has no ordering constraint.
    static Pattern triggered(std::string name, std::vector<Clause> trigger,
                             std::vector<Clause> consequent,
                             std::vector<std::pair<int, int>> less_than,
                             std::optional<Tick> deadline);

    const std::string& name() const { return name_; }
    bool is_static() const { return shape_ == Shape::Static; }
    bool is_tick_universal() const { return shape_ == Shape::TickUniversal; }
    const std::vector<Clause>& trigger() const { return trigger_; }
    const std::vector<Clause>& consequent() const { return consequent_; }
    const std::vector<std::pair<int, int>>& less_than() const { return less_than_; }
    std::optional<Tick> deadline() const { return deadline_; }
    int num_tvars() const { return num_tvars_; }

    std::string describe() const;

private:
    enum class Shape { Static, TickUniversal, Triggered };
    void validate() const;
    void assign_indices();

    std::string name_;
    Shape shape_ = Shape::Static;
    std::vector<Clause> trigger_;     // antecedent for tick-universal
    std::vector<Clause> consequent_;
    std::vector<std::pair<int, int>> less_than_;
    std::optional<Tick> deadline_;
    int num_tvars_ = 0;

    friend PatternOutcome evaluate_pattern(const Pattern&, const Engine&, Tick);
    friend class PatternTracker;
};

// Full evaluation of the pattern over [0, at].
PatternOutcome evaluate_pattern(const Pattern& pattern, const Engine& engine, Tick at);
PatternOutcome evaluate_pattern(const Pattern& pattern, const RuleSet& rules,
                                const Timeline& timeline, Tick at);

// Incremental evaluation: step(t) must be called for every tick in order;
// status() then matches evaluate_pattern at the last stepped tick. Supports
// the pattern shapes used by the monitors (single-variable triggers).
class PatternTracker {
public:
    PatternTracker(const Pattern& pattern, const Engine& engine);

    void step(Tick t);
    PatternOutcome outcome() const;

private:
    const Pattern& pattern_;
    const Engine& engine_;
    std::vector<Tick> pending_;  // unresolved trigger ticks
    std::int64_t trigger_count_ = 0;
    std::optional<std::pair<int, Tick>> violation_;  // clause index, trigger tick
    bool statics_checked_ = false;
};

}  // namespace cpsmon::ec
