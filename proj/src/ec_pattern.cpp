#include "cpsmon/ec_pattern.hpp"

#include <algorithm>
#include <cassert>
#include <functional>
#include <limits>

namespace cpsmon::ec {

Clause happens(const ActionLabel& a, int tvar) {
    Clause c;
    c.kind = ClauseKind::Happens;
    c.action = a;
    c.tvar = tvar;
    return c;
}

Clause happens_at(const ActionLabel& a, int bind_to, Tick offset) {
    Clause c;
    c.kind = ClauseKind::Happens;
    c.action = a;
    c.bind_to = bind_to;
    c.offset = offset;
    return c;
}

Clause holds_at(const FluentId& f, int tvar, Tick offset) {
    Clause c;
    c.kind = ClauseKind::HoldsAt;
    c.fluent = f;
    c.tvar = tvar;
    c.offset = offset;
    return c;
}

Clause not_holds_at(const FluentId& f, int tvar, Tick offset) {
    Clause c = holds_at(f, tvar, offset);
    c.kind = ClauseKind::NotHoldsAt;
    return c;
}

Clause not_clipped_since(const FluentId& f, int tvar, Tick offset) {
    Clause c = holds_at(f, tvar, offset);
    c.kind = ClauseKind::NotClippedSince;
    return c;
}

Clause absent_throughout(const FluentId& f, int tvar, Tick offset, Tick window) {
    Clause c = holds_at(f, tvar, offset);
    c.kind = ClauseKind::AbsentThroughout;
    c.window = window;
    return c;
}

Clause initially_p(const FluentId& f) {
    Clause c;
    c.kind = ClauseKind::InitiallyP;
    c.fluent = f;
    return c;
}

Clause rule_exists(RuleKind kind, const ActionLabel& a, const FluentId& f) {
    Clause c;
    c.kind = ClauseKind::RuleExists;
    c.action = a;
    c.fluent = f;
    c.rule_kind = kind;
    return c;
}

Clause any_of(std::vector<std::vector<Clause>> alternatives) {
    Clause c;
    c.kind = ClauseKind::AnyOf;
    c.alternatives = std::move(alternatives);
    return c;
}

Pattern Pattern::statics(std::string name, std::vector<Clause> clauses) {
    Pattern p;
    p.name_ = std::move(name);
    p.shape_ = Shape::Static;
    p.consequent_ = std::move(clauses);
    p.assign_indices();
    p.validate();
    return p;
}

Pattern Pattern::tick_universal(std::string name, std::vector<Clause> antecedent,
                                std::vector<Clause> consequent) {
    Pattern p;
    p.name_ = std::move(name);
    p.shape_ = Shape::TickUniversal;
    p.trigger_ = std::move(antecedent);
    p.consequent_ = std::move(consequent);
    p.num_tvars_ = 1;
    p.assign_indices();
    p.validate();
    return p;
}

Pattern Pattern::triggered(std::string name, std::vector<Clause> trigger,
                           std::vector<Clause> consequent,
                           std::vector<std::pair<int, int>> less_than,
                           std::optional<Tick> deadline) {
    Pattern p;
    p.name_ = std::move(name);
    p.shape_ = Shape::Triggered;
    p.trigger_ = std::move(trigger);
    p.consequent_ = std::move(consequent);
    p.less_than_ = std::move(less_than);
    p.deadline_ = deadline;
    int max_var = -1;
    auto scan = [&max_var](const Clause& c) {
        if (c.tvar > max_var) max_var = c.tvar;
        if (c.bind_to > max_var) max_var = c.bind_to;
    };
    for (const auto& c : p.trigger_) scan(c);
    for (const auto& c : p.consequent_) {
        scan(c);
        for (const auto& alt : c.alternatives)
            for (const auto& sub : alt) scan(sub);
    }
    p.num_tvars_ = max_var + 1;
    p.assign_indices();
    p.validate();
    return p;
}

void Pattern::assign_indices() {
    int next = 1;
    for (auto& c : trigger_) c.index = next++;
    for (auto& c : consequent_) {
        c.index = next++;
        for (auto& alt : c.alternatives)
            for (auto& sub : alt) sub.index = c.index;
    }
}

void Pattern::validate() const {
    auto statics_only = [](const Clause& c) {
        return c.kind == ClauseKind::InitiallyP || c.kind == ClauseKind::RuleExists;
    };
    switch (shape_) {
        case Shape::Static:
            for (const auto& c : consequent_)
                if (!statics_only(c))
                    throw MalformedPattern(name_ + ": static pattern with temporal clause");
            break;
        case Shape::TickUniversal: {
            auto check = [this](const Clause& c, auto&& self) -> void {
                if (c.kind == ClauseKind::Happens)
                    throw MalformedPattern(name_ + ": universal pattern may only use state clauses");
                if (c.kind == ClauseKind::AnyOf) {
                    for (const auto& alt : c.alternatives)
                        for (const auto& sub : alt) self(sub, self);
                    return;
                }
                if (c.tvar != 0 && c.kind != ClauseKind::InitiallyP && c.kind != ClauseKind::RuleExists)
                    throw MalformedPattern(name_ + ": universal pattern binds a single variable");
                if (c.offset > 0)
                    throw MalformedPattern(name_ + ": universal pattern may not look ahead");
            };
            for (const auto& c : trigger_) check(c, check);
            for (const auto& c : consequent_) check(c, check);
            break;
        }
        case Shape::Triggered: {
            if (trigger_.empty()) throw MalformedPattern(name_ + ": triggered pattern without trigger");
            int expected = 0;
            for (const auto& c : trigger_) {
                if (c.kind != ClauseKind::Happens || c.bind_to >= 0)
                    throw MalformedPattern(name_ + ": trigger clauses must be free Happens");
                if (c.tvar != expected++)
                    throw MalformedPattern(name_ + ": trigger variables must be t0..tn in order");
            }
            auto constrained = [this](int var) {
                for (const auto& [a, b] : less_than_)
                    if (a == var || b == var) return true;
                return false;
            };
            for (const auto& c : consequent_) {
                if (c.kind == ClauseKind::Happens && c.bind_to < 0) {
                    if (c.tvar < 0 || !constrained(c.tvar))
                        throw MalformedPattern(name_ + ": unordered time variable t" +
                                               std::to_string(c.tvar) + " has no constraint");
                }
                if (c.kind != ClauseKind::Happens && c.kind != ClauseKind::AnyOf &&
                    c.kind != ClauseKind::InitiallyP && c.kind != ClauseKind::RuleExists &&
                    (c.tvar < 0 || c.tvar >= num_tvars_))
                    throw MalformedPattern(name_ + ": state clause references unknown variable");
            }
            break;
        }
    }
}

namespace {

enum class Res { Ok, Pending, Violated };

struct ResolveOutcome {
    Res res = Res::Ok;
    int failing = 0;
};

struct EvalCtx {
    const Engine& engine;
    Tick at = 0;
    std::optional<Tick> deadline_abs;  // absolute upper bound for consequent ticks
    const std::vector<std::pair<int, int>>* less_than = nullptr;
};

bool fluent_held_within(const Engine& engine, const FluentId& f, Tick lo_excl, Tick hi_incl) {
    if (hi_incl < 0 || hi_incl <= lo_excl) return false;
    Tick first = std::max<Tick>(lo_excl + 1, 0);
    if (engine.holds_at(f, first)) return true;
    // Any later holding requires an initiation inside the window.
    const auto& tl = engine.timeline();
    for (const EcRule* rule : engine.rules().initiators_of(f)) {
        const auto* idx = tl.action_index(rule->trigger);
        if (!idx) continue;
        const auto& occs = tl.store();
        auto it = std::lower_bound(idx->begin(), idx->end(), first + 1,
                                   [&occs](std::uint32_t i, Tick t) { return occs[i].tick < t; });
        for (; it != idx->end() && occs[*it].tick <= hi_incl; ++it) {
            if (rule->applies(occs[*it].context) && engine.holds_at(f, occs[*it].tick)) return true;
        }
    }
    return false;
}

// Evaluates a state clause at a resolved tick (tick <= at).
bool eval_state(const EvalCtx& ctx, const Clause& c, Tick tick);

// State clause or AnyOf-of-state-clauses, anchored at tick t (sub-clause
// offsets apply relative to t).
bool eval_universal_clause(const EvalCtx& ctx, const Clause& c, Tick t) {
    if (c.kind == ClauseKind::AnyOf) {
        for (const auto& alt : c.alternatives) {
            bool all = true;
            for (const auto& sub : alt) {
                Tick ct = t + sub.offset;
                if (ct < 0 || !eval_state(ctx, sub, ct)) {
                    all = false;
                    break;
                }
            }
            if (all) return true;
        }
        return false;
    }
    Tick ct = t + c.offset;
    return ct >= 0 && eval_state(ctx, c, ct);
}

bool eval_state(const EvalCtx& ctx, const Clause& c, Tick tick) {
    switch (c.kind) {
        case ClauseKind::HoldsAt:
            return ctx.engine.holds_at(c.fluent, tick);
        case ClauseKind::NotHoldsAt:
            return !ctx.engine.holds_at(c.fluent, tick);
        case ClauseKind::ClippedSince:
            return tick > 0 && ctx.engine.clipped(0, c.fluent, tick);
        case ClauseKind::NotClippedSince:
            return tick <= 0 || !ctx.engine.clipped(0, c.fluent, tick);
        case ClauseKind::AbsentThroughout:
            return !fluent_held_within(ctx.engine, c.fluent, tick - c.window, tick);
        case ClauseKind::InitiallyP:
            return ctx.engine.timeline().initially(c.fluent);
        case ClauseKind::RuleExists:
            return ctx.engine.rules().has_rule(c.rule_kind, c.action, c.fluent);
        default:
            return false;
    }
}

ResolveOutcome worse(ResolveOutcome a, ResolveOutcome b) {
    // Violated < Pending < Ok in terms of "still winnable".
    if (a.res == Res::Pending || b.res == Res::Pending)
        return a.res == Res::Pending ? a : b;
    return a;  // both violated (or ok handled by caller)
}

ResolveOutcome resolve(const EvalCtx& ctx, const std::vector<const Clause*>& clauses, std::size_t i,
                       std::vector<Tick>& binding, std::vector<bool>& bound) {
    if (i == clauses.size()) return {Res::Ok, 0};
    const Clause& c = *clauses[i];

    if (c.kind == ClauseKind::AnyOf) {
        ResolveOutcome best{Res::Violated, c.index};
        for (const auto& alt : c.alternatives) {
            std::vector<const Clause*> merged;
            merged.reserve(alt.size() + clauses.size() - i - 1);
            for (const auto& sub : alt) merged.push_back(&sub);
            for (std::size_t j = i + 1; j < clauses.size(); ++j) merged.push_back(clauses[j]);
            auto saved_binding = binding;
            auto saved_bound = bound;
            ResolveOutcome r = resolve(ctx, merged, 0, binding, bound);
            if (r.res == Res::Ok) return r;
            if (r.res == Res::Pending) best = {Res::Pending, 0};
            binding = std::move(saved_binding);
            bound = std::move(saved_bound);
        }
        if (best.res == Res::Violated) best.failing = c.index;
        return best;
    }

    if (c.kind == ClauseKind::InitiallyP || c.kind == ClauseKind::RuleExists) {
        if (!eval_state(ctx, c, 0)) return {Res::Violated, c.index};
        return resolve(ctx, clauses, i + 1, binding, bound);
    }

    if (c.kind != ClauseKind::Happens) {
        assert(c.tvar >= 0 && bound[static_cast<std::size_t>(c.tvar)]);
        Tick t = binding[static_cast<std::size_t>(c.tvar)] + c.offset;
        if (t > ctx.at) return {Res::Pending, 0};  // state not observable yet
        if (!eval_state(ctx, c, t)) return {Res::Violated, c.index};
        return resolve(ctx, clauses, i + 1, binding, bound);
    }

    // Happens clause.
    if (c.bind_to >= 0) {
        assert(bound[static_cast<std::size_t>(c.bind_to)]);
        Tick t = binding[static_cast<std::size_t>(c.bind_to)] + c.offset;
        if (t > ctx.at) return {Res::Pending, 0};
        if (!ctx.engine.timeline().happens(c.action, t)) return {Res::Violated, c.index};
        if (c.tvar >= 0) {
            binding[static_cast<std::size_t>(c.tvar)] = t;
            bound[static_cast<std::size_t>(c.tvar)] = true;
        }
        ResolveOutcome r = resolve(ctx, clauses, i + 1, binding, bound);
        if (c.tvar >= 0) bound[static_cast<std::size_t>(c.tvar)] = false;
        return r;
    }

    // Free Happens: search occurrences within ordering constraints.
    Tick lo = 0;
    Tick hi = std::numeric_limits<Tick>::max();
    for (const auto& [a, b] : *ctx.less_than) {
        if (b == c.tvar && a >= 0 && bound[static_cast<std::size_t>(a)])
            lo = std::max(lo, binding[static_cast<std::size_t>(a)] + 1);
        if (a == c.tvar && b >= 0 && bound[static_cast<std::size_t>(b)])
            hi = std::min(hi, binding[static_cast<std::size_t>(b)] - 1);
    }
    Tick cap = hi;
    if (ctx.deadline_abs) cap = std::min(cap, *ctx.deadline_abs);
    Tick search_hi = std::min(cap, ctx.at);
    bool future_open = cap > ctx.at;

    ResolveOutcome best{Res::Violated, c.index};
    const auto& tl = ctx.engine.timeline();
    if (const auto* idx = tl.action_index(c.action)) {
        const auto& occs = tl.store();
        auto it = std::lower_bound(idx->begin(), idx->end(), lo,
                                   [&occs](std::uint32_t i2, Tick t) { return occs[i2].tick < t; });
        for (; it != idx->end() && occs[*it].tick <= search_hi; ++it) {
            binding[static_cast<std::size_t>(c.tvar)] = occs[*it].tick;
            bound[static_cast<std::size_t>(c.tvar)] = true;
            ResolveOutcome r = resolve(ctx, clauses, i + 1, binding, bound);
            bound[static_cast<std::size_t>(c.tvar)] = false;
            if (r.res == Res::Ok) return r;
            best = worse(best, r);
        }
    }
    if (future_open) return {Res::Pending, 0};
    return best;
}

ResolveOutcome resolve_consequent(const Pattern& p, const Engine& engine, Tick at,
                                  std::vector<Tick>& binding, std::vector<bool>& bound) {
    EvalCtx ctx{engine, at,
                p.deadline() ? std::optional<Tick>(binding[0] + *p.deadline()) : std::nullopt,
                &p.less_than()};
    std::vector<const Clause*> work;
    work.reserve(p.consequent().size());
    for (const auto& c : p.consequent()) work.push_back(&c);
    return resolve(ctx, work, 0, binding, bound);
}

}  // namespace

PatternOutcome evaluate_pattern(const Pattern& p, const Engine& engine, Tick at) {
    PatternOutcome out;
    if (at > engine.timeline().horizon()) throw TickBeyondHorizon("pattern evaluation beyond horizon");

    if (p.is_static()) {
        EvalCtx ctx{engine, at, std::nullopt, &p.less_than()};
        for (const auto& c : p.consequent()) {
            if (!eval_state(ctx, c, 0)) {
                out.status = PatternStatus::Violated;
                out.failing_clause = c.index;
                return out;
            }
        }
        out.status = PatternStatus::Satisfied;
        return out;
    }

    if (p.is_tick_universal()) {
        EvalCtx ctx{engine, at, std::nullopt, &p.less_than()};
        out.status = PatternStatus::Satisfied;
        for (Tick t = 0; t <= at; ++t) {
            bool gated = true;
            for (const auto& c : p.trigger())
                if (!eval_universal_clause(ctx, c, t)) {
                    gated = false;
                    break;
                }
            if (!gated) continue;
            ++out.trigger_count;
            for (const auto& c : p.consequent()) {
                if (!eval_universal_clause(ctx, c, t)) {
                    out.status = PatternStatus::Violated;
                    out.failing_clause = c.index;
                    out.violation_tick = t;
                    return out;
                }
            }
        }
        if (out.trigger_count == 0) out.status = PatternStatus::Pending;
        return out;
    }

    // Triggered: enumerate trigger bindings in tick order.
    std::vector<Tick> binding(static_cast<std::size_t>(std::max(p.num_tvars(), 1)), 0);
    std::vector<bool> bound(binding.size(), false);

    struct Instance {
        std::vector<Tick> binding;
    };
    std::vector<Instance> instances;
    std::vector<std::vector<Tick>> trigger_ticks;
    for (const auto& c : p.trigger()) {
        auto ticks = engine.timeline().occurrence_ticks(c.action);
        std::vector<Tick> keep;
        for (Tick t : ticks)
            if (t <= at) keep.push_back(t);
        trigger_ticks.push_back(std::move(keep));
    }
    std::vector<Tick> partial(p.trigger().size(), 0);
    std::function<void(std::size_t)> enumerate = [&](std::size_t idx) {
        if (idx == p.trigger().size()) {
            instances.push_back(Instance{partial});
            return;
        }
        for (Tick t : trigger_ticks[idx]) {
            bool ok = true;
            for (const auto& [a, b] : p.less_than()) {
                if (a < static_cast<int>(idx) && b == static_cast<int>(idx) &&
                    partial[static_cast<std::size_t>(a)] >= t)
                    ok = false;
                if (b < static_cast<int>(idx) && a == static_cast<int>(idx) &&
                    t >= partial[static_cast<std::size_t>(b)])
                    ok = false;
            }
            if (!ok) continue;
            partial[idx] = t;
            enumerate(idx + 1);
        }
    };
    enumerate(0);

    out.status = PatternStatus::Satisfied;
    for (const auto& inst : instances) {
        ++out.trigger_count;
        for (std::size_t v = 0; v < inst.binding.size(); ++v) {
            binding[v] = inst.binding[v];
            bound[v] = true;
        }
        ResolveOutcome r = resolve_consequent(p, engine, at, binding, bound);
        std::fill(bound.begin(), bound.end(), false);
        if (r.res == Res::Violated && out.status != PatternStatus::Violated) {
            out.status = PatternStatus::Violated;
            out.failing_clause = r.failing;
            out.violation_tick = inst.binding[0];
        } else if (r.res == Res::Pending) {
            ++out.pending_count;
        }
    }
    if (out.status == PatternStatus::Violated) return out;
    if (out.trigger_count == 0 || out.pending_count > 0) out.status = PatternStatus::Pending;
    return out;
}

PatternOutcome evaluate_pattern(const Pattern& p, const RuleSet& rules, const Timeline& timeline,
                                Tick at) {
    Engine engine(rules, timeline);
    return evaluate_pattern(p, engine, at);
}

PatternTracker::PatternTracker(const Pattern& pattern, const Engine& engine)
    : pattern_(pattern), engine_(engine) {
    if (pattern_.is_static() || pattern_.is_tick_universal()) return;
    if (pattern_.trigger().size() != 1)
        throw MalformedPattern(pattern_.name() + ": tracker supports single-trigger patterns");
}

void PatternTracker::step(Tick t) {
    if (pattern_.is_static()) {
        if (statics_checked_) return;
        statics_checked_ = true;
        auto out = evaluate_pattern(pattern_, engine_, t);
        if (out.status == PatternStatus::Violated) violation_ = {out.failing_clause, t};
        return;
    }
    if (pattern_.is_tick_universal()) {
        if (violation_) return;
        EvalCtx ctx{engine_, t, std::nullopt, &pattern_.less_than()};
        for (const auto& c : pattern_.trigger())
            if (!eval_universal_clause(ctx, c, t)) return;
        ++trigger_count_;
        for (const auto& c : pattern_.consequent()) {
            if (!eval_universal_clause(ctx, c, t)) {
                violation_ = {c.index, t};
                return;
            }
        }
        return;
    }

    // Triggered: collect this tick's trigger occurrences.
    if (engine_.timeline().happens(pattern_.trigger()[0].action, t)) {
        pending_.push_back(t);
        ++trigger_count_;
    }

    std::vector<Tick> still_pending;
    std::vector<Tick> binding(static_cast<std::size_t>(std::max(pattern_.num_tvars(), 1)), 0);
    std::vector<bool> bound(binding.size(), false);
    for (Tick trigger_tick : pending_) {
        binding[0] = trigger_tick;
        bound[0] = true;
        ResolveOutcome r = resolve_consequent(pattern_, engine_, t, binding, bound);
        std::fill(bound.begin(), bound.end(), false);
        if (r.res == Res::Pending) {
            still_pending.push_back(trigger_tick);
        } else if (r.res == Res::Violated) {
            // report the earliest-triggered violated instance, matching full
            // evaluation (a later instance can violate before an earlier one
            // whose deadline is still open)
            if (!violation_ || trigger_tick < violation_->second)
                violation_ = {r.failing, trigger_tick};
        }
    }
    pending_ = std::move(still_pending);
}

PatternOutcome PatternTracker::outcome() const {
    PatternOutcome out;
    out.trigger_count = trigger_count_;
    out.pending_count = static_cast<std::int64_t>(pending_.size());
    if (violation_) {
        out.status = PatternStatus::Violated;
        out.failing_clause = violation_->first;
        out.violation_tick = violation_->second;
    } else if (pattern_.is_static()) {
        out.status = statics_checked_ ? PatternStatus::Satisfied : PatternStatus::Pending;
    } else if (trigger_count_ == 0 || !pending_.empty()) {
        out.status = PatternStatus::Pending;
    } else {
        out.status = PatternStatus::Satisfied;
    }
    return out;
}

std::string Pattern::describe() const {
    auto clause_str = [](const Clause& c, auto&& self) -> std::string {
        auto tv = [](int v, Tick off) {
            std::string s = "t" + std::to_string(v);
            if (off > 0) s += "+" + std::to_string(off);
            if (off < 0) s += std::to_string(off);
            return s;
        };
        switch (c.kind) {
            case ClauseKind::Happens:
                if (c.bind_to >= 0) return "Happens(" + c.action + ", " + tv(c.bind_to, c.offset) + ")";
                return "Happens(" + c.action + ", " + tv(c.tvar, 0) + ")";
            case ClauseKind::HoldsAt:
                return "HoldsAt(" + c.fluent.str() + ", " + tv(c.tvar, c.offset) + ")";
            case ClauseKind::NotHoldsAt:
                return "!HoldsAt(" + c.fluent.str() + ", " + tv(c.tvar, c.offset) + ")";
            case ClauseKind::ClippedSince:
                return "Clipped(0, " + c.fluent.str() + ", " + tv(c.tvar, c.offset) + ")";
            case ClauseKind::NotClippedSince:
                return "!Clipped(0, " + c.fluent.str() + ", " + tv(c.tvar, c.offset) + ")";
            case ClauseKind::AbsentThroughout:
                return "AbsentFor(" + c.fluent.str() + ", " + std::to_string(c.window) + ", " +
                       tv(c.tvar, c.offset) + ")";
            case ClauseKind::InitiallyP:
                return "InitiallyP(" + c.fluent.str() + ")";
            case ClauseKind::RuleExists:
                return std::string(c.rule_kind == RuleKind::Initiates ? "Initiates(" : "Terminates(") +
                       c.action + ", " + c.fluent.str() + ")";
            case ClauseKind::AnyOf: {
                std::string s = "(";
                for (std::size_t i = 0; i < c.alternatives.size(); ++i) {
                    if (i) s += " | ";
                    for (std::size_t j = 0; j < c.alternatives[i].size(); ++j) {
                        if (j) s += " & ";
                        s += self(c.alternatives[i][j], self);
                    }
                }
                return s + ")";
            }
        }
        return "?";
    };
    std::string s = name_ + ": ";
    for (std::size_t i = 0; i < trigger_.size(); ++i) {
        if (i) s += " & ";
        s += clause_str(trigger_[i], clause_str);
    }
    if (!trigger_.empty()) s += " => ";
    for (std::size_t i = 0; i < consequent_.size(); ++i) {
        if (i) s += " & ";
        s += clause_str(consequent_[i], clause_str);
    }
    for (const auto& [a, b] : less_than_)
        s += " | t" + std::to_string(a) + "<t" + std::to_string(b);
    if (deadline_) s += " | deadline=" + std::to_string(*deadline_);
    return s;
}

}  // namespace cpsmon::ec
