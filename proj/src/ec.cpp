#include "cpsmon/ec.hpp"

#include <algorithm>

namespace cpsmon::ec {

void RuleSet::add(EcRule rule) {
    for (const auto& r : rules_) {
        if (r.trigger == rule.trigger && r.fluent == rule.fluent && r.kind != rule.kind)
            throw ConflictingRule("rule on (" + rule.trigger + ", " + rule.fluent.str() +
                                  ") would both initiate and terminate");
    }
    rules_.push_back(std::move(rule));
    reindex();  // stored rules may have moved
}

void RuleSet::reindex() {
    by_trigger_.clear();
    for (const auto& r : rules_) by_trigger_[r.trigger].push_back(&r);
}

void RuleSet::add(RuleKind kind, const ActionLabel& trigger, const FluentId& f, Guard guard) {
    add(EcRule{kind, trigger, f, std::move(guard)});
}

bool RuleSet::has_rule(RuleKind kind, const ActionLabel& trigger, const FluentId& f) const {
    for (const auto& r : rules_)
        if (r.kind == kind && r.trigger == trigger && r.fluent == f) return true;
    return false;
}

const std::vector<const EcRule*>& RuleSet::for_trigger(const ActionLabel& action) const {
    static const std::vector<const EcRule*> empty;
    auto it = by_trigger_.find(action);
    return it == by_trigger_.end() ? empty : it->second;
}

std::vector<const EcRule*> RuleSet::initiators_of(const FluentId& f) const {
    std::vector<const EcRule*> out;
    for (const auto& r : rules_)
        if (r.kind == RuleKind::Initiates && r.fluent == f) out.push_back(&r);
    return out;
}

void Timeline::record_happens(const ActionLabel& action, Tick t, OccurrenceContext ctx) {
    if (t < 0 || t > horizon_) throw TickBeyondHorizon("tick " + std::to_string(t) + " beyond horizon");
    auto& idx = by_action_[action];
    auto pos = std::lower_bound(idx.begin(), idx.end(), t,
                                [this](std::uint32_t i, Tick tick) { return store_[i].tick < tick; });
    if (pos != idx.end() && store_[*pos].tick == t)
        throw DuplicateOccurrence(action + " already recorded at tick " + std::to_string(t));
    store_.push_back(Occurrence{t, action, std::move(ctx)});
    idx.insert(pos, static_cast<std::uint32_t>(store_.size() - 1));
    sorted_dirty_ = true;
}

const std::vector<Occurrence>& Timeline::occurrences() const {
    if (sorted_dirty_ || sorted_cache_.size() != store_.size()) {
        sorted_cache_ = store_;
        std::stable_sort(sorted_cache_.begin(), sorted_cache_.end(),
                         [](const Occurrence& a, const Occurrence& b) {
                             return a.tick != b.tick ? a.tick < b.tick : a.action < b.action;
                         });
        sorted_dirty_ = false;
    }
    return sorted_cache_;
}

bool Timeline::happens(const ActionLabel& action, Tick t) const {
    auto it = by_action_.find(action);
    if (it == by_action_.end()) return false;
    const auto& idx = it->second;
    auto pos = std::lower_bound(idx.begin(), idx.end(), t,
                                [this](std::uint32_t i, Tick tick) { return store_[i].tick < tick; });
    return pos != idx.end() && store_[*pos].tick == t;
}

std::vector<Tick> Timeline::occurrence_ticks(const ActionLabel& action) const {
    std::vector<Tick> out;
    auto it = by_action_.find(action);
    if (it == by_action_.end()) return out;
    out.reserve(it->second.size());
    for (std::uint32_t i : it->second) out.push_back(store_[i].tick);
    return out;
}

const std::vector<std::uint32_t>* Timeline::action_index(const ActionLabel& action) const {
    auto it = by_action_.find(action);
    return it == by_action_.end() ? nullptr : &it->second;
}

Engine::Engine(const RuleSet& rules, const Timeline& timeline) : rules_(rules), timeline_(timeline) {
    for (const auto& r : rules_.rules()) declared_.insert(r.fluent);
    for (const auto& f : timeline_.initial_fluents()) declared_.insert(f);
}

bool Engine::known_fluent(const FluentId& f) const {
    return declared_.count(f) != 0 || timeline_.initially(f);
}

std::vector<FluentId> Engine::known_fluents() const {
    std::set<FluentId> all = declared_;
    for (const auto& f : timeline_.initial_fluents()) all.insert(f);
    return {all.begin(), all.end()};
}

void Engine::check_known(const FluentId& f) const {
    if (!known_fluent(f)) throw UnknownFluent("fluent " + f.str() + " is not registered");
}

void Engine::ensure_index() const {
    const auto& occs = timeline_.store();
    if (indexed_count_ == occs.size()) return;
    // Process only the appended suffix; appends arrive tick-ordered during a
    // run, so per-fluent vectors stay sorted. Out-of-order recording (tests,
    // ad-hoc timelines) triggers a re-sort of the affected vector.
    for (std::size_t i = indexed_count_; i < occs.size(); ++i) {
        const auto& occ = occs[i];
        for (const EcRule* rule : rules_.for_trigger(occ.action)) {
            if (!rule->applies(occ.context)) continue;
            auto& idx = index_[rule->fluent];
            auto& v = rule->kind == RuleKind::Initiates ? idx.inits : idx.terms;
            v.push_back(occ.tick);
            if (v.size() > 1 && v[v.size() - 2] > v.back()) std::sort(v.begin(), v.end());
        }
    }
    indexed_count_ = occs.size();
}

const Engine::FluentIndex* Engine::index_for(const FluentId& f) const {
    ensure_index();
    auto it = index_.find(f);
    return it == index_.end() ? nullptr : &it->second;
}

bool Engine::holds_at(const FluentId& f, Tick t) const {
    check_known(f);
    if (t < 0) return false;
    if (t > timeline_.horizon()) throw TickBeyondHorizon("query beyond horizon");
    const FluentIndex* idx = index_for(f);
    auto term_in = [&](Tick lo, Tick hi) {  // any termination in [lo, hi]
        if (!idx || idx->terms.empty()) return false;
        auto it = std::lower_bound(idx->terms.begin(), idx->terms.end(), lo);
        return it != idx->terms.end() && *it <= hi;
    };
    // Simultaneous initiation and termination resolves termination-last, so a
    // termination at the candidate start tick already kills the fluent.
    if (idx && !idx->inits.empty()) {
        auto it = std::upper_bound(idx->inits.begin(), idx->inits.end(), t);
        if (it != idx->inits.begin()) {
            Tick t0 = *std::prev(it);
            if (!term_in(t0, t)) return true;
        }
    }
    if (timeline_.initially(f) && !term_in(0, t)) return true;
    return false;
}

bool Engine::clipped(Tick t1, const FluentId& f, Tick t2) const {
    check_known(f);
    if (t1 > t2) throw InvalidInterval("clipped interval with t1 > t2");
    if (t2 > timeline_.horizon()) throw TickBeyondHorizon("query beyond horizon");
    const FluentIndex* idx = index_for(f);
    if (!idx || idx->terms.empty()) return false;
    auto it = std::upper_bound(idx->terms.begin(), idx->terms.end(), t1);
    return it != idx->terms.end() && *it <= t2;
}

FluentState Engine::state_at(const FluentId& f, Tick t) const {
    bool now = holds_at(f, t);
    const FluentIndex* idx = index_for(f);
    // The value only changes at event ticks; walk them newest-first until the
    // tick that flipped it.
    Tick since = 0;
    if (idx) {
        std::vector<Tick> events;
        auto collect = [&](const std::vector<Tick>& v) {
            auto it = std::upper_bound(v.begin(), v.end(), t);
            events.insert(events.end(), v.begin(), it);
        };
        collect(idx->inits);
        collect(idx->terms);
        std::sort(events.begin(), events.end(), std::greater<>());
        for (Tick e : events) {
            if (e <= 0) break;
            if (holds_at(f, e - 1) != now) {
                since = e;
                break;
            }
        }
    }
    return FluentState{f, now, since};
}

std::vector<FluentState> Engine::changes_at(Tick t) const {
    ensure_index();
    std::vector<FluentState> out;
    for (const auto& [f, idx] : index_) {
        bool event_here = std::binary_search(idx.inits.begin(), idx.inits.end(), t) ||
                          std::binary_search(idx.terms.begin(), idx.terms.end(), t);
        if (!event_here) continue;
        bool now = holds_at(f, t);
        bool before = t > 0 ? holds_at(f, t - 1) : timeline_.initially(f);
        if (now != before) out.push_back(FluentState{f, now, t});
    }
    return out;
}

}  // namespace cpsmon::ec
