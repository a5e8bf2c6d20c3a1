#include "cpsmon/monitor.hpp"

#include <algorithm>

namespace cpsmon::mon {

Monitor::Monitor(std::string id, std::vector<std::string> language)
    : id_(std::move(id)), language_(std::move(language)) {}

void Monitor::check_not_frozen() const {
    if (frozen_)
        throw FrozenMonitor(id_ + ": construction interface is frozen at simulation start");
}

void Monitor::add_predicate(DetectionPredicate p) {
    check_not_frozen();
    if (std::find(language_.begin(), language_.end(), p.stream_id) == language_.end())
        throw UnregisteredStream(id_ + ": predicate " + p.id + " references stream " + p.stream_id +
                                 " outside the monitor language");
    predicates_.push_back(std::move(p));
}

void Monitor::add_pattern(ec::Pattern p) {
    check_not_frozen();
    patterns_.push_back(std::move(p));
}

void Monitor::freeze(const ec::Engine& engine) {
    check_not_frozen();
    frozen_ = true;
    for (const auto& p : patterns_) trackers_.push_back(std::make_unique<ec::PatternTracker>(p, engine));
}

void Monitor::step_patterns(Tick t) {
    for (auto& tr : trackers_) tr->step(t);
}

std::vector<std::pair<std::string, ec::PatternOutcome>> Monitor::pattern_outcomes() const {
    std::vector<std::pair<std::string, ec::PatternOutcome>> out;
    for (std::size_t i = 0; i < patterns_.size(); ++i)
        out.emplace_back(patterns_[i].name(), trackers_[i]->outcome());
    return out;
}

SafetyVerdict Monitor::evaluate(const streams::MonitoredStreams& ms, Tick at) const {
    SafetyVerdict v;
    v.at = at;
    for (const auto& p : predicates_) {
        const auto& w = ms.window(p.stream_id);
        if (w.empty()) continue;
        if (p.cadence == Cadence::OnSample && w.last_tick() != at) continue;
        auto slice = w.prefix();
        if (p.check(slice, at)) continue;
        BadPrefix bad;
        bad.stream_id = p.stream_id;
        bad.samples = slice;
        bad.from = slice.front().tick;
        bad.to = at;
        bad.predicate_id = p.id;
        v.witnesses.push_back(std::move(bad));
    }
    for (std::size_t i = 0; i < trackers_.size(); ++i) {
        auto out = trackers_[i]->outcome();
        if (out.status != ec::PatternStatus::Violated) continue;
        BadPrefix bad;
        bad.stream_id = "ec.patterns";
        bad.from = out.violation_tick;
        bad.to = at;
        streams::Sample s;
        s.tick = out.violation_tick;
        s.scalar = out.failing_clause;
        s.tag = patterns_[i].name();
        bad.samples.push_back(std::move(s));
        bad.predicate_id = patterns_[i].name();
        v.witnesses.push_back(std::move(bad));
    }
    v.status = v.witnesses.empty() ? VerdictStatus::Holds : VerdictStatus::Rejected;
    return v;
}

void Monitor::deliver(MonitorEvent ev) { mailbox_.push_back(std::move(ev)); }

std::vector<MonitorEvent> Monitor::drain(Tick now) {
    std::vector<MonitorEvent> ready;
    std::vector<MonitorEvent> later;
    for (auto& ev : mailbox_) {
        if (ev.visible_at <= now)
            ready.push_back(std::move(ev));
        else
            later.push_back(std::move(ev));
    }
    mailbox_ = std::move(later);
    std::sort(ready.begin(), ready.end(), [](const MonitorEvent& a, const MonitorEvent& b) {
        return a.visible_at != b.visible_at ? a.visible_at < b.visible_at : a.seq < b.seq;
    });
    return ready;
}

void MonitorGraph::add_system_vertex(const std::string& id) {
    if (has_vertex(id)) throw SimError("vertex " + id + " already present");
    system_.push_back(id);
}

void MonitorGraph::add_monitor(Monitor* monitor) {
    if (has_vertex(monitor->id())) throw SimError("vertex " + monitor->id() + " already present");
    monitors_.push_back(monitor);
}

bool MonitorGraph::has_vertex(const std::string& id) const {
    if (std::find(system_.begin(), system_.end(), id) != system_.end()) return true;
    return monitor(id) != nullptr;
}

Monitor* MonitorGraph::monitor(const std::string& id) const {
    for (Monitor* m : monitors_)
        if (m->id() == id) return m;
    return nullptr;
}

int MonitorGraph::monitor_order(const std::string& id) const {
    for (std::size_t i = 0; i < monitors_.size(); ++i)
        if (monitors_[i]->id() == id) return static_cast<int>(i);
    return -1;
}

void MonitorGraph::add_edge(const std::string& from, const std::string& to, EdgeKind kind,
                            Grouping grouping) {
    if (!has_vertex(from)) throw UnknownVertex("edge source " + from + " not in graph");
    if (!has_vertex(to)) throw UnknownVertex("edge target " + to + " not in graph");
    bool from_mon = monitor(from) != nullptr;
    bool to_mon = monitor(to) != nullptr;
    switch (kind) {
        case EdgeKind::Observe:
            if (from_mon || !to_mon) throw SimError("observe edges run system -> monitor");
            break;
        case EdgeKind::Event:
            if (!from_mon || !to_mon) throw SimError("event edges run monitor -> monitor");
            break;
        case EdgeKind::Mitigate:
            if (!from_mon || to_mon) throw SimError("mitigate edges run monitor -> system");
            break;
    }
    edges_.push_back(Edge{from, to, kind, grouping});
}

void MonitorGraph::validate() const {
    // A sequential event edge delivers same-tick, which is only realizable
    // from an earlier monitor to a later one in evaluation order; any cycle of
    // sequential event edges is therefore a zero-delay loop.
    for (const auto& e : edges_) {
        if (e.kind != EdgeKind::Event || e.grouping != Grouping::Sequential) continue;
        if (monitor_order(e.from) >= monitor_order(e.to))
            throw CycleWithoutDelay("sequential event edge " + e.from + " -> " + e.to +
                                    " cannot deliver within the tick");
    }
}

std::vector<MonitorEvent> MonitorGraph::propagate(MonitorEvent event) {
    if (!has_vertex(event.source)) throw UnknownVertex("event from unknown vertex " + event.source);
    std::vector<MonitorEvent> delivered;
    for (const auto& e : edges_) {
        if (e.from != event.source) continue;
        if (e.kind == EdgeKind::Event) {
            if (!event.target.empty() && event.target != e.to) continue;
            MonitorEvent copy = event;
            copy.target = e.to;
            copy.visible_at = event.tick + (e.grouping == Grouping::Sequential ? 0 : 1);
            copy.seq = next_seq_++;
            monitor(e.to)->deliver(copy);
            delivered.push_back(std::move(copy));
        } else if (e.kind == EdgeKind::Mitigate) {
            if (!event.target.empty() && event.target != e.to) continue;
            MonitorEvent copy = event;
            copy.target = e.to;
            copy.actuation = true;
            copy.visible_at = event.tick;
            copy.seq = next_seq_++;
            delivered.push_back(std::move(copy));
        }
    }
    return delivered;
}

Scheduler::Scheduler(MonitorGraph& graph, std::vector<MonitorAgent*> agents,
                     ActuationSink on_actuation, DropSink on_drop)
    : graph_(graph), agents_(std::move(agents)), on_actuation_(std::move(on_actuation)),
      on_drop_(std::move(on_drop)) {
    graph_.validate();
    if (agents_.size() != graph_.monitors().size())
        throw SimError("scheduler agents do not match graph monitors");
    for (std::size_t i = 0; i < agents_.size(); ++i)
        if (&agents_[i]->core() != graph_.monitors()[i])
            throw SimError("scheduler agent order must match graph monitor order");
}

void Scheduler::emit(MonitorEvent ev) {
    auto delivered = graph_.propagate(ev);
    if (delivered.empty() && on_drop_) on_drop_(ev);
    for (auto& d : delivered)
        if (d.actuation && on_actuation_) on_actuation_(d);
}

std::vector<std::pair<std::string, SafetyVerdict>> Scheduler::step_all(
    const streams::MonitoredStreams& ms, Tick at) {
    std::vector<std::pair<std::string, SafetyVerdict>> verdicts;
    for (MonitorAgent* agent : agents_) agent->step(at);
    // Patterns observe the completed tick: a sequential successor's same-tick
    // response must be visible before conformance is judged.
    for (MonitorAgent* agent : agents_) agent->core().step_patterns(at);
    for (MonitorAgent* agent : agents_)
        verdicts.emplace_back(agent->core().id(), agent->core().evaluate(ms, at));
    return verdicts;
}

}  // namespace cpsmon::mon
