#include "doctest.h"

#include "cpsmon/monitor.hpp"
#include "cpsmon/vocab.hpp"

using namespace cpsmon;
using namespace cpsmon::mon;

namespace {

streams::Sample scalar_sample(Tick t, std::int64_t v) {
    streams::Sample s;
    s.tick = t;
    s.scalar = v;
    return s;
}

DetectionPredicate non_negative(const std::string& stream) {
    DetectionPredicate p;
    p.id = "non_negative";
    p.stream_id = stream;
    p.cadence = Cadence::OnSample;
    p.check = [](std::span<const streams::Sample> w, Tick) { return w.back().scalar >= 0; };
    return p;
}

}  // namespace

TEST_CASE("predicates outside the monitor language are rejected") {
    Monitor m("hrim", {"bus.gps"});
    CHECK_THROWS_AS(m.add_predicate(non_negative("bus.baro")), UnregisteredStream);
    CHECK_NOTHROW(m.add_predicate(non_negative("bus.gps")));
}

TEST_CASE("construction freezes at simulation start") {
    Monitor m("hrim", {"bus.gps"});
    ec::RuleSet rules;
    ec::Timeline tl(10);
    ec::Engine engine(rules, tl);
    m.add_predicate(non_negative("bus.gps"));
    m.freeze(engine);
    CHECK_THROWS_AS(m.add_predicate(non_negative("bus.gps")), FrozenMonitor);
    CHECK_THROWS_AS(m.add_pattern(ec::Pattern::statics("p", {})), FrozenMonitor);
}

TEST_CASE("evaluate produces a reproducible witness on rejection") {
    Monitor m("mon", {"s"});
    m.add_predicate(non_negative("s"));
    ec::RuleSet rules;
    ec::Timeline tl(10);
    ec::Engine engine(rules, tl);
    m.freeze(engine);

    streams::MonitoredStreams ms;
    ms.add_stream("s");
    ms.advance(0, {{"s", scalar_sample(0, 5)}});
    auto v0 = m.evaluate(ms, 0);
    CHECK(v0.status == VerdictStatus::Holds);
    CHECK(v0.witnesses.empty());

    ms.advance(1, {{"s", scalar_sample(1, -3)}});
    auto v1 = m.evaluate(ms, 1);
    REQUIRE(v1.status == VerdictStatus::Rejected);
    REQUIRE(v1.witnesses.size() == 1);
    const BadPrefix& bad = v1.witnesses.front();
    CHECK(bad.stream_id == "s");
    CHECK(bad.predicate_id == "non_negative");
    CHECK_FALSE(bad.samples.empty());
    // re-running the predicate on the stored slice reproduces the rejection
    CHECK_FALSE(m.predicates().front().check(bad.samples, bad.to));

    // verdict is instantaneous: no fresh sample, no rejection
    ms.advance(2, {});
    CHECK(m.evaluate(ms, 2).status == VerdictStatus::Holds);
}

TEST_CASE("graph edge direction rules") {
    Monitor a("a", {});
    Monitor b("b", {});
    MonitorGraph g;
    g.add_system_vertex("plant");
    g.add_monitor(&a);
    g.add_monitor(&b);
    CHECK_NOTHROW(g.add_edge("plant", "a", EdgeKind::Observe, Grouping::Sequential));
    CHECK_NOTHROW(g.add_edge("a", "b", EdgeKind::Event, Grouping::Sequential));
    CHECK_NOTHROW(g.add_edge("b", "plant", EdgeKind::Mitigate, Grouping::Sequential));
    CHECK_THROWS_AS(g.add_edge("a", "plant", EdgeKind::Event, Grouping::Sequential), SimError);
    CHECK_THROWS_AS(g.add_edge("plant", "a", EdgeKind::Mitigate, Grouping::Sequential), SimError);
    CHECK_THROWS_AS(g.add_edge("ghost", "a", EdgeKind::Observe, Grouping::Sequential), UnknownVertex);
}

TEST_CASE("propagate copies events to successor mailboxes") {
    Monitor a("a", {});
    Monitor b("b", {});
    MonitorGraph g;
    g.add_system_vertex("crossbar");
    g.add_monitor(&a);
    g.add_monitor(&b);
    g.add_edge("a", "b", EdgeKind::Event, Grouping::Sequential);
    g.add_edge("b", "crossbar", EdgeKind::Mitigate, Grouping::Sequential);

    MonitorEvent ev;
    ev.tick = 3;
    ev.source = "a";
    ev.label = "i2m_send_InfoToDisconnect";
    auto delivered = g.propagate(ev);
    REQUIRE(delivered.size() == 1);
    CHECK(delivered[0].target == "b");
    CHECK_FALSE(delivered[0].actuation);
    auto inbox = b.drain(3);
    REQUIRE(inbox.size() == 1);
    CHECK(inbox[0].label == "i2m_send_InfoToDisconnect");

    SUBCASE("mitigate deliveries are marked as actuation commands") {
        MonitorEvent fs;
        fs.tick = 4;
        fs.source = "b";
        fs.label = "fail_safe";
        auto out = g.propagate(fs);
        REQUIRE(out.size() == 1);
        CHECK(out[0].actuation);
        CHECK(out[0].target == "crossbar");
    }
    SUBCASE("unknown vertex") {
        MonitorEvent bad;
        bad.source = "ghost";
        CHECK_THROWS_AS(g.propagate(bad), UnknownVertex);
    }
    SUBCASE("no route yields an empty delivery") {
        MonitorEvent orphan;
        orphan.tick = 5;
        orphan.source = "a";
        orphan.target = "crossbar";  // a has no mitigate edge
        CHECK(g.propagate(orphan).empty());
    }
}

namespace {

// Agent that emits one event at a fixed tick; the receiver records when its
// mailbox becomes visible.
struct EmitterAgent : MonitorAgent {
    Monitor mon{"a", {}};
    Scheduler* sched = nullptr;
    Tick emit_at;
    explicit EmitterAgent(Tick t) : emit_at(t) {}
    Monitor& core() override { return mon; }
    void step(Tick t) override {
        if (t == emit_at) {
            MonitorEvent ev;
            ev.tick = t;
            ev.source = "a";
            ev.label = "ping";
            sched->emit(ev);
        }
    }
};

struct ReceiverAgent : MonitorAgent {
    Monitor mon{"b", {}};
    std::vector<Tick> received_at;
    Monitor& core() override { return mon; }
    void step(Tick t) override {
        for (const auto& ev : mon.drain(t)) {
            (void)ev;
            received_at.push_back(t);
        }
    }
};

}  // namespace

TEST_CASE("sequential edges deliver same tick, parallel edges next tick") {
    for (auto grouping : {Grouping::Sequential, Grouping::Parallel}) {
        EmitterAgent a(3);
        ReceiverAgent b;
        MonitorGraph g;
        g.add_monitor(&a.core());
        g.add_monitor(&b.core());
        g.add_edge("a", "b", EdgeKind::Event, grouping);
        streams::MonitoredStreams ms;
        Scheduler sched(g, {&a, &b}, {});
        a.sched = &sched;
        ec::RuleSet rules;
        ec::Timeline tl(10);
        ec::Engine engine(rules, tl);
        a.core().freeze(engine);
        b.core().freeze(engine);
        for (Tick t = 0; t <= 6; ++t) {
            ms.advance(t, {});
            sched.step_all(ms, t);
        }
        REQUIRE(b.received_at.size() == 1);
        CHECK(b.received_at[0] == (grouping == Grouping::Sequential ? 3 : 4));
    }
}

TEST_CASE("a zero-delay event cycle is rejected at load time") {
    EmitterAgent a(0);
    ReceiverAgent b;
    MonitorGraph g;
    g.add_monitor(&a.core());
    g.add_monitor(&b.core());
    g.add_edge("a", "b", EdgeKind::Event, Grouping::Sequential);
    g.add_edge("b", "a", EdgeKind::Event, Grouping::Sequential);  // backwards, same tick
    CHECK_THROWS_AS(Scheduler(g, {&a, &b}, {}), CycleWithoutDelay);

    SUBCASE("a parallel back edge is fine") {
        MonitorGraph g2;
        EmitterAgent a2(0);
        ReceiverAgent b2;
        g2.add_monitor(&a2.core());
        g2.add_monitor(&b2.core());
        g2.add_edge("a", "b", EdgeKind::Event, Grouping::Sequential);
        g2.add_edge("b", "a", EdgeKind::Event, Grouping::Parallel);
        CHECK_NOTHROW(Scheduler(g2, {&a2, &b2}, {}));
    }
}

#include "run_helpers.hpp"

TEST_CASE("runner monitors are frozen once the simulation is wired") {
    auto handle = cpsmon::testing::run_scenario(cpsmon::testing::small_scenario("frozen", 50));
    auto& m = handle.runner->hrim().core();
    CHECK(m.frozen());
    DetectionPredicate p;
    p.id = "late";
    p.stream_id = m.language().front();
    p.check = [](std::span<const streams::Sample>, Tick) { return true; };
    CHECK_THROWS_AS(m.add_predicate(std::move(p)), FrozenMonitor);
}
