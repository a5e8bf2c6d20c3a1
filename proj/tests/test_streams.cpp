#include "doctest.h"

#include "cpsmon/streams.hpp"

using namespace cpsmon;
using namespace cpsmon::streams;

namespace {
Sample sample_at(Tick t, std::int64_t v = 0) {
    Sample s;
    s.tick = t;
    s.scalar = v;
    return s;
}
}  // namespace

TEST_CASE("push evicts the oldest sample beyond depth m+1") {
    StreamWindow w("bus.gps", 3);
    for (Tick t : {1, 2, 3, 4}) w.push(sample_at(t));
    CHECK(w.size() == 4);  // m+1
    w.push(sample_at(5));
    auto p = w.prefix();
    REQUIRE(p.size() == 4);
    CHECK(p.front().tick == 2);
    CHECK(p.back().tick == 5);
}

TEST_CASE("push rejects non-monotonic ticks") {
    StreamWindow w("bus.gps", 3);
    w.push(sample_at(4));
    CHECK_THROWS_AS(w.push(sample_at(4)), NonMonotonicTick);
    CHECK_THROWS_AS(w.push(sample_at(3)), NonMonotonicTick);
}

TEST_CASE("fresh window accepts tick zero") {
    StreamWindow w("bus.gps", 5);
    w.push(sample_at(0));
    CHECK(w.prefix().size() == 1);
}

TEST_CASE("prefix is oldest-first and pure") {
    StreamWindow w("s", 2);
    for (Tick t : {7, 8, 9}) w.push(sample_at(t, t * 10));
    auto a = w.prefix();
    auto b = w.prefix();
    REQUIRE(a.size() == 3);
    CHECK(a[0].tick == 7);
    CHECK(a[1].tick == 8);
    CHECK(a[2].tick == 9);
    REQUIRE(b.size() == a.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].tick == b[i].tick);

    StreamWindow partial("s2", 5);
    partial.push(sample_at(3));
    CHECK(partial.prefix().size() == 1);

    StreamWindow empty("s3", 5);
    CHECK_THROWS_AS(empty.prefix(), EmptyWindow);
}

TEST_CASE("advance feeds samples and counts gaps per stream") {
    MonitoredStreams ms;
    ms.add_stream("bus.gps");
    ms.add_stream("bus.baro");

    for (Tick t = 0; t < 40; ++t) {
        std::map<std::string, Sample> in;
        in["bus.gps"] = sample_at(t);
        in["bus.baro"] = sample_at(t);
        ms.advance(t, in);
    }
    CHECK(ms.window("bus.gps").gap_ticks() == 0);
    CHECK(ms.window("bus.baro").gap_ticks() == 0);

    // GPS present, barometer absent at tick 40.
    std::map<std::string, Sample> in;
    in["bus.gps"] = sample_at(40);
    ms.advance(40, in);
    CHECK(ms.window("bus.gps").gap_ticks() == 0);
    CHECK(ms.window("bus.baro").gap_ticks() == 1);

    // Oracle: gap equals a recount over the raw event list.
    SUBCASE("gap counter equals recount from the raw schedule") {
        std::vector<Tick> baro_sample_ticks;
        MonitoredStreams ms2;
        ms2.add_stream("x");
        Tick last_sample = -1;
        for (Tick t = 0; t <= 100; ++t) {
            bool present = (t % 7) == 0;
            std::map<std::string, Sample> step;
            if (present) {
                step["x"] = sample_at(t);
                last_sample = t;
            }
            ms2.advance(t, step);
            CHECK(ms2.window("x").gap_ticks() == t - last_sample);
        }
        (void)baro_sample_ticks;
    }

    SUBCASE("repeating a tick is an error") {
        std::map<std::string, Sample> again;
        CHECK_THROWS_AS(ms.advance(40, again), SkippedTick);
        CHECK_THROWS_AS(ms.advance(42, again), SkippedTick);
    }
}

TEST_CASE("window length is capped at m+1 and ticks stay increasing") {
    StreamWindow w("s", 8);
    Tick t = 0;
    for (int i = 0; i < 50; ++i) {
        t += 1 + (i % 3);
        w.push(sample_at(t));
        CHECK(w.size() <= 9);
        auto p = w.prefix();
        for (std::size_t j = 1; j < p.size(); ++j) CHECK(p[j - 1].tick < p[j].tick);
    }
    CHECK(w.size() == 9);
}

TEST_CASE("transition records must chain from/to states") {
    MonitoredStreams ms;
    TransitionRecord a{1, "main", "mcu_init", "call", 0, 0, 0};
    TransitionRecord b{5, "mcu_init", "main", "return", 0, 0, 0};
    ms.push_transition(a);
    ms.push_transition(b);
    CHECK(ms.transitions().size() == 2);
    TransitionRecord broken{6, "elsewhere", "main", "call", 0, 0, 0};
    CHECK_THROWS_AS(ms.push_transition(broken), SimError);
}
