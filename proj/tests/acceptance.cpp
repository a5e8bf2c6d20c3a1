// Acceptance suite: one test case per criterion, each printing a PASS/FAIL
// line. Run via ctest or directly: ./cpsmon_acceptance

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <chrono>
#include <cstdio>
#include <set>

#include "cpsmon/ec_pattern.hpp"
#include "cpsmon/harness.hpp"
#include "cpsmon/verifier.hpp"
#include "cpsmon/vocab.hpp"
#include "ec_oracle.hpp"
#include "run_helpers.hpp"

using namespace cpsmon;
using cpsmon::testing::shipped_run;

namespace {

struct Criterion {
    int number;
    const char* title;
    bool passed = false;
    ~Criterion() {
        std::printf("[acceptance] %2d %-28s %s\n", number, title, passed ? "PASS" : "FAIL");
        std::fflush(stdout);
    }
};

Tick first_event_tick(const cpsmon::testing::RunHandle& run, const std::string& action,
                      const std::string& reason = "") {
    for (const auto& rec : run.records()) {
        if (rec.kind != "event" || !rec.payload.count("action")) continue;
        if (rec.payload.at("action") != action) continue;
        if (!reason.empty() &&
            (!rec.payload.count("ctx_reason") || rec.payload.at("ctx_reason") != reason))
            continue;
        return rec.tick;
    }
    return -1;
}

std::vector<std::pair<Tick, std::string>> rejected_verdicts(const cpsmon::testing::RunHandle& run) {
    std::vector<std::pair<Tick, std::string>> out;
    for (const auto& rec : run.records())
        if (rec.kind == "verdict" && rec.payload.at("status") == "rejected")
            out.emplace_back(rec.tick, rec.payload.at("monitor"));
    return out;
}

}  // namespace

TEST_CASE("criterion 1: nominal soundness") {
    Criterion c{1, "nominal soundness"};
    auto& run = shipped_run("nominal");
    REQUIRE(run.runner->scenario().horizon_ticks >= 100'000);
    CHECK(run.result.exit_code == 0);
    CHECK(rejected_verdicts(run).empty());
    CHECK(run.result.rejected_ticks == 0);
    c.passed = true;
}

TEST_CASE("criterion 2: baud-rate experiment") {
    Criterion c{2, "baud-rate experiment"};
    auto& run = shipped_run("baud_attack");
    const auto& sc = run.runner->scenario();
    const auto& attack = sc.attacks.front();
    REQUIRE(attack.at_tick == 5'000);
    REQUIRE(attack.new_baud == 115'200);

    // detection within one frame (10 bits x 9 ticks) of the first re-timed
    // frame's start
    Tick emit = sc.sensor("gps").emit_period_ticks;
    Tick frame_start = (attack.at_tick / emit + 1) * emit;
    plant::BusConfig attacked{"", attack.new_baud, 8, 'N', 1};
    REQUIRE(attacked.bit_period_ticks() == 9);
    Tick deadline = frame_start + 10 * 9;

    auto rejected = rejected_verdicts(run);
    REQUIRE_FALSE(rejected.empty());
    CHECK(rejected.front().second == "hrim");
    CHECK(rejected.front().first >= frame_start);
    CHECK(rejected.front().first <= deadline);

    // crossbar isolation and idle rx line
    bool isolated = false;
    Tick reconnect_tick = -1;
    for (const auto& rec : run.records()) {
        if (rec.kind == "event" && rec.payload.count("action") &&
            rec.payload.at("action") == "crossbar_state" && rec.payload.at("sensor") == "gps") {
            if (rec.payload.at("connected") == "0") {
                isolated = true;
                CHECK(rec.payload.at("rx_line") == "idle");
            }
        }
        if (rec.kind == "mitigation" && rec.payload.count("phase") &&
            rec.payload.at("phase") == "recovered")
            reconnect_tick = rec.tick;
    }
    CHECK(isolated);
    REQUIRE(reconnect_tick > 0);

    // delivery rate after mitigation matches the nominal run exactly
    auto& nominal = shipped_run("nominal", sc.horizon_ticks);
    auto stored_after = [&](const cpsmon::testing::RunHandle& h) {
        std::set<std::pair<Tick, std::string>> out;
        for (const auto& rec : h.records())
            if (rec.kind == "frame" && rec.source == "hrim" &&
                rec.payload.at("phase") == "stored" && rec.payload.at("sensor") == "gps" &&
                rec.tick > reconnect_tick)
                out.insert({rec.tick, rec.payload.at("seq")});
        return out;
    };
    CHECK(stored_after(run) == stored_after(nominal));
    CHECK(stored_after(run).size() > 0);
    c.passed = true;
}

TEST_CASE("criterion 3: lockup experiment") {
    Criterion c{3, "lockup experiment"};
    auto& run = shipped_run("gps_lockup");
    const auto& sc = run.runner->scenario();
    Tick attack_tick = sc.attacks.front().at_tick;
    Tick t_d = sc.t_d_for("gps");

    Tick disconnect =
        first_event_tick(run, ec::act(vocab::kI2mSendInfoToDisconnect, "gps"), "inactivity");
    CHECK(disconnect == attack_tick + t_d);

    auto& nominal = shipped_run("nominal", sc.horizon_ticks);
    CHECK(run.runner->i2m().pass_count("baro") == nominal.runner->i2m().pass_count("baro"));
    CHECK(run.runner->i2m().pass_count("baro") > 0);
    c.passed = true;
}

TEST_CASE("criterion 4: stuck-value detection") {
    Criterion c{4, "stuck-value detection"};
    auto& run = shipped_run("stuck_value");
    const auto& sc = run.runner->scenario();
    int r_max = sc.r_max;

    // collect gps parse outcomes in seq order
    std::vector<std::pair<std::int64_t, std::string>> outcomes;
    for (const auto& rec : run.records()) {
        if (rec.kind != "event" || !rec.payload.count("action")) continue;
        if (rec.payload.at("action") != ec::act(vocab::kI2mParseData, "gps")) continue;
        outcomes.emplace_back(std::stoll(rec.payload.at("ctx_seq")), rec.payload.at("ctx_detail"));
    }
    REQUIRE_FALSE(outcomes.empty());

    // the stuck payload starts with the first emission after the injection
    Tick emit = sc.sensor("gps").emit_period_ticks;
    std::int64_t first_stuck_seq = (sc.attacks.front().at_tick / emit + 1);
    std::int64_t expected_fail_seq = first_stuck_seq + r_max;  // the (r_max+1)-th identical

    std::int64_t first_fail_seq = -1;
    for (const auto& [seq, detail] : outcomes) {
        if (detail == "fail:repeat") {
            first_fail_seq = seq;
            break;
        }
        CHECK(detail == "pass");  // never earlier
    }
    CHECK(first_fail_seq == expected_fail_seq);
    c.passed = true;
}

TEST_CASE("criterion 5: return-tamper experiment") {
    Criterion c{5, "return-tamper experiment"};
    auto& run = shipped_run("return_tamper");
    const auto& sc = run.runner->scenario();
    Tick inject = sc.attacks.front().at_tick;
    REQUIRE(sc.failsafe_address == 0x08006168);

    // tampered(return) on the first affected branch event
    Tick tampered_tick = -1;
    for (const auto& rec : run.records()) {
        if (rec.kind == "branch" && rec.source == "eim" &&
            rec.payload.at("verdict") == "tampered") {
            tampered_tick = rec.tick;
            CHECK(rec.payload.at("field") == "return");
            break;
        }
    }
    REQUIRE(tampered_tick > inject);
    Tick first_branch_touching = -1;
    for (const auto& rec : run.records())
        if (rec.kind == "branch" && rec.source == "plant" && rec.tick > inject &&
            rec.payload.at("kind") == "return") {
            first_branch_touching = rec.tick;
            break;
        }
    CHECK(tampered_tick == first_branch_touching);

    // next executed address is the failsafe
    bool redirected = false;
    for (const auto& rec : run.records())
        if (rec.kind == "event" && rec.payload.count("action") &&
            rec.payload.at("action") == "redirect_applied") {
            redirected = true;
            CHECK(rec.tick == tampered_tick + 1);
            CHECK(std::stoull(rec.payload.at("address"), nullptr, 0) == sc.failsafe_address);
        }
    CHECK(redirected);

    // monitor-vs-memory comparison flips from match to mismatch at injection
    Tick first_mismatch = -1;
    bool match_before = false;
    for (const auto& rec : run.records()) {
        if (rec.kind != "memory_check") continue;
        if (rec.payload.at("status") == "match" && first_mismatch < 0) match_before = true;
        if (rec.payload.at("status") == "mismatch" && first_mismatch < 0) first_mismatch = rec.tick;
    }
    CHECK(match_before);
    CHECK(first_mismatch == inject);
    c.passed = true;
}

TEST_CASE("criterion 6: firmware gate") {
    Criterion c{6, "firmware gate"};
    auto& run = shipped_run("firmware_corrupt");
    CHECK(run.runner->eim().permit() == eim::ExecutionPermit::Withheld);
    std::int64_t branch_records = 0;
    for (const auto& rec : run.records())
        if (rec.kind == "branch") ++branch_records;
    CHECK(branch_records == 0);
    CHECK(run.result.exit_code == 2);
    c.passed = true;
}

TEST_CASE("criterion 7: event-calculus oracle equivalence") {
    Criterion c{7, "ec oracle equivalence"};
    SplitMix64 rng(0xacce97);
    int mismatches = 0;
    for (int i = 0; i < 1'000; ++i) {
        auto cs = cpsmon::testing::random_ec_case(rng);
        ec::Engine engine(cs.rules, cs.timeline);
        for (const auto& f : cs.fluents) engine.declare_fluent(f);
        for (const auto& f : cs.fluents) {
            for (Tick t = 0; t <= cs.timeline.horizon(); ++t)
                if (engine.holds_at(f, t) != cpsmon::testing::naive_holds_at(cs.rules, cs.timeline, f, t))
                    ++mismatches;
            for (Tick t1 = 0; t1 <= cs.timeline.horizon(); t1 += 2)
                for (Tick t2 = t1; t2 <= cs.timeline.horizon(); t2 += 3)
                    if (engine.clipped(t1, f, t2) !=
                        cpsmon::testing::naive_clipped(cs.rules, cs.timeline, t1, f, t2))
                        ++mismatches;
        }
    }
    CHECK(mismatches == 0);
    c.passed = true;
}

TEST_CASE("criterion 8: pattern conformance across scenarios") {
    Criterion c{8, "pattern conformance"};
    using ec::PatternStatus;

    struct Expectation {
        const char* scenario;
        std::set<std::string> violated;  // exactly these are Violated
        std::set<std::string> fired;     // these fired (triggered and satisfied)
    };
    const std::vector<Expectation> table = {
        {"nominal", {}, {}},
        {"baud_attack", {}, {"hrim-4:gps", "i2m-6:gps"}},
        {"gps_lockup", {}, {"hrim-4:gps", "i2m-6:gps"}},
        {"stuck_value", {}, {"hrim-4:gps", "i2m-6:gps"}},
        {"return_tamper", {"eim-3"}, {"eim-4"}},
        {"firmware_corrupt", {"eim-1"}, {}},
    };

    for (const auto& exp : table) {
        auto& run = shipped_run(exp.scenario);
        auto outcomes = run.runner->pattern_outcomes();
        for (const auto& entry : outcomes) {
            const std::string& name = entry.first;
            const ec::PatternOutcome& outcome = entry.second;
            if (exp.violated.count(name)) {
                CHECK_MESSAGE(outcome.status == PatternStatus::Violated,
                              exp.scenario << " " << name << " should be violated");
            } else {
                CHECK_MESSAGE(outcome.status != PatternStatus::Violated,
                              exp.scenario << " " << name << " unexpectedly violated (clause "
                                           << outcome.failing_clause << " at "
                                           << outcome.violation_tick << ")");
            }
            if (exp.fired.count(name))
                CHECK_MESSAGE(outcome.fired(), exp.scenario << " " << name << " should have fired");
        }
        // incremental trackers agree with full evaluation on the final timeline
        Tick last = run.runner->scenario().horizon_ticks - 1;
        auto& engine = run.runner->engine();
        for (const auto* mon : {&run.runner->hrim().core(), &run.runner->i2m().core(),
                                &run.runner->eim().core()})
            for (const auto& pattern : mon->patterns()) {
                auto full = ec::evaluate_pattern(pattern, engine, last);
                CHECK_MESSAGE(full.status == outcomes.at(pattern.name()).status,
                              exp.scenario << " " << pattern.name() << " tracker/full mismatch");
            }
    }
    c.passed = true;
}

TEST_CASE("criterion 9: determinism and forensic replay") {
    Criterion c{9, "determinism & forensics"};
    for (const char* name : {"nominal", "baud_attack", "gps_lockup", "stuck_value",
                             "return_tamper", "firmware_corrupt"}) {
        auto& first = shipped_run(name);
        auto started = std::chrono::steady_clock::now();
        auto second = cpsmon::testing::run_scenario(cpsmon::testing::load_shipped(name));
        auto elapsed = std::chrono::steady_clock::now() - started;
        CHECK_MESSAGE(std::chrono::duration_cast<std::chrono::seconds>(elapsed).count() < 10,
                      name << " exceeded the 10 s budget");
        auto third = cpsmon::testing::run_scenario(cpsmon::testing::load_shipped(name));
        CHECK_MESSAGE(first.serialized() == second.serialized(), name << " run 2 differs");
        CHECK_MESSAGE(second.serialized() == third.serialized(), name << " run 3 differs");
        auto report = sim::verify_log(first.records());
        CHECK_MESSAGE(report.divergences.empty(),
                      name << ": " << report.summary() << (report.divergences.empty()
                                                               ? ""
                                                               : " first: " +
                                                                     report.divergences[0].what));
    }
    c.passed = true;
}

TEST_CASE("criterion 10: detection completeness per threat layer") {
    Criterion c{10, "detection completeness"};
    for (const char* name :
         {"baud_attack", "gps_lockup", "stuck_value", "return_tamper", "firmware_corrupt"}) {
        auto& run = shipped_run(name);
        const auto& sc = run.runner->scenario();
        const auto& attack = sc.attacks.front();
        std::string sensor = attack.target.empty() ? "gps" : attack.target;
        auto timing = run.runner->timing_for(sensor, attack.new_baud);
        auto gt = harness::ground_truth_for(attack, timing);

        auto rejected = rejected_verdicts(run);
        REQUIRE_MESSAGE(!rejected.empty(), name << ": no rejection seen");
        CHECK_MESSAGE(rejected.front().second == gt.expected_monitor,
                      name << ": first rejection from " << rejected.front().second << ", expected "
                           << gt.expected_monitor);
        CHECK_MESSAGE(rejected.front().first == gt.observable_from,
                      name << ": first rejection at " << rejected.front().first << ", expected "
                           << gt.observable_from);
        for (const auto& stream : gt.streams)
            CHECK(run.runner->streams().has_stream(stream));
    }
    c.passed = true;
}
