#include "doctest.h"

#include "cpsmon/harness.hpp"
#include "cpsmon/vocab.hpp"
#include "run_helpers.hpp"

using namespace cpsmon;
using namespace cpsmon::harness;

TEST_CASE("attack table maps every kind to one layer and one monitor") {
    auto table = attack_table();
    CHECK(table.size() == 6);
    for (const auto& row : table) {
        CHECK((row.layer == "hardware" || row.layer == "information" || row.layer == "execution"));
        CHECK((row.monitor == "hrim" || row.monitor == "i2m" || row.monitor == "eim"));
    }
    CHECK(table[0].kind == AttackKind::BaudChange);
    CHECK(table[0].layer == "hardware");
    CHECK(table[4].kind == AttackKind::MemoryTamper);
    CHECK(table[4].monitor == "eim");
}

TEST_CASE("apply mutates the plant per attack kind") {
    auto sc = cpsmon::testing::small_scenario("apply", 100);
    sim::Runner runner(sc);
    auto& plant = runner.plant();

    AttackSpec baud;
    baud.kind = AttackKind::BaudChange;
    baud.target = "gps";
    baud.at_tick = 0;
    baud.recoverable = true;
    baud.new_baud = 115'200;
    Harness::apply(plant, baud, 0);
    CHECK(plant.sensor_config("gps").bus.baud == 115'200);

    AttackSpec lockup;
    lockup.kind = AttackKind::UartLockup;
    lockup.target = "gps";
    lockup.at_tick = 0;
    lockup.recoverable = false;
    Harness::apply(plant, lockup, 0);
    CHECK(plant.receiver_locked("gps"));

    AttackSpec tamper;
    tamper.kind = AttackKind::MemoryTamper;
    tamper.target = "";
    tamper.at_tick = 0;
    tamper.recoverable = false;
    tamper.address = plant::kFlashBase + 10;
    tamper.value = 0xabcd;
    Harness::apply(plant, tamper, 0);
    CHECK(plant.read_word(plant::kFlashBase + 10) == 0xabcd);

    AttackSpec fw;
    fw.kind = AttackKind::FirmwareCorrupt;
    fw.target = "";
    fw.at_tick = 0;
    fw.recoverable = false;
    fw.byte_offset = 4;
    fw.byte_value = 0xee;
    auto before = plant.live_firmware().digest();
    Harness::apply(plant, fw, 0);
    CHECK(plant.live_firmware().digest() != before);
}

TEST_CASE("unknown target is rejected at injection time") {
    auto sc = cpsmon::testing::small_scenario("badtarget", 100);
    sim::Runner runner(sc);
    AttackSpec spec;
    spec.kind = AttackKind::UartLockup;
    spec.target = "imu";
    spec.at_tick = 5;
    spec.recoverable = false;
    Harness h({spec});
    runner.plant().step(0);
    CHECK(h.apply_due(runner.plant(), 4).empty());
    CHECK_THROWS_AS(h.apply_due(runner.plant(), 5), UnknownTarget);
}

TEST_CASE("injection log records every applied spec exactly once") {
    auto sc = cpsmon::testing::small_scenario("log", 40'000);
    harness::AttackSpec stuck;
    stuck.kind = AttackKind::StuckValue;
    stuck.target = "gps";
    stuck.at_tick = 15;
    stuck.recoverable = true;
    sc.attacks.push_back(stuck);
    auto run = cpsmon::testing::run_scenario(std::move(sc));
    const auto& applied = run.runner->attack_harness().injection_log().applied;
    REQUIRE(applied.size() == 1);
    CHECK(applied[0].second == 15);
    CHECK(applied[0].first.kind == AttackKind::StuckValue);
}

TEST_CASE("ground truth arithmetic per attack kind") {
    auto sc = cpsmon::testing::load_shipped("baud_attack");
    sim::Runner runner(sc);

    AttackSpec baud = sc.attacks.front();
    auto gt = ground_truth_for(baud, runner.timing_for("gps", baud.new_baud));
    CHECK(gt.expected_monitor == "hrim");
    CHECK(gt.layer == "hardware");
    CHECK(gt.observable_from == 10'000 + 10 * 9);  // first byte of the re-timed frame
    REQUIRE(gt.streams.size() == 1);
    CHECK(gt.streams[0] == "bus.gps");

    AttackSpec stuck;
    stuck.kind = AttackKind::StuckValue;
    stuck.target = "gps";
    stuck.at_tick = 15'000;
    stuck.recoverable = true;
    auto gt2 = ground_truth_for(stuck, runner.timing_for("gps"));
    // r_max extra periods after the first stuck frame, plus transport latency
    Tick store_latency = 45 * 10 * 17 + 2 * 10 * 17 + 1;
    CHECK(gt2.observable_from == 20'000 + 5 * 10'000 + store_latency);
    CHECK(gt2.expected_monitor == "i2m");

    AttackSpec fw;
    fw.kind = AttackKind::FirmwareCorrupt;
    fw.target = "";
    fw.at_tick = 0;
    fw.recoverable = false;
    auto gt3 = ground_truth_for(fw, runner.timing_for("gps"));
    CHECK(gt3.observable_from == 0);  // caught by the boot gate
    CHECK(gt3.expected_monitor == "eim");
}

TEST_CASE("scenario-level ground truth covers every scheduled attack") {
    auto sc = cpsmon::testing::load_shipped("baud_attack");
    auto entries = sim::scenario_ground_truth(sc);
    REQUIRE(entries.size() == 1);
    CHECK(entries[0].expected_monitor == "hrim");
    CHECK(entries[0].observable_from == 10'090);
}

TEST_CASE("no attacks means the plant trace equals the golden trace") {
    auto sc = cpsmon::testing::small_scenario("golden", 30'000);
    auto a = cpsmon::testing::run_scenario(sc);
    auto b = cpsmon::testing::run_scenario(sc);
    CHECK(a.serialized() == b.serialized());
}

TEST_CASE("frame corruption is caught by the information monitor") {
    auto sc = cpsmon::testing::small_scenario("corrupt", 40'000);
    AttackSpec spec;
    spec.kind = AttackKind::FrameCorrupt;
    spec.target = "gps";
    spec.at_tick = 5'000;
    spec.recoverable = true;
    spec.byte_offset = 12;
    spec.byte_value = 0x7f;
    sc.attacks.push_back(spec);
    auto run = cpsmon::testing::run_scenario(sc);
    CHECK(run.result.exit_code == 2);
    REQUIRE(run.result.first_rejected.count("i2m"));
    CHECK_FALSE(run.result.first_rejected.count("hrim"));  // timing is untouched
    CHECK_FALSE(run.result.first_rejected.count("eim"));

    sim::Runner probe(sc);
    auto gt = ground_truth_for(spec, probe.timing_for("gps"));
    CHECK(run.result.first_rejected.at("i2m") == gt.observable_from);
}
