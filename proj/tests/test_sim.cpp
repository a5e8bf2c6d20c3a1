#include "doctest.h"

#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "cpsmon/firmware.hpp"
#include "cpsmon/logrec.hpp"
#include "cpsmon/scenario.hpp"
#include "cpsmon/verifier.hpp"
#include "run_helpers.hpp"

using namespace cpsmon;
using namespace cpsmon::sim;

TEST_CASE("scenario round-trips through JSON") {
    auto sc = cpsmon::testing::load_shipped("baud_attack");
    auto back = Scenario::from_json_string(sc.to_json_string());
    CHECK(back.name == sc.name);
    CHECK(back.horizon_ticks == sc.horizon_ticks);
    CHECK(back.seed == sc.seed);
    CHECK(back.sensors.size() == sc.sensors.size());
    REQUIRE(back.attacks.size() == 1);
    CHECK(back.attacks[0].new_baud == 115'200);
    CHECK(back.t_d_for("gps") == sc.t_d_for("gps"));
}

TEST_CASE("scenario validation failures") {
    auto base = cpsmon::testing::small_scenario("v", 1'000);

    SUBCASE("attack beyond horizon") {
        harness::AttackSpec a;
        a.kind = harness::AttackKind::UartLockup;
        a.target = "gps";
        a.at_tick = 1'000;
        a.recoverable = false;
        base.attacks.push_back(a);
        CHECK_THROWS_AS(base.validate(), ParseError);
    }
    SUBCASE("duplicate sensor ids") {
        base.sensors.push_back(base.sensors.front());
        CHECK_THROWS_AS(base.validate(), ParseError);
    }
    SUBCASE("t_d must exceed the emit period") {
        base.t_d_ticks["gps"] = 100;
        CHECK_THROWS_AS(base.validate(), ParseError);
    }
    SUBCASE("tolerance bounds") {
        base.baud_tolerance = 0.5;
        CHECK_THROWS_AS(base.validate(), ParseError);
    }
    SUBCASE("unknown attack target") {
        harness::AttackSpec a;
        a.kind = harness::AttackKind::StuckValue;
        a.target = "imu";
        a.at_tick = 10;
        a.recoverable = true;
        base.attacks.push_back(a);
        CHECK_THROWS_AS(base.validate(), ParseError);
    }
    SUBCASE("not json") { CHECK_THROWS_AS(Scenario::from_json_string("{nope"), ParseError); }
}

TEST_CASE("log records round-trip through JSON lines") {
    LogRecord rec;
    rec.tick = 42;
    rec.source = "hrim";
    rec.kind = "frame";
    rec.seq = 7;
    rec.payload = {{"sensor", "gps"}, {"len", "45"}};
    auto line = to_json_line(rec);
    auto back = from_json_line(line);
    CHECK(back.tick == rec.tick);
    CHECK(back.source == rec.source);
    CHECK(back.kind == rec.kind);
    CHECK(back.seq == rec.seq);
    CHECK(back.payload == rec.payload);
    CHECK_THROWS_AS(from_json_line("not json"), CorruptLog);
}

TEST_CASE("verify: clean log reports zero divergences") {
    auto& run = cpsmon::testing::shipped_run("baud_attack");
    auto report = verify_log(run.records());
    CHECK(report.divergences.empty());
    CHECK(report.summary().rfind("0 divergences", 0) == 0);
}

TEST_CASE("verify: a deleted verdict record is reported at its tick") {
    auto& run = cpsmon::testing::shipped_run("baud_attack");
    std::vector<LogRecord> records = run.records();
    Tick removed_at = -1;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].kind == "verdict" && records[i].payload.at("status") == "rejected") {
            removed_at = records[i].tick;
            records.erase(records.begin() + static_cast<std::ptrdiff_t>(i));
            break;
        }
    }
    REQUIRE(removed_at >= 0);
    auto report = verify_log(records);
    REQUIRE_FALSE(report.divergences.empty());
    bool at_tick = false;
    for (const auto& d : report.divergences)
        if (d.tick == removed_at) at_tick = true;
    CHECK(at_tick);
}

TEST_CASE("verify: a tampered frame payload diverges") {
    auto& run = cpsmon::testing::shipped_run("nominal");
    std::vector<LogRecord> records = run.records();
    bool mutated = false;
    for (auto& rec : records) {
        if (rec.kind == "frame" && rec.source == "hrim" && rec.payload.at("phase") == "stored") {
            auto payload = rec.payload.at("payload");
            payload[10] = payload[10] == '0' ? '1' : '0';  // flip one hex digit
            rec.payload["payload"] = payload;
            mutated = true;
            break;
        }
    }
    REQUIRE(mutated);
    auto report = verify_log(records);
    CHECK_FALSE(report.divergences.empty());
}

TEST_CASE("verify: out-of-order records are a corrupt log") {
    auto& run = cpsmon::testing::shipped_run("nominal");
    std::vector<LogRecord> records = run.records();
    REQUIRE(records.size() > 10);
    std::swap(records[5], records[6]);
    CHECK_THROWS_AS(verify_log(records), CorruptLog);

    std::vector<LogRecord> headless(run.records().begin() + 1, run.records().end());
    CHECK_THROWS_AS(verify_log(headless), CorruptLog);
}

TEST_CASE("external firmware and control-flow table load from files") {
    auto built = plant::build_default_firmware();
    std::string fw_path = "/tmp/cpsmon_ext_fw.bin";
    std::string ref_path = "/tmp/cpsmon_ext_ref.txt";
    built.image.save(fw_path);
    built.reference.save(ref_path);

    auto sc = cpsmon::testing::small_scenario("extfw", 25'000);
    sc.firmware_path = fw_path;
    sc.firmware_base = built.image.base_address;
    sc.ref_cfg_path = ref_path;
    auto run = cpsmon::testing::run_scenario(std::move(sc));
    CHECK(run.result.exit_code == 0);
    CHECK(run.runner->eim().reference_digest() == built.image.digest());
    CHECK(run.runner->eim().branch_checks() > 0);
    std::remove(fw_path.c_str());
    std::remove(ref_path.c_str());
}

TEST_CASE("multiple instructions per tick still stop at branches") {
    auto sc = cpsmon::testing::small_scenario("fast", 20'000);
    sc.instructions_per_tick = 4;
    auto run = cpsmon::testing::run_scenario(std::move(sc));
    CHECK(run.result.exit_code == 0);
    CHECK(run.runner->eim().branch_checks() > 0);
    CHECK(run.runner->eim().tampered_branches() == 0);
    auto report = verify_log(run.records());
    CHECK(report.divergences.empty());
}

TEST_CASE("continuous firmware hashing stays quiet on a clean image") {
    auto sc = cpsmon::testing::small_scenario("hashy", 2'000);
    sc.eim_continuous_hash = true;
    auto run = cpsmon::testing::run_scenario(std::move(sc));
    CHECK(run.result.exit_code == 0);
}

#ifdef CPSMON_TOOL_PATH
namespace {
int run_tool(const std::string& args) {
    std::string cmd = std::string(CPSMON_TOOL_PATH) + " " + args + " > /dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}
}  // namespace

TEST_CASE("cli exit codes: 0 safe, 1 config error, 2 detection") {
    CHECK(run_tool("run " + cpsmon::testing::scenario_path("nominal") +
                   " --ticks 30000 --out /tmp/cpsmon_cli_nominal.jsonl") == 0);
    CHECK(run_tool("run " + cpsmon::testing::scenario_path("baud_attack") +
                   " --out /tmp/cpsmon_cli_baud.jsonl") == 2);

    std::string bad = "/tmp/cpsmon_bad_scenario.json";
    {
        auto sc = cpsmon::testing::load_shipped("baud_attack");
        sc.attacks[0].at_tick = sc.horizon_ticks + 1;
        std::ofstream out(bad);
        out << sc.to_json_string();
    }
    CHECK(run_tool("run " + bad) == 1);
    CHECK(run_tool("verify /tmp/cpsmon_cli_baud.jsonl") == 0);
    CHECK(run_tool("list-attacks") == 0);

    SUBCASE("default log directory comes from the environment") {
        std::string cmd = std::string("CPSMON_LOG_DIR=/tmp ") + CPSMON_TOOL_PATH + " run " +
                          cpsmon::testing::scenario_path("nominal") +
                          " --ticks 20000 > /dev/null 2>&1";
        std::remove("/tmp/nominal.log.jsonl");
        REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
        std::ifstream check("/tmp/nominal.log.jsonl");
        CHECK(check.good());
    }
}
#endif
