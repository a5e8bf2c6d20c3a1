#pragma once

// Declarative experiment description: plant setup, monitor configuration and
// scheduled attacks. Stored as JSON (see docs/formats.md).

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cpsmon/harness.hpp"
#include "cpsmon/plant.hpp"
#include "cpsmon/util.hpp"

namespace cpsmon::sim {

struct ScenarioSensor {
    std::string id;
    std::string kind;  // gps | baro
    Tick emit_period_ticks = 10'000;
    std::int64_t baud = 57'600;
};

struct Scenario {
    int version = 1;
    std::string name;
    Tick horizon_ticks = 0;
    std::uint64_t seed = 0;

    // plant
    std::vector<ScenarioSensor> sensors;
    std::string firmware_path;  // empty = builtin program
    std::string ref_cfg_path;   // empty = derived from the builtin program
    std::uint64_t firmware_base = plant::kFlashBase;
    std::uint64_t failsafe_address = plant::kDefaultFailsafeAddress;
    int instructions_per_tick = 1;

    // monitors
    double baud_tolerance = 0.05;
    int idle_gap_bytes = 2;
    std::map<std::string, Tick> t_d_ticks;  // default 3x emit period
    int r_max = 5;
    bool check_checksum = true;
    bool check_range = true;
    bool check_repeat = true;
    // per-sensor decoded-field bounds; defaults depend on the sensor kind
    std::map<std::string, std::map<std::string, std::pair<std::int64_t, std::int64_t>>> ranges;
    int mitigation_retries = 3;
    bool eim_paranoid = false;
    bool eim_continuous_hash = false;
    std::vector<Tick> eim_recheck_ticks;

    std::vector<harness::AttackSpec> attacks;

    Tick t_d_for(const std::string& sensor_id) const;
    const ScenarioSensor& sensor(const std::string& id) const;
    static std::size_t frame_bytes(const std::string& kind);

    // Throws ParseError on schema or consistency violations.
    void validate() const;

    std::string to_json_string() const;
    static Scenario from_json_string(const std::string& text);
    static Scenario load(const std::string& path);
    void save(const std::string& path) const;
};

}  // namespace cpsmon::sim
