#pragma once

// Deterministic scenario execution: plant step, injections, HRIM, I2M, EIM,
// log flush, once per tick.

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cpsmon/context.hpp"
#include "cpsmon/eim.hpp"
#include "cpsmon/harness.hpp"
#include "cpsmon/hrim.hpp"
#include "cpsmon/i2m.hpp"
#include "cpsmon/logrec.hpp"
#include "cpsmon/monitor.hpp"
#include "cpsmon/scenario.hpp"

namespace cpsmon::sim {

struct RunResult {
    int exit_code = 0;  // 0 safe, 2 at least one Rejected verdict
    std::int64_t rejected_ticks = 0;
    std::map<std::string, Tick> first_rejected;  // monitor id -> tick
    bool program_halted = false;
};

class Runner {
public:
    explicit Runner(Scenario scenario);

    RunResult run(LogWriter& log);

    const Scenario& scenario() const { return scenario_; }
    plant::Plant& plant() { return *plant_; }
    hrim::Hrim& hrim() { return *hrim_; }
    i2m::I2m& i2m() { return *i2m_; }
    eim::Eim& eim() { return *eim_; }
    ec::Engine& engine() { return *engine_; }
    ec::Timeline& timeline() { return *timeline_; }
    streams::MonitoredStreams& streams() { return ms_; }
    const plant::BuiltFirmware& built() const { return built_; }
    const harness::Harness& attack_harness() const { return *harness_; }

    // Final pattern outcomes by pattern name (valid after run()).
    std::map<std::string, ec::PatternOutcome> pattern_outcomes() const;

    std::vector<std::string> sensor_ids() const;
    harness::TimingModel timing_for(const std::string& sensor_id,
                                    std::int64_t attacked_baud = 0) const;

private:
    void wire_graph();
    void apply_actuation(const mon::MonitorEvent& ev);
    void log_meta(LogWriter& log);

    Scenario scenario_;
    plant::BuiltFirmware built_;
    std::unique_ptr<plant::Plant> plant_;
    streams::MonitoredStreams ms_;
    ec::RuleSet rules_;
    std::unique_ptr<ec::Timeline> timeline_;
    std::unique_ptr<ec::Engine> engine_;
    std::unique_ptr<hrim::Hrim> hrim_;
    std::unique_ptr<i2m::I2m> i2m_;
    std::unique_ptr<eim::Eim> eim_;
    std::unique_ptr<harness::Harness> harness_;
    mon::MonitorGraph graph_;
    std::unique_ptr<mon::Scheduler> scheduler_;
    LogWriter* log_ = nullptr;
    const plant::StepOutput* current_out_ = nullptr;
    std::map<std::string, plant::CrossbarState> last_crossbar_;
    std::string last_cpu_mode_;
};

// Monitor configurations derived from a scenario; shared with the verifier.
hrim::HrimConfig build_hrim_config(const Scenario& sc);
i2m::I2mConfig build_i2m_config(const Scenario& sc);

// Timing model for one sensor, from scenario arithmetic alone.
harness::TimingModel scenario_timing(const Scenario& sc, const std::string& sensor_id,
                                     std::int64_t attacked_baud = 0);
// Expected observability of every scheduled attack.
std::vector<harness::GroundTruthEntry> scenario_ground_truth(const Scenario& sc);

// Convenience: run a scenario end to end, write the log file, return result.
RunResult run_scenario_file(const std::string& scenario_path, const std::string& log_path,
                            std::uint64_t seed_override, Tick ticks_override);

}  // namespace cpsmon::sim
