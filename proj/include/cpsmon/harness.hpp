#pragma once

// Scenario-driven fault/attack injection across the three threat-model
// layers: hardware (baud manipulation, receiver lockup), information
// (stuck/corrupted frames), execution (memory tamper, firmware corruption).

#include <optional>
#include <string>
#include <vector>

#include "cpsmon/plant.hpp"
#include "cpsmon/util.hpp"

namespace cpsmon::harness {

enum class AttackKind {
    BaudChange,
    UartLockup,
    StuckValue,
    FrameCorrupt,
    MemoryTamper,
    FirmwareCorrupt,
};

std::string attack_kind_name(AttackKind kind);
std::optional<AttackKind> attack_kind_from(const std::string& name);

struct AttackSpec {
    AttackKind kind = AttackKind::BaudChange;
    std::string target;  // sensor id for sensor attacks
    Tick at_tick = 0;
    bool recoverable = true;
    std::int64_t new_baud = 0;                       // baud_change
    std::vector<std::uint8_t> stuck_payload;         // stuck_value (empty = freeze next)
    std::uint64_t address = 0;                       // memory_tamper
    std::uint32_t value = 0;                         // memory_tamper
    std::uint64_t byte_offset = 0;                   // frame_corrupt / firmware_corrupt
    std::uint8_t byte_value = 0;                     // frame_corrupt / firmware_corrupt
};

struct AttackRow {
    AttackKind kind;
    std::string layer;      // hardware | information | execution
    std::string monitor;    // detecting monitor
    std::string params;
};

// One row per implemented attack kind, stable ordering.
std::vector<AttackRow> attack_table();

struct GroundTruthEntry {
    AttackSpec spec;
    Tick observable_from = 0;  // earliest tick the effect reaches a monitored stream
    std::vector<std::string> streams;
    std::string expected_monitor;
    std::string layer;
};

struct InjectionLog {
    std::vector<std::pair<AttackSpec, Tick>> applied;
};

class Harness {
public:
    explicit Harness(std::vector<AttackSpec> attacks) : attacks_(std::move(attacks)) {}

    // Applies every spec scheduled for `tick`. Throws UnknownTarget when the
    // spec names a sensor the plant does not have.
    std::vector<AttackSpec> apply_due(plant::Plant& plant, Tick tick);

    static void apply(plant::Plant& plant, const AttackSpec& spec, Tick tick);

    const InjectionLog& injection_log() const { return log_; }
    const std::vector<AttackSpec>& attacks() const { return attacks_; }

private:
    std::vector<AttackSpec> attacks_;
    InjectionLog log_;
};

// Plant/monitor timing constants needed to predict observability.
struct TimingModel {
    Tick emit_period = 0;
    std::size_t frame_len = 0;
    std::int64_t nominal_bit_period = 0;
    std::int64_t attacked_bit_period = 0;  // baud_change only
    Tick idle_gap_ticks = 0;
    Tick store_delay = 1;
    Tick t_d = 0;
    int r_max = 0;
};

// Earliest observable effect of a spec, computed from scenario arithmetic
// alone (never from a run).
GroundTruthEntry ground_truth_for(const AttackSpec& spec, const TimingModel& timing);

}  // namespace cpsmon::harness
