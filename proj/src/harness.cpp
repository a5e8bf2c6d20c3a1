#include "cpsmon/harness.hpp"

#include <algorithm>

namespace cpsmon::harness {

std::string attack_kind_name(AttackKind kind) {
    switch (kind) {
        case AttackKind::BaudChange: return "baud_change";
        case AttackKind::UartLockup: return "uart_lockup";
        case AttackKind::StuckValue: return "stuck_value";
        case AttackKind::FrameCorrupt: return "frame_corrupt";
        case AttackKind::MemoryTamper: return "memory_tamper";
        case AttackKind::FirmwareCorrupt: return "firmware_corrupt";
    }
    return "?";
}

std::optional<AttackKind> attack_kind_from(const std::string& name) {
    if (name == "baud_change") return AttackKind::BaudChange;
    if (name == "uart_lockup") return AttackKind::UartLockup;
    if (name == "stuck_value") return AttackKind::StuckValue;
    if (name == "frame_corrupt") return AttackKind::FrameCorrupt;
    if (name == "memory_tamper") return AttackKind::MemoryTamper;
    if (name == "firmware_corrupt") return AttackKind::FirmwareCorrupt;
    return std::nullopt;
}

std::vector<AttackRow> attack_table() {
    return {
        {AttackKind::BaudChange, "hardware", "hrim", "target, new_baud, recoverable"},
        {AttackKind::UartLockup, "information", "i2m", "target, recoverable"},
        {AttackKind::StuckValue, "information", "i2m", "target, [stuck_payload], recoverable"},
        {AttackKind::FrameCorrupt, "information", "i2m", "target, byte_offset, byte_value, recoverable"},
        {AttackKind::MemoryTamper, "execution", "eim", "address, value"},
        {AttackKind::FirmwareCorrupt, "execution", "eim", "byte_offset, byte_value"},
    };
}

void Harness::apply(plant::Plant& plant, const AttackSpec& spec, Tick tick) {
    (void)tick;
    switch (spec.kind) {
        case AttackKind::BaudChange:
            plant.attack_baud(spec.target, spec.new_baud, spec.recoverable);
            break;
        case AttackKind::UartLockup:
            plant.attack_lock_receiver(spec.target, spec.recoverable);
            break;
        case AttackKind::StuckValue:
            plant.attack_stuck(spec.target,
                               spec.stuck_payload.empty()
                                   ? std::optional<std::vector<std::uint8_t>>{}
                                   : std::optional<std::vector<std::uint8_t>>{spec.stuck_payload},
                               spec.recoverable);
            break;
        case AttackKind::FrameCorrupt:
            plant.attack_frame_corrupt(spec.target, spec.byte_offset, spec.byte_value,
                                       spec.recoverable);
            break;
        case AttackKind::MemoryTamper:
            plant.tamper_memory(spec.address, spec.value);
            break;
        case AttackKind::FirmwareCorrupt:
            plant.corrupt_firmware_byte(spec.byte_offset, spec.byte_value);
            break;
    }
}

std::vector<AttackSpec> Harness::apply_due(plant::Plant& plant, Tick tick) {
    std::vector<AttackSpec> fired;
    for (const auto& spec : attacks_) {
        if (spec.at_tick != tick) continue;
        bool sensor_attack = spec.kind == AttackKind::BaudChange ||
                             spec.kind == AttackKind::UartLockup ||
                             spec.kind == AttackKind::StuckValue ||
                             spec.kind == AttackKind::FrameCorrupt;
        if (sensor_attack) {
            auto ids = plant.sensor_ids();
            if (std::find(ids.begin(), ids.end(), spec.target) == ids.end())
                throw UnknownTarget("attack target '" + spec.target + "' is not a sensor");
        }
        apply(plant, spec, tick);
        log_.applied.emplace_back(spec, tick);
        fired.push_back(spec);
    }
    return fired;
}

GroundTruthEntry ground_truth_for(const AttackSpec& spec, const TimingModel& timing) {
    GroundTruthEntry e;
    e.spec = spec;
    auto layer_of = [&spec] {
        for (const auto& row : attack_table())
            if (row.kind == spec.kind) return std::pair{row.layer, row.monitor};
        return std::pair{std::string("?"), std::string("?")};
    }();
    e.layer = layer_of.first;
    e.expected_monitor = layer_of.second;

    // First emission strictly after the injection tick (the injection lands
    // after the plant step of its own tick).
    Tick next_emission =
        timing.emit_period > 0 ? (spec.at_tick / timing.emit_period + 1) * timing.emit_period : 0;
    Tick frame_ticks = static_cast<Tick>(timing.frame_len) * 10 * timing.nominal_bit_period;
    Tick store_latency = frame_ticks + timing.idle_gap_ticks + timing.store_delay;

    switch (spec.kind) {
        case AttackKind::BaudChange:
            // first byte of the first re-timed frame
            e.observable_from = next_emission + 10 * timing.attacked_bit_period;
            e.streams = {"bus." + spec.target};
            break;
        case AttackKind::UartLockup:
            // silence; the inactivity window runs out t_d after the last
            // delivery (the shipped scenario injects right after one)
            e.observable_from = spec.at_tick + timing.t_d;
            e.streams = {"hrim.regs." + spec.target};
            break;
        case AttackKind::StuckValue:
            // the (r_max+1)-th identical frame lands in the registers
            e.observable_from =
                next_emission + static_cast<Tick>(timing.r_max) * timing.emit_period + store_latency;
            e.streams = {"hrim.regs." + spec.target};
            break;
        case AttackKind::FrameCorrupt:
            e.observable_from = next_emission + store_latency;
            e.streams = {"hrim.regs." + spec.target};
            break;
        case AttackKind::MemoryTamper:
            e.observable_from = spec.at_tick;  // the memory watch flips immediately
            e.streams = {"eim.watch", "delta.program"};
            break;
        case AttackKind::FirmwareCorrupt:
            e.observable_from = spec.at_tick == 0 ? 0 : spec.at_tick;
            e.streams = {"eim.fwcheck"};
            break;
    }
    return e;
}

}  // namespace cpsmon::harness
