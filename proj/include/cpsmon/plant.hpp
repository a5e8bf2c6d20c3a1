#pragma once

// Simulated flight-control target: two sensors on emulated serial buses, a
// crossbar isolation switch, monitor-visible data registers in RAM, and a
// toy-ISA CPU whose branch activity feeds the transition stream.

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cpsmon/firmware.hpp"
#include "cpsmon/util.hpp"

namespace cpsmon::plant {

struct BusConfig {
    std::string bus_id;
    std::int64_t baud = 57'600;
    int data_bits = 8;
    char parity = 'N';
    int stop_bits = 1;

    // round(tick_rate / baud), always >= 1
    std::int64_t bit_period_ticks() const {
        std::int64_t p = (kTickRateHz + baud / 2) / baud;
        return p < 1 ? 1 : p;
    }
    std::int64_t bits_per_byte() const { return 1 + data_bits + stop_bits; }
    std::int64_t byte_duration_ticks() const { return bits_per_byte() * bit_period_ticks(); }
};

struct SensorConfig {
    std::string id;          // "gps" or "baro"
    std::string kind;        // frame format: "gps" (NMEA-like ASCII) | "baro" (binary)
    Tick emit_period_ticks = 10'000;
    BusConfig bus;
};

struct CrossbarState {
    bool connected = true;
    bool rx_line_active = true;  // forced idle while isolated
};

struct CompletedByte {
    std::string sensor_id;
    std::uint8_t value = 0;
    Tick start_tick = 0;
    Tick end_tick = 0;
    bool delivered = false;  // false when the crossbar or a locked receiver dropped it
    bool last_of_frame = false;
    std::int64_t frame_seq = 0;
};

struct EmittedFrame {
    std::string sensor_id;
    std::int64_t seq = 0;
    Tick tick = 0;
    std::vector<std::uint8_t> payload;
};

struct RamWrite {
    std::uint64_t address = 0;
    std::uint32_t value = 0;
};

struct StepOutput {
    std::vector<EmittedFrame> emissions;
    std::vector<CompletedByte> bytes;
    std::vector<BranchEvent> branches;
    std::vector<RamWrite> actuator_writes;
    bool halted_this_tick = false;
    std::optional<std::uint64_t> redirect_applied;
};

struct FrameCounters {
    std::int64_t emitted = 0;
    std::int64_t delivered = 0;  // every byte crossed to the monitor side
    std::int64_t blocked = 0;    // crossbar/locked receiver swallowed at least one byte
    std::int64_t aborted = 0;    // reset cut the transmission short
};

// Modal inter-edge interval; ties resolve to the smallest interval.
// Throws InsufficientEdges when fewer than two edges are present.
std::int64_t measure_bit_period(std::span<const Tick> edge_ticks);

struct PlantConfig {
    std::vector<SensorConfig> sensors;
    FirmwareImage firmware;
    int instructions_per_tick = 1;
    std::uint64_t seed = 0;
};

class Plant {
public:
    explicit Plant(PlantConfig cfg);

    // Advances one tick: applies queued actuations, runs sensor emissions and
    // wire activity, then executes the CPU's instruction budget (stopping at
    // a branch so the monitor can vet it before the next fetch).
    StepOutput step(Tick t);

    // Actuation queue; takes effect at the next tick boundary.
    // queue_crossbar returns the state that will apply.
    CrossbarState queue_crossbar(const std::string& sensor_id, bool connect);
    void queue_sensor_reset(const std::string& sensor_id);
    void queue_sensor_reconfig(const std::string& sensor_id, BusConfig cfg);
    void queue_receiver_reset(const std::string& sensor_id);
    void queue_redirect(std::uint64_t address);

    void permit_execution(bool granted) { execution_permitted_ = granted; }
    bool execution_permitted() const { return execution_permitted_; }
    bool halted() const { return cpu_.halted; }
    std::uint64_t program_counter() const { return cpu_.pc; }

    // Attack surface (mutations applied by the harness at tick boundaries).
    void attack_baud(const std::string& sensor_id, std::int64_t new_baud, bool recoverable);
    void attack_stuck(const std::string& sensor_id, std::optional<std::vector<std::uint8_t>> payload,
                      bool recoverable);
    void attack_lock_receiver(const std::string& sensor_id, bool recoverable);
    void attack_frame_corrupt(const std::string& sensor_id, std::uint64_t byte_offset,
                              std::uint8_t value, bool recoverable);
    void tamper_memory(std::uint64_t address, std::uint32_t value);
    void corrupt_firmware_byte(std::uint64_t byte_offset, std::uint8_t value);

    // Memory access. Monitors own the register blocks inside RAM.
    std::uint32_t read_word(std::uint64_t address) const;
    void write_ram_word(std::uint64_t address, std::uint32_t value);

    std::int64_t measure_bit_period(const std::string& sensor_id) const;
    const std::deque<Tick>& burst_edges(const std::string& sensor_id) const;

    const CrossbarState& crossbar(const std::string& sensor_id) const;
    const SensorConfig& sensor_config(const std::string& sensor_id) const;
    const BusConfig& nominal_bus(const std::string& sensor_id) const;
    bool receiver_locked(const std::string& sensor_id) const;
    const FrameCounters& counters(const std::string& sensor_id) const;
    const FirmwareImage& live_firmware() const { return firmware_; }
    std::vector<std::string> sensor_ids() const;

    // Pure frame generator: (sensor kind, seed, seq) -> payload bytes.
    static std::vector<std::uint8_t> generate_frame(const std::string& kind,
                                                    const std::string& sensor_id,
                                                    std::uint64_t seed, std::int64_t seq);

private:
    struct Transmission {
        Tick start_tick = 0;
        std::int64_t bit_period = 0;
        std::vector<std::uint8_t> bytes;
        std::size_t next_byte = 0;
        std::int64_t seq = 0;
        bool any_blocked = false;
    };

    struct Channel {
        SensorConfig cfg;
        BusConfig nominal_bus;
        CrossbarState crossbar;
        bool receiver_locked = false;
        bool lock_recoverable = true;
        std::optional<std::int64_t> injected_baud;
        bool baud_recoverable = true;
        std::optional<std::vector<std::uint8_t>> stuck_payload;  // empty vector = freeze next
        bool stuck_engaged = false;
        bool stuck_recoverable = true;
        std::optional<std::pair<std::uint64_t, std::uint8_t>> corrupt_byte;
        bool corrupt_recoverable = true;
        std::int64_t next_seq = 0;
        std::optional<Transmission> tx;
        std::deque<Tick> burst_edges;  // receiver-side edges of the current burst
        FrameCounters counters;
    };

    struct Cpu {
        std::uint64_t pc = kFlashBase;
        std::int64_t regs[4] = {0, 0, 0, 0};
        bool flag = false;
        std::uint64_t sp = kStackTop;
        bool halted = false;
    };

    struct PendingActuation {
        enum class Kind { Crossbar, SensorReset, SensorReconfig, ReceiverReset, Redirect };
        Kind kind;
        std::string sensor_id;
        bool connect = false;
        BusConfig bus;
        std::uint64_t address = 0;
    };

    Channel& channel(const std::string& sensor_id);
    const Channel& channel(const std::string& sensor_id) const;
    void apply_pending();
    void run_wire(Channel& ch, Tick t, StepOutput& out);
    void run_cpu(Tick t, StepOutput& out);
    std::uint32_t fetch(std::uint64_t address) const;
    bool ram_in_range(std::uint64_t address) const {
        return address >= kRamBase && address < kRamBase + ram_.size();
    }

    std::map<std::string, Channel> channels_;
    FirmwareImage firmware_;
    std::vector<std::uint32_t> ram_;
    Cpu cpu_;
    int instructions_per_tick_;
    std::uint64_t seed_;
    bool execution_permitted_ = false;
    std::optional<std::uint64_t> pending_redirect_;
    std::vector<PendingActuation> pending_;
    Tick last_tick_ = -1;
};

}  // namespace cpsmon::plant
