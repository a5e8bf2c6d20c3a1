#pragma once

// Information integrity monitor: reads the HRIM registers on data-ready,
// verifies payloads (checksum, range, repetition), watches for subsystem
// inactivity, and orchestrates the reset/reconfigure/reconnect sequence.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cpsmon/context.hpp"
#include "cpsmon/monitor.hpp"
#include "cpsmon/plant.hpp"
#include "cpsmon/streams.hpp"

namespace cpsmon::i2m {

enum class FailReason { Checksum, Range, Repeat };

struct VerifyOutcome {
    bool pass = true;
    FailReason reason = FailReason::Checksum;

    std::string str() const {
        if (pass) return "pass";
        switch (reason) {
            case FailReason::Checksum: return "fail:checksum";
            case FailReason::Range: return "fail:range";
            case FailReason::Repeat: return "fail:repeat";
        }
        return "?";
    }
};

struct FieldRange {
    std::int64_t lo = 0;
    std::int64_t hi = 0;
};

struct I2mConfig {
    std::map<std::string, Tick> t_d;  // per-sensor inactivity timeout, > emit period
    int r_max = 5;                    // max identical consecutive payloads
    bool check_checksum = true;
    bool check_range = true;
    bool check_repeat = true;
    int mitigation_retries = 3;
    std::map<std::string, std::string> sensor_kind;  // id -> gps | baro
    std::map<std::string, std::map<std::string, FieldRange>> ranges;
    std::map<std::string, std::uint64_t> hrim_reg_base;
    std::map<std::string, std::uint64_t> i2m_reg_base;
    std::map<std::string, Tick> verify_window;  // per-attempt deadline
    std::map<std::string, plant::BusConfig> nominal_bus;
};

// Decoded payload fields, or nullopt when the frame is structurally broken.
std::optional<std::map<std::string, std::int64_t>> decode_frame(const std::string& kind,
                                                                std::span<const std::uint8_t> frame);

bool frame_checksum_ok(const std::string& kind, std::span<const std::uint8_t> frame);

// Checks in order: checksum, range, repetition. `prior` holds earlier
// delivered payloads, newest last, current frame excluded.
VerifyOutcome parse_and_verify(std::span<const std::uint8_t> frame, const std::string& sensor_id,
                               std::span<const streams::Sample> prior, const I2mConfig& cfg);

struct MitigationReport {
    bool reset = false;
    plant::BusConfig reconfigured;
    bool reconnected = false;
    Tick ticks_taken = 0;
    int attempts = 0;
};

class I2m : public mon::MonitorAgent {
public:
    I2m(I2mConfig cfg, sim::MonitorContext ctx);

    mon::Monitor& core() override { return core_; }
    void step(Tick t) override;

    // Starts the mitigation sequence; unless isolation was commanded this
    // tick, the sensor must already be isolated.
    void begin_mitigation(const std::string& sensor_id, Tick t, bool isolation_commanded = false);

    std::int64_t pass_count(const std::string& sensor_id) const;
    std::int64_t fail_count(const std::string& sensor_id) const;
    const std::optional<MitigationReport>& last_report(const std::string& sensor_id) const;
    bool mitigation_failed(const std::string& sensor_id) const;

private:
    struct ReadJob {
        Tick read_tick = 0;
        Tick parse_tick = 0;
        std::vector<std::uint8_t> payload;
        std::int64_t seq = 0;
        bool read_done = false;
    };

    struct Mitigation {
        enum class State { Idle, Await, Failed };
        State state = State::Idle;
        int attempt = 0;
        Tick started = -1;
        Tick deadline = -1;
        std::optional<Tick> retry_at;
    };

    struct ChannelState {
        Tick last_ready = 0;
        std::optional<ReadJob> job;
        Mitigation mitigation;
        std::int64_t pass_count = 0;
        std::int64_t fail_count = 0;
        std::optional<MitigationReport> report;
    };

    void handle_mailbox(Tick t);
    void run_pipeline(const std::string& sensor_id, ChannelState& st, Tick t);
    void check_inactivity(const std::string& sensor_id, ChannelState& st, Tick t);
    void raise_disconnect(const std::string& sensor_id, Tick t, const std::string& reason);
    void start_attempt(const std::string& sensor_id, ChannelState& st, Tick t);
    void attempt_failed(const std::string& sensor_id, ChannelState& st, Tick t,
                        const std::string& why);
    void store_validated(const std::string& sensor_id, const ReadJob& job, Tick t);

    I2mConfig cfg_;
    sim::MonitorContext ctx_;
    mon::Monitor core_;
    std::map<std::string, ChannelState> channels_;
};

}  // namespace cpsmon::i2m
