#pragma once

// Hardware resource integrity monitor: bus timing checks per received byte,
// idle-gap frame assembly into the HRIM data registers, crossbar isolation on
// mismatch, and post-mitigation bus verification.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cpsmon/context.hpp"
#include "cpsmon/monitor.hpp"
#include "cpsmon/plant.hpp"

namespace cpsmon::hrim {

struct HrimConfig {
    double baud_tolerance = 0.05;  // relative, must lie in (0, 0.2)
    int idle_gap_bytes = 2;        // silence closing a frame, in nominal byte times
    std::map<std::string, plant::BusConfig> expected;        // per sensor
    std::map<std::string, std::uint64_t> register_base;      // per sensor
};

// |observed - expected| <= tol * expected, in ticks.
bool check_bus_config(std::int64_t observed_period, const plant::BusConfig& expected, double tol);

class Hrim : public mon::MonitorAgent {
public:
    Hrim(HrimConfig cfg, sim::MonitorContext ctx);

    mon::Monitor& core() override { return core_; }
    void step(Tick t) override;

    std::int64_t frames_stored(const std::string& sensor_id) const;
    bool verifying(const std::string& sensor_id) const;

private:
    struct ChannelState {
        std::vector<std::uint8_t> frame_buf;
        std::int64_t frame_seq = -1;
        Tick last_byte_end = -1;
        std::optional<std::pair<std::vector<std::uint8_t>, std::int64_t>> pending_store;
        bool verifying = false;  // awaiting the post-mitigation bus check
        std::int64_t frames_stored = 0;
    };

    void handle_mailbox(Tick t);
    void flush_pending_store(const std::string& sensor_id, ChannelState& st, Tick t);
    void on_bus_mismatch(const std::string& sensor_id, ChannelState& st, Tick t,
                         std::int64_t period);
    Tick idle_gap_ticks(const std::string& sensor_id) const;

    HrimConfig cfg_;
    sim::MonitorContext ctx_;
    mon::Monitor core_;
    std::map<std::string, ChannelState> channels_;
};

}  // namespace cpsmon::hrim
