#include "cpsmon/hrim.hpp"

#include <cmath>

#include "cpsmon/vocab.hpp"

namespace cpsmon::hrim {

using ec::act;
using ec::fluent;
namespace vb = cpsmon::vocab;

bool check_bus_config(std::int64_t observed_period, const plant::BusConfig& expected, double tol) {
    std::int64_t exp = expected.bit_period_ticks();
    return std::llabs(observed_period - exp) <= static_cast<std::int64_t>(tol * static_cast<double>(exp));
}

namespace {

std::vector<std::string> bus_streams(const HrimConfig& cfg) {
    std::vector<std::string> out;
    for (const auto& [id, bus] : cfg.expected) out.push_back("bus." + id);
    return out;
}

}  // namespace

Hrim::Hrim(HrimConfig cfg, sim::MonitorContext ctx)
    : cfg_(std::move(cfg)), ctx_(std::move(ctx)), core_("hrim", bus_streams(cfg_)) {
    if (!(cfg_.baud_tolerance > 0.0 && cfg_.baud_tolerance < 0.2))
        throw SimError("hrim baud tolerance must lie in (0, 0.2)");
    for (const auto& [id, bus] : cfg_.expected) {
        channels_[id] = ChannelState{};
        // Timing predicate over the byte stream: the newest byte's measured
        // bit period must match the configured bus.
        plant::BusConfig expected = bus;
        double tol = cfg_.baud_tolerance;
        mon::DetectionPredicate p;
        p.id = "bus_timing." + id;
        p.stream_id = "bus." + id;
        p.cadence = mon::Cadence::OnSample;
        p.check = [expected, tol](std::span<const streams::Sample> w, Tick) {
            return check_bus_config(w.back().scalar, expected, tol);
        };
        core_.add_predicate(std::move(p));
        for (auto& pat : vb::hrim_patterns(id)) core_.add_pattern(std::move(pat));
    }
}

Tick Hrim::idle_gap_ticks(const std::string& sensor_id) const {
    const auto& bus = cfg_.expected.at(sensor_id);
    return static_cast<Tick>(cfg_.idle_gap_bytes) * bus.byte_duration_ticks();
}

std::int64_t Hrim::frames_stored(const std::string& sensor_id) const {
    return channels_.at(sensor_id).frames_stored;
}

bool Hrim::verifying(const std::string& sensor_id) const {
    return channels_.at(sensor_id).verifying;
}

void Hrim::handle_mailbox(Tick t) {
    for (const auto& ev : core_.drain(t)) {
        if (ev.label == "mitigate_request") {
            auto& st = channels_.at(ev.payload.at("sensor"));
            st.verifying = true;
            st.frame_buf.clear();
        }
    }
}

void Hrim::on_bus_mismatch(const std::string& sensor_id, ChannelState& st, Tick t,
                           std::int64_t period) {
    st.frame_buf.clear();
    ctx_.happens("hrim", act(vb::kBusMismatch, sensor_id), t,
                 {{"period", std::to_string(period)},
                  {"expected", std::to_string(cfg_.expected.at(sensor_id).bit_period_ticks())}});
    ctx_.happens("hrim", act(vb::kCrossBarEn, sensor_id), t);

    mon::MonitorEvent isolate;
    isolate.tick = t;
    isolate.source = "hrim";
    isolate.target = "crossbar_switch";
    isolate.label = "crossbar_isolate";
    isolate.payload["sensor"] = sensor_id;
    ctx_.emit(isolate);

    mon::MonitorEvent info;
    info.tick = t;
    info.source = "hrim";
    info.target = "i2m";
    info.label = "i2m_send_InfoToDisconnect";
    info.payload["sensor"] = sensor_id;
    info.payload["reason"] = "bus_config";
    ctx_.emit(info);

    if (st.verifying) {
        st.verifying = false;
        mon::MonitorEvent result;
        result.tick = t;
        result.source = "hrim";
        result.target = "i2m";
        result.label = "mitigate_result";
        result.payload["sensor"] = sensor_id;
        result.payload["ok"] = "0";
        ctx_.emit(result);
    }
}

void Hrim::flush_pending_store(const std::string& sensor_id, ChannelState& st, Tick t) {
    if (!st.pending_store) return;
    auto [payload, seq] = *st.pending_store;
    st.pending_store.reset();

    std::uint64_t base = cfg_.register_base.at(sensor_id);
    ctx_.plant->write_ram_word(base + plant::kRegStatus, 1);
    ctx_.plant->write_ram_word(base + plant::kRegLength, static_cast<std::uint32_t>(payload.size()));
    ctx_.plant->write_ram_word(base + plant::kRegSeq, static_cast<std::uint32_t>(seq));
    for (std::size_t i = 0; i < payload.size(); ++i)
        ctx_.plant->write_ram_word(base + plant::kHrimRegPayload + i, payload[i]);

    ctx_.happens("hrim", act(vb::kStoreSensorData, sensor_id), t,
                 {{"seq", std::to_string(seq)}, {"len", std::to_string(payload.size())}});

    streams::Sample s;
    s.scalar = seq;
    s.bytes = payload;
    s.tag = "frame";
    ctx_.streams->push_sample("hrim.regs." + sensor_id, std::move(s));

    sim::LogRecord rec;
    rec.tick = t;
    rec.source = "hrim";
    rec.kind = "frame";
    rec.payload["phase"] = "stored";
    rec.payload["sensor"] = sensor_id;
    rec.payload["seq"] = std::to_string(seq);
    rec.payload["len"] = std::to_string(payload.size());
    rec.payload["payload"] = to_hex(payload);
    ctx_.log(rec);
    st.frames_stored += 1;
}

void Hrim::step(Tick t) {
    handle_mailbox(t);

    for (auto& [sensor_id, st] : channels_) flush_pending_store(sensor_id, st, t);

    for (const auto& cb : (*ctx_.current)->bytes) {
        if (!cb.delivered) continue;
        auto it = channels_.find(cb.sensor_id);
        if (it == channels_.end()) continue;
        auto& st = it->second;

        std::int64_t period = ctx_.plant->measure_bit_period(cb.sensor_id);
        streams::Sample s;
        s.scalar = period;
        s.bytes = {cb.value};
        s.tag = "byte";
        ctx_.streams->push_sample("bus." + cb.sensor_id, std::move(s));

        sim::LogRecord byte_rec;
        byte_rec.tick = t;
        byte_rec.source = "hrim";
        byte_rec.kind = "frame";
        byte_rec.payload["phase"] = "byte";
        byte_rec.payload["sensor"] = cb.sensor_id;
        byte_rec.payload["value"] = std::to_string(cb.value);
        byte_rec.payload["period"] = std::to_string(period);
        ctx_.log(byte_rec);

        if (!check_bus_config(period, cfg_.expected.at(cb.sensor_id), cfg_.baud_tolerance)) {
            on_bus_mismatch(cb.sensor_id, st, t, period);
            continue;
        }

        if (st.verifying) {
            // First in-tolerance byte after reconfiguration: recovery done.
            st.verifying = false;
            ctx_.happens("hrim", act(vb::kSensorReconnected, cb.sensor_id), t);
            mon::MonitorEvent result;
            result.tick = t;
            result.source = "hrim";
            result.target = "i2m";
            result.label = "mitigate_result";
            result.payload["sensor"] = cb.sensor_id;
            result.payload["ok"] = "1";
            ctx_.emit(result);
        }

        if (st.frame_buf.empty()) st.frame_seq = cb.frame_seq;
        st.frame_buf.push_back(cb.value);
        st.last_byte_end = cb.end_tick;
    }

    // Idle-gap framing: the monitor knows nothing of payload formats, a quiet
    // line closes the frame.
    for (auto& [sensor_id, st] : channels_) {
        if (st.frame_buf.empty()) continue;
        if (t - st.last_byte_end < idle_gap_ticks(sensor_id)) continue;
        ctx_.happens("hrim", act(vb::kReadSensorData, sensor_id), t,
                     {{"len", std::to_string(st.frame_buf.size())}});
        st.pending_store = {st.frame_buf, st.frame_seq};
        st.frame_buf.clear();
    }
}

}  // namespace cpsmon::hrim
