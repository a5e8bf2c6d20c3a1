#include "cpsmon/i2m.hpp"

#include <algorithm>
#include <cstdio>

#include "cpsmon/vocab.hpp"

namespace cpsmon::i2m {

using ec::act;
using ec::fluent;
namespace vb = cpsmon::vocab;

namespace {

std::optional<std::int64_t> parse_fixed(const std::string& s, int frac_digits) {
    if (s.empty()) return std::nullopt;
    std::size_t i = 0;
    std::int64_t sign = 1;
    if (s[0] == '+' || s[0] == '-') {
        sign = s[0] == '-' ? -1 : 1;
        i = 1;
    }
    std::int64_t whole = 0;
    bool any = false;
    for (; i < s.size() && s[i] != '.'; ++i) {
        if (s[i] < '0' || s[i] > '9') return std::nullopt;
        whole = whole * 10 + (s[i] - '0');
        any = true;
    }
    std::int64_t frac = 0;
    int fd = 0;
    if (i < s.size() && s[i] == '.') {
        for (++i; i < s.size(); ++i) {
            if (s[i] < '0' || s[i] > '9') return std::nullopt;
            frac = frac * 10 + (s[i] - '0');
            ++fd;
        }
    }
    if (!any || fd != frac_digits) return std::nullopt;
    std::int64_t scale = 1;
    for (int k = 0; k < frac_digits; ++k) scale *= 10;
    return sign * (whole * scale + frac);
}

std::optional<std::map<std::string, std::int64_t>> decode_gps(std::span<const std::uint8_t> frame) {
    std::string s(frame.begin(), frame.end());
    if (s.size() < 12 || s.front() != '$') return std::nullopt;
    if (s.size() < 2 || s.substr(s.size() - 2) != "\r\n") return std::nullopt;
    auto star = s.rfind('*');
    if (star == std::string::npos || star + 3 > s.size() - 2) return std::nullopt;
    std::string body = s.substr(1, star - 1);

    std::vector<std::string> fields;
    std::string cur;
    for (char c : body) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    if (fields.size() != 5 || fields[0] != "GPFIX") return std::nullopt;

    auto seq = parse_fixed(fields[1], 0);
    auto lat = parse_fixed(fields[2], 4);
    auto lon = parse_fixed(fields[3], 4);
    auto alt = parse_fixed(fields[4], 1);
    if (!seq || !lat || !lon || !alt) return std::nullopt;
    return std::map<std::string, std::int64_t>{
        {"seq", *seq}, {"lat_e4", *lat}, {"lon_e4", *lon}, {"alt_dm", *alt}};
}

std::optional<std::map<std::string, std::int64_t>> decode_baro(std::span<const std::uint8_t> frame) {
    if (frame.size() != 16 || frame[0] != 0xA5 || frame[1] != 0x01) return std::nullopt;
    auto le32 = [&](std::size_t off) {
        return static_cast<std::uint32_t>(frame[off]) |
               static_cast<std::uint32_t>(frame[off + 1]) << 8 |
               static_cast<std::uint32_t>(frame[off + 2]) << 16 |
               static_cast<std::uint32_t>(frame[off + 3]) << 24;
    };
    std::int64_t seq = frame[2] | (frame[3] << 8);
    std::int64_t pressure = static_cast<std::int64_t>(le32(4));
    std::int64_t temp = static_cast<std::int64_t>(static_cast<std::int32_t>(le32(8)));
    return std::map<std::string, std::int64_t>{
        {"seq", seq}, {"pressure_pa", pressure}, {"temp_centi", temp}};
}

}  // namespace

std::optional<std::map<std::string, std::int64_t>> decode_frame(const std::string& kind,
                                                                std::span<const std::uint8_t> frame) {
    if (kind == "gps") return decode_gps(frame);
    if (kind == "baro") return decode_baro(frame);
    throw UnknownSensor("no decoder for sensor kind '" + kind + "'");
}

bool frame_checksum_ok(const std::string& kind, std::span<const std::uint8_t> frame) {
    if (kind == "gps") {
        std::string s(frame.begin(), frame.end());
        auto star = s.rfind('*');
        if (s.empty() || s.front() != '$' || star == std::string::npos || star + 3 > s.size())
            return false;
        std::uint8_t cs = 0;
        for (std::size_t i = 1; i < star; ++i) cs ^= static_cast<std::uint8_t>(s[i]);
        char expect[4];
        std::snprintf(expect, sizeof expect, "%02X", cs);
        return s[star + 1] == expect[0] && s[star + 2] == expect[1];
    }
    if (kind == "baro") {
        if (frame.size() != 16) return false;
        std::uint32_t sum = 0;
        for (std::size_t i = 0; i + 1 < frame.size(); ++i) sum += frame[i];
        return frame[15] == (sum & 0xff);
    }
    throw UnknownSensor("no checksum rule for sensor kind '" + kind + "'");
}

VerifyOutcome parse_and_verify(std::span<const std::uint8_t> frame, const std::string& sensor_id,
                               std::span<const streams::Sample> prior, const I2mConfig& cfg) {
    auto kind_it = cfg.sensor_kind.find(sensor_id);
    if (kind_it == cfg.sensor_kind.end()) throw UnknownSensor("i2m: unknown sensor " + sensor_id);
    const std::string& kind = kind_it->second;

    if (cfg.check_checksum && !frame_checksum_ok(kind, frame)) return {false, FailReason::Checksum};

    auto decoded = decode_frame(kind, frame);
    if (!decoded) return {false, FailReason::Checksum};  // structurally broken

    if (cfg.check_range) {
        auto ranges_it = cfg.ranges.find(sensor_id);
        if (ranges_it != cfg.ranges.end()) {
            for (const auto& [field, range] : ranges_it->second) {
                auto v = decoded->find(field);
                if (v == decoded->end()) continue;
                if (v->second < range.lo || v->second > range.hi) return {false, FailReason::Range};
            }
        }
    }

    if (cfg.check_repeat) {
        int run = 1;
        for (auto it = prior.rbegin(); it != prior.rend(); ++it) {
            if (it->bytes.size() == frame.size() &&
                std::equal(frame.begin(), frame.end(), it->bytes.begin()))
                ++run;
            else
                break;
        }
        if (run > cfg.r_max) return {false, FailReason::Repeat};
    }
    return {true, FailReason::Checksum};
}

namespace {

std::vector<std::string> reg_streams(const I2mConfig& cfg) {
    std::vector<std::string> out;
    for (const auto& [id, kind] : cfg.sensor_kind) out.push_back("hrim.regs." + id);
    return out;
}

}  // namespace

I2m::I2m(I2mConfig cfg, sim::MonitorContext ctx)
    : cfg_(std::move(cfg)), ctx_(std::move(ctx)), core_("i2m", reg_streams(cfg_)) {
    if (cfg_.r_max < 2) throw SimError("i2m r_max must be >= 2");
    for (const auto& [id, kind] : cfg_.sensor_kind) {
        channels_[id] = ChannelState{};
        Tick t_d = cfg_.t_d.at(id);

        mon::DetectionPredicate verify;
        verify.id = "data_verify." + id;
        verify.stream_id = "hrim.regs." + id;
        verify.cadence = mon::Cadence::OnSample;
        I2mConfig cfg_copy = cfg_;
        std::string sid = id;
        verify.check = [cfg_copy, sid](std::span<const streams::Sample> w, Tick) {
            auto prior = w.subspan(0, w.size() - 1);
            return parse_and_verify(w.back().bytes, sid, prior, cfg_copy).pass;
        };
        core_.add_predicate(std::move(verify));

        mon::DetectionPredicate inactivity;
        inactivity.id = "inactivity." + id;
        inactivity.stream_id = "hrim.regs." + id;
        inactivity.cadence = mon::Cadence::EveryTick;
        inactivity.check = [t_d](std::span<const streams::Sample> w, Tick at) {
            return at - w.back().tick <= t_d;
        };
        core_.add_predicate(std::move(inactivity));

        for (auto& pat : vb::i2m_patterns(id, t_d)) core_.add_pattern(std::move(pat));
    }
}

std::int64_t I2m::pass_count(const std::string& sensor_id) const {
    return channels_.at(sensor_id).pass_count;
}

std::int64_t I2m::fail_count(const std::string& sensor_id) const {
    return channels_.at(sensor_id).fail_count;
}

const std::optional<MitigationReport>& I2m::last_report(const std::string& sensor_id) const {
    return channels_.at(sensor_id).report;
}

bool I2m::mitigation_failed(const std::string& sensor_id) const {
    return channels_.at(sensor_id).mitigation.state == Mitigation::State::Failed;
}

void I2m::handle_mailbox(Tick t) {
    for (const auto& ev : core_.drain(t)) {
        const std::string& sensor = ev.payload.at("sensor");
        auto& st = channels_.at(sensor);
        if (ev.label == "i2m_send_InfoToDisconnect") {
            // HRIM flagged the sensor; acknowledge and take over recovery.
            ctx_.happens("i2m", act(vb::kI2mSendInfoToDisconnect, sensor), t,
                         {{"reason", ev.payload.count("reason") ? ev.payload.at("reason") : ""}});
            ctx_.happens("i2m", act(vb::kCrossBarEn, sensor), t);
            if (st.mitigation.state == Mitigation::State::Idle) begin_mitigation(sensor, t, true);
        } else if (ev.label == "mitigate_result") {
            if (st.mitigation.state != Mitigation::State::Await) continue;
            if (ev.payload.at("ok") == "1") {
                MitigationReport rep;
                rep.reset = true;
                rep.reconfigured = cfg_.nominal_bus.at(sensor);
                rep.reconnected = true;
                rep.ticks_taken = t - st.mitigation.started;
                rep.attempts = st.mitigation.attempt;
                st.report = rep;
                st.mitigation.state = Mitigation::State::Idle;
                st.mitigation.attempt = 0;
                st.last_ready = t;  // fresh inactivity baseline after recovery
                sim::LogRecord rec;
                rec.tick = t;
                rec.source = "i2m";
                rec.kind = "mitigation";
                rec.payload["phase"] = "recovered";
                rec.payload["sensor"] = sensor;
                rec.payload["attempts"] = std::to_string(rep.attempts);
                rec.payload["ticks_taken"] = std::to_string(rep.ticks_taken);
                ctx_.log(rec);
            } else {
                attempt_failed(sensor, st, t, "bus_check");
            }
        }
    }
}

void I2m::raise_disconnect(const std::string& sensor_id, Tick t, const std::string& reason) {
    ctx_.happens("i2m", act(vb::kI2mSendInfoToDisconnect, sensor_id), t, {{"reason", reason}});
    ctx_.happens("i2m", act(vb::kCrossBarEn, sensor_id), t);

    mon::MonitorEvent info;
    info.tick = t;
    info.source = "i2m";
    info.target = "hrim";
    info.label = "i2m_send_InfoToDisconnect";
    info.payload["sensor"] = sensor_id;
    info.payload["reason"] = reason;
    ctx_.emit(info);

    mon::MonitorEvent isolate;
    isolate.tick = t;
    isolate.source = "i2m";
    isolate.target = "crossbar_switch";
    isolate.label = "crossbar_isolate";
    isolate.payload["sensor"] = sensor_id;
    ctx_.emit(isolate);

    sim::LogRecord rec;
    rec.tick = t;
    rec.source = "i2m";
    rec.kind = "mitigation";
    rec.payload["phase"] = "disconnect";
    rec.payload["sensor"] = sensor_id;
    rec.payload["reason"] = reason;
    ctx_.log(rec);
}

void I2m::begin_mitigation(const std::string& sensor_id, Tick t, bool isolation_commanded) {
    auto& st = channels_.at(sensor_id);
    if (!isolation_commanded && ctx_.plant->crossbar(sensor_id).connected)
        throw SimError("mitigation requested for connected sensor " + sensor_id);
    st.mitigation.state = Mitigation::State::Await;
    st.mitigation.attempt = 0;
    st.mitigation.started = t;
    // Let the isolation land first; the first attempt starts next tick.
    st.mitigation.retry_at = t + 1;
    st.mitigation.deadline = -1;
}

void I2m::start_attempt(const std::string& sensor_id, ChannelState& st, Tick t) {
    st.mitigation.attempt += 1;
    st.mitigation.retry_at.reset();
    st.mitigation.deadline = t + 1 + cfg_.verify_window.at(sensor_id);

    auto emit_actuation = [&](const std::string& label, const std::string& target) {
        mon::MonitorEvent ev;
        ev.tick = t;
        ev.source = "i2m";
        ev.target = target;
        ev.label = label;
        ev.payload["sensor"] = sensor_id;
        if (label == "sensor_reconfig")
            ev.payload["baud"] = std::to_string(cfg_.nominal_bus.at(sensor_id).baud);
        ctx_.emit(ev);
    };
    emit_actuation("sensor_reset", sensor_id);
    emit_actuation("sensor_reconfig", sensor_id);
    emit_actuation("receiver_reset", sensor_id);
    emit_actuation("crossbar_connect", "crossbar_switch");

    mon::MonitorEvent req;
    req.tick = t;
    req.source = "i2m";
    req.target = "hrim";
    req.label = "mitigate_request";
    req.payload["sensor"] = sensor_id;
    req.payload["attempt"] = std::to_string(st.mitigation.attempt);
    ctx_.emit(req);

    sim::LogRecord rec;
    rec.tick = t;
    rec.source = "i2m";
    rec.kind = "mitigation";
    rec.payload["phase"] = "attempt";
    rec.payload["sensor"] = sensor_id;
    rec.payload["attempt"] = std::to_string(st.mitigation.attempt);
    ctx_.log(rec);
}

void I2m::attempt_failed(const std::string& sensor_id, ChannelState& st, Tick t,
                         const std::string& why) {
    sim::LogRecord rec;
    rec.tick = t;
    rec.source = "i2m";
    rec.kind = "mitigation";
    rec.payload["sensor"] = sensor_id;
    rec.payload["attempt"] = std::to_string(st.mitigation.attempt);
    rec.payload["why"] = why;
    if (st.mitigation.attempt >= cfg_.mitigation_retries) {
        st.mitigation.state = Mitigation::State::Failed;
        MitigationReport rep;
        rep.reset = true;
        rep.reconfigured = cfg_.nominal_bus.at(sensor_id);
        rep.reconnected = false;
        rep.ticks_taken = t - st.mitigation.started;
        rep.attempts = st.mitigation.attempt;
        st.report = rep;
        rec.payload["phase"] = "failed";
        // the last attempt reconnected the crossbar; force isolation again
        mon::MonitorEvent isolate;
        isolate.tick = t;
        isolate.source = "i2m";
        isolate.target = "crossbar_switch";
        isolate.label = "crossbar_isolate";
        isolate.payload["sensor"] = sensor_id;
        ctx_.emit(isolate);
    } else {
        rec.payload["phase"] = "attempt_failed";
        st.mitigation.retry_at = t + 1;
        st.mitigation.deadline = -1;
    }
    ctx_.log(rec);
}

void I2m::store_validated(const std::string& sensor_id, const ReadJob& job, Tick t) {
    std::uint64_t base = cfg_.i2m_reg_base.at(sensor_id);
    ctx_.plant->write_ram_word(base + plant::kRegStatus, 1);
    ctx_.plant->write_ram_word(base + plant::kRegLength, static_cast<std::uint32_t>(job.payload.size()));
    ctx_.plant->write_ram_word(base + plant::kRegSeq, static_cast<std::uint32_t>(job.seq));
    ctx_.plant->write_ram_word(base + plant::kI2mRegVerify, 1);
    for (std::size_t i = 0; i < job.payload.size(); ++i)
        ctx_.plant->write_ram_word(base + plant::kI2mRegPayload + i, job.payload[i]);

    ctx_.happens("i2m", act(vb::kStoreI2mData, sensor_id), t, {{"seq", std::to_string(job.seq)}});

    streams::Sample s;
    s.scalar = job.seq;
    s.bytes = job.payload;
    s.tag = "frame";
    ctx_.streams->push_sample("i2m.valid." + sensor_id, std::move(s));

    sim::LogRecord rec;
    rec.tick = t;
    rec.source = "i2m";
    rec.kind = "frame";
    rec.payload["phase"] = "validated";
    rec.payload["sensor"] = sensor_id;
    rec.payload["seq"] = std::to_string(job.seq);
    ctx_.log(rec);
}

void I2m::run_pipeline(const std::string& sensor_id, ChannelState& st, Tick t) {
    // Stage 1: data-ready seen; schedule the read for the next tick.
    if (!st.job && ctx_.engine->holds_at(fluent(vb::kHrimDataReady, sensor_id), t)) {
        ReadJob job;
        job.read_tick = t + 1;
        job.parse_tick = t + 2;
        st.job = job;
        st.last_ready = t;
    }
    if (!st.job) return;

    // Stage 2: read the registers, consuming the data-ready flag.
    if (!st.job->read_done && t == st.job->read_tick) {
        std::uint64_t base = cfg_.hrim_reg_base.at(sensor_id);
        std::uint32_t len = ctx_.plant->read_word(base + plant::kRegLength);
        // never trust the length word past the block capacity
        len = std::min<std::uint32_t>(len, plant::kRegBlockWords - plant::kHrimRegPayload);
        st.job->seq = ctx_.plant->read_word(base + plant::kRegSeq);
        st.job->payload.clear();
        for (std::uint32_t i = 0; i < len; ++i)
            st.job->payload.push_back(
                static_cast<std::uint8_t>(ctx_.plant->read_word(base + plant::kHrimRegPayload + i)));
        ctx_.plant->write_ram_word(base + plant::kRegStatus, 0);  // consumed
        ctx_.happens("i2m", act(vb::kI2mReadData, sensor_id), t,
                     {{"seq", std::to_string(st.job->seq)}});
        st.job->read_done = true;
        return;
    }

    // Stage 3: verify; store on pass, disconnect on failure.
    if (st.job->read_done && t == st.job->parse_tick) {
        ReadJob job = *st.job;
        st.job.reset();
        const auto& window = ctx_.streams->window("hrim.regs." + sensor_id);
        auto slice = window.view();
        // the newest window sample is this frame; verification context is the
        // frames before it
        std::span<const streams::Sample> prior = slice;
        if (!prior.empty() && prior.back().scalar == job.seq) prior = prior.subspan(0, prior.size() - 1);
        VerifyOutcome outcome = parse_and_verify(job.payload, sensor_id, prior, cfg_);

        ctx_.happens("i2m", act(vb::kI2mParseData, sensor_id), t,
                     {{"outcome", outcome.pass ? "pass" : "fail"},
                      {"detail", outcome.str()},
                      {"seq", std::to_string(job.seq)}});
        if (outcome.pass) {
            st.pass_count += 1;
            store_validated(sensor_id, job, t);
        } else {
            st.fail_count += 1;
            ctx_.happens("i2m", act(vb::kI2mParseFailure, sensor_id), t,
                         {{"detail", outcome.str()}, {"seq", std::to_string(job.seq)}});
            sim::LogRecord rec;
            rec.tick = t;
            rec.source = "i2m";
            rec.kind = "frame";
            rec.payload["phase"] = "rejected";
            rec.payload["sensor"] = sensor_id;
            rec.payload["seq"] = std::to_string(job.seq);
            rec.payload["outcome"] = outcome.str();
            ctx_.log(rec);
            if (st.mitigation.state == Mitigation::State::Idle) {
                raise_disconnect(sensor_id, t, outcome.str());
                begin_mitigation(sensor_id, t, true);
            }
        }
    }
}

void I2m::check_inactivity(const std::string& sensor_id, ChannelState& st, Tick t) {
    if (st.mitigation.state != Mitigation::State::Idle) return;
    if (!ctx_.engine->holds_at(fluent(vb::kSensorOkay, sensor_id), t)) return;
    if (t - st.last_ready <= cfg_.t_d.at(sensor_id)) return;
    raise_disconnect(sensor_id, t, "inactivity");
    begin_mitigation(sensor_id, t, true);
}

void I2m::step(Tick t) {
    handle_mailbox(t);
    for (auto& [sensor_id, st] : channels_) {
        run_pipeline(sensor_id, st, t);
        check_inactivity(sensor_id, st, t);
        if (st.mitigation.state == Mitigation::State::Await) {
            if (st.mitigation.retry_at && t >= *st.mitigation.retry_at) {
                start_attempt(sensor_id, st, t);
            } else if (st.mitigation.deadline >= 0 && t > st.mitigation.deadline) {
                attempt_failed(sensor_id, st, t, "timeout");
            }
        }
    }
}

}  // namespace cpsmon::i2m
