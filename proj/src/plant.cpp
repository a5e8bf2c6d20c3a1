#include "cpsmon/plant.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

namespace cpsmon::plant {

std::int64_t measure_bit_period(std::span<const Tick> edge_ticks) {
    if (edge_ticks.size() < 2) throw InsufficientEdges("need at least two signal edges");
    std::map<Tick, int> counts;
    for (std::size_t i = 1; i < edge_ticks.size(); ++i)
        counts[edge_ticks[i] - edge_ticks[i - 1]] += 1;
    Tick best = 0;
    int best_count = -1;
    for (const auto& [interval, count] : counts) {
        // map iteration is ascending, so ties keep the smallest interval
        if (count > best_count) {
            best = interval;
            best_count = count;
        }
    }
    return best;
}

namespace {

std::vector<Tick> edges_for_byte(std::uint8_t value, Tick byte_start, std::int64_t period) {
    // 8N1: start(0), data LSB-first, stop(1); the line idles high.
    int levels[10];
    levels[0] = 0;
    for (int i = 0; i < 8; ++i) levels[1 + i] = (value >> i) & 1;
    levels[9] = 1;
    std::vector<Tick> edges;
    int prev = 1;
    for (int k = 0; k < 10; ++k) {
        if (levels[k] != prev) edges.push_back(byte_start + k * period);
        prev = levels[k];
    }
    return edges;
}

std::uint8_t nmea_checksum(const std::string& body) {
    std::uint8_t cs = 0;
    for (char c : body) cs = static_cast<std::uint8_t>(cs ^ static_cast<std::uint8_t>(c));
    return cs;
}

std::vector<std::uint8_t> generate_gps_frame(const std::string& sensor_id, std::uint64_t seed,
                                             std::int64_t seq) {
    SplitMix64 g(seed ^ fnv1a64(sensor_id) ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(seq + 1)));
    std::int64_t lat_e4 = 375428 + static_cast<std::int64_t>(g.below(401)) - 200;
    std::int64_t lon_e4 = -(771234 + static_cast<std::int64_t>(g.below(401)) - 200);
    std::int64_t alt_dm = 1234 + static_cast<std::int64_t>(g.below(501)) - 250;

    char lat[16];
    std::snprintf(lat, sizeof lat, "%c%02lld.%04lld", lat_e4 < 0 ? '-' : '+',
                  static_cast<long long>(std::abs(lat_e4) / 10000),
                  static_cast<long long>(std::abs(lat_e4) % 10000));
    char lon[16];
    std::snprintf(lon, sizeof lon, "%c%03lld.%04lld", lon_e4 < 0 ? '-' : '+',
                  static_cast<long long>(std::abs(lon_e4) / 10000),
                  static_cast<long long>(std::abs(lon_e4) % 10000));
    char alt[16];
    std::snprintf(alt, sizeof alt, "%05lld.%lld", static_cast<long long>(alt_dm / 10),
                  static_cast<long long>(alt_dm % 10));
    char seqs[8];
    std::snprintf(seqs, sizeof seqs, "%06lld", static_cast<long long>(seq % 1'000'000));

    std::string body = std::string("GPFIX,") + seqs + "," + lat + "," + lon + "," + alt;
    char tail[8];
    std::snprintf(tail, sizeof tail, "*%02X", nmea_checksum(body));
    std::string sentence = "$" + body + tail + "\r\n";
    return {sentence.begin(), sentence.end()};
}

std::vector<std::uint8_t> generate_baro_frame(const std::string& sensor_id, std::uint64_t seed,
                                              std::int64_t seq) {
    SplitMix64 g(seed ^ fnv1a64(sensor_id) ^ (0xbf58476d1ce4e5b9ULL * static_cast<std::uint64_t>(seq + 1)));
    std::int64_t pressure = 101'325 + static_cast<std::int64_t>(g.below(801)) - 400;
    std::int64_t temp_centi = 2'150 + static_cast<std::int64_t>(g.below(601)) - 300;

    std::vector<std::uint8_t> f(16, 0);
    f[0] = 0xA5;
    f[1] = 0x01;
    f[2] = static_cast<std::uint8_t>(seq & 0xff);
    f[3] = static_cast<std::uint8_t>((seq >> 8) & 0xff);
    for (int i = 0; i < 4; ++i) f[4 + i] = static_cast<std::uint8_t>((pressure >> (8 * i)) & 0xff);
    std::uint32_t t = static_cast<std::uint32_t>(static_cast<std::int32_t>(temp_centi));
    for (int i = 0; i < 4; ++i) f[8 + i] = static_cast<std::uint8_t>((t >> (8 * i)) & 0xff);
    std::uint32_t sum = 0;
    for (int i = 0; i < 15; ++i) sum += f[static_cast<std::size_t>(i)];
    f[15] = static_cast<std::uint8_t>(sum & 0xff);
    return f;
}

}  // namespace

std::vector<std::uint8_t> Plant::generate_frame(const std::string& kind, const std::string& sensor_id,
                                                std::uint64_t seed, std::int64_t seq) {
    if (kind == "gps") return generate_gps_frame(sensor_id, seed, seq);
    if (kind == "baro") return generate_baro_frame(sensor_id, seed, seq);
    throw UnknownSensor("no frame generator for sensor kind '" + kind + "'");
}

Plant::Plant(PlantConfig cfg)
    : firmware_(std::move(cfg.firmware)),
      ram_(kRamWords, 0),
      instructions_per_tick_(cfg.instructions_per_tick),
      seed_(cfg.seed) {
    if (instructions_per_tick_ < 1) throw SimError("instructions_per_tick must be >= 1");
    for (auto& s : cfg.sensors) {
        Channel ch;
        ch.cfg = s;
        ch.nominal_bus = s.bus;
        channels_.emplace(s.id, std::move(ch));
    }
    cpu_.pc = firmware_.base_address;
}

Plant::Channel& Plant::channel(const std::string& sensor_id) {
    auto it = channels_.find(sensor_id);
    if (it == channels_.end()) throw UnknownSensor("no sensor '" + sensor_id + "'");
    return it->second;
}

const Plant::Channel& Plant::channel(const std::string& sensor_id) const {
    auto it = channels_.find(sensor_id);
    if (it == channels_.end()) throw UnknownSensor("no sensor '" + sensor_id + "'");
    return it->second;
}

std::vector<std::string> Plant::sensor_ids() const {
    std::vector<std::string> out;
    for (const auto& [id, ch] : channels_) out.push_back(id);
    return out;
}

CrossbarState Plant::queue_crossbar(const std::string& sensor_id, bool connect) {
    channel(sensor_id);  // validate
    pending_.push_back({PendingActuation::Kind::Crossbar, sensor_id, connect, {}, 0});
    return CrossbarState{connect, connect};
}

void Plant::queue_sensor_reset(const std::string& sensor_id) {
    channel(sensor_id);
    pending_.push_back({PendingActuation::Kind::SensorReset, sensor_id, false, {}, 0});
}

void Plant::queue_sensor_reconfig(const std::string& sensor_id, BusConfig cfg) {
    channel(sensor_id);
    pending_.push_back({PendingActuation::Kind::SensorReconfig, sensor_id, false, std::move(cfg), 0});
}

void Plant::queue_receiver_reset(const std::string& sensor_id) {
    channel(sensor_id);
    pending_.push_back({PendingActuation::Kind::ReceiverReset, sensor_id, false, {}, 0});
}

void Plant::queue_redirect(std::uint64_t address) {
    pending_.push_back({PendingActuation::Kind::Redirect, "", false, {}, address});
}

void Plant::apply_pending() {
    for (auto& p : pending_) {
        switch (p.kind) {
            case PendingActuation::Kind::Crossbar: {
                auto& ch = channel(p.sensor_id);
                ch.crossbar.connected = p.connect;
                ch.crossbar.rx_line_active = p.connect;
                break;
            }
            case PendingActuation::Kind::SensorReset: {
                auto& ch = channel(p.sensor_id);
                if (ch.tx) {
                    ch.counters.aborted += 1;
                    ch.tx.reset();
                }
                if (ch.stuck_engaged && ch.stuck_recoverable) {
                    ch.stuck_engaged = false;
                    ch.stuck_payload.reset();
                }
                if (ch.corrupt_byte && ch.corrupt_recoverable) ch.corrupt_byte.reset();
                break;
            }
            case PendingActuation::Kind::SensorReconfig: {
                auto& ch = channel(p.sensor_id);
                ch.cfg.bus = p.bus;
                if (ch.injected_baud) {
                    if (ch.baud_recoverable)
                        ch.injected_baud.reset();
                    else
                        ch.cfg.bus.baud = *ch.injected_baud;  // attacker re-asserts
                }
                break;
            }
            case PendingActuation::Kind::ReceiverReset: {
                auto& ch = channel(p.sensor_id);
                if (ch.receiver_locked && ch.lock_recoverable) ch.receiver_locked = false;
                ch.burst_edges.clear();
                break;
            }
            case PendingActuation::Kind::Redirect:
                pending_redirect_ = p.address;
                break;
        }
    }
    pending_.clear();
}

StepOutput Plant::step(Tick t) {
    if (t != last_tick_ + 1)
        throw SimError("plant stepped to " + std::to_string(t) + " from " + std::to_string(last_tick_));
    last_tick_ = t;

    StepOutput out;
    apply_pending();
    if (pending_redirect_) {
        cpu_.pc = *pending_redirect_;
        out.redirect_applied = pending_redirect_;
        pending_redirect_.reset();
    }

    for (auto& [id, ch] : channels_) {
        // Periodic emission; the sensor transmits regardless of the crossbar.
        // A new start bit stomps any frame still on the wire.
        if (ch.cfg.emit_period_ticks > 0 && t % ch.cfg.emit_period_ticks == 0) {
            if (ch.tx) {
                ch.counters.aborted += 1;
                ch.tx.reset();
            }
            std::vector<std::uint8_t> payload;
            if (ch.stuck_engaged) {
                if (!ch.stuck_payload || ch.stuck_payload->empty())
                    ch.stuck_payload = generate_frame(ch.cfg.kind, id, seed_, ch.next_seq);
                payload = *ch.stuck_payload;
            } else {
                payload = generate_frame(ch.cfg.kind, id, seed_, ch.next_seq);
            }
            if (ch.corrupt_byte && !payload.empty())
                payload[ch.corrupt_byte->first % payload.size()] = ch.corrupt_byte->second;
            Transmission tx;
            tx.start_tick = t;
            tx.bit_period = ch.cfg.bus.bit_period_ticks();
            tx.bytes = payload;
            tx.seq = ch.next_seq;
            ch.tx = std::move(tx);
            ch.next_seq += 1;
            ch.counters.emitted += 1;
            out.emissions.push_back(EmittedFrame{id, ch.tx->seq, t, payload});
        }
        run_wire(ch, t, out);
    }

    run_cpu(t, out);
    return out;
}

void Plant::run_wire(Channel& ch, Tick t, StepOutput& out) {
    if (!ch.tx) return;
    auto& tx = *ch.tx;
    std::int64_t byte_ticks = 10 * tx.bit_period;
    Tick completion = tx.start_tick + static_cast<Tick>(byte_ticks) * static_cast<Tick>(tx.next_byte + 1);
    if (completion != t) return;

    CompletedByte cb;
    cb.sensor_id = ch.cfg.id;
    cb.value = tx.bytes[tx.next_byte];
    cb.start_tick = completion - byte_ticks;
    cb.end_tick = completion;
    cb.frame_seq = tx.seq;
    cb.delivered = ch.crossbar.connected && !ch.receiver_locked;
    if (!cb.delivered) tx.any_blocked = true;

    if (cb.delivered) {
        auto edges = edges_for_byte(cb.value, cb.start_tick, tx.bit_period);
        // A gap longer than two nominal byte frames starts a new burst.
        Tick gap_limit = 2 * ch.nominal_bus.byte_duration_ticks();
        if (!ch.burst_edges.empty() && !edges.empty() &&
            edges.front() - ch.burst_edges.back() > gap_limit)
            ch.burst_edges.clear();
        for (Tick e : edges) {
            ch.burst_edges.push_back(e);
            if (ch.burst_edges.size() > 256) ch.burst_edges.pop_front();
        }
    }

    tx.next_byte += 1;
    if (tx.next_byte == tx.bytes.size()) {
        cb.last_of_frame = true;
        if (tx.any_blocked)
            ch.counters.blocked += 1;
        else
            ch.counters.delivered += 1;
        ch.tx.reset();
    }
    out.bytes.push_back(std::move(cb));
}

std::uint32_t Plant::fetch(std::uint64_t address) const {
    if (firmware_.in_range(address)) return firmware_.words[address - firmware_.base_address];
    return static_cast<std::uint32_t>(Opcode::Halt);  // wandering PC faults to a stop
}

void Plant::run_cpu(Tick t, StepOutput& out) {
    if (!execution_permitted_ || cpu_.halted) return;
    int budget = instructions_per_tick_;
    while (budget-- > 0 && !cpu_.halted) {
        std::uint32_t w0 = fetch(cpu_.pc);
        Opcode op = opcode_of(w0);
        int ra = (w0 >> 8) & 0xf;
        int rb = (w0 >> 12) & 0xf;
        auto cond = static_cast<JumpCond>((w0 >> 16) & 0x3);
        std::uint64_t site = cpu_.pc;
        std::uint32_t w1 = instruction_words(op) == 2 ? fetch(cpu_.pc + 1) : 0;
        bool branched = false;

        switch (op) {
            case Opcode::Halt:
                cpu_.halted = true;
                out.halted_this_tick = true;
                break;
            case Opcode::LoadImm:
                cpu_.regs[ra] = static_cast<std::int64_t>(static_cast<std::int32_t>(w1));
                cpu_.pc += 2;
                break;
            case Opcode::Load:
                cpu_.regs[ra] = static_cast<std::int64_t>(static_cast<std::int32_t>(read_word(w1)));
                cpu_.pc += 2;
                break;
            case Opcode::Store: {
                std::uint32_t value = static_cast<std::uint32_t>(cpu_.regs[ra] & 0xffffffff);
                write_ram_word(w1, value);
                if (w1 >= kActuatorBase && w1 < kActuatorBase + 0x40)
                    out.actuator_writes.push_back(RamWrite{w1, value});
                cpu_.pc += 2;
                break;
            }
            case Opcode::Add:
                cpu_.regs[ra] += cpu_.regs[rb];
                cpu_.pc += 1;
                break;
            case Opcode::Cmp:
                cpu_.flag = cpu_.regs[ra] == cpu_.regs[rb];
                cpu_.pc += 1;
                break;
            case Opcode::Jump: {
                bool taken = cond == JumpCond::Always || (cond == JumpCond::IfEqual && cpu_.flag) ||
                             (cond == JumpCond::IfNotEqual && !cpu_.flag);
                if (taken) {
                    out.branches.push_back(BranchEvent{t, BranchKind::Jump, site, w1, site + 1});
                    cpu_.pc = w1;
                    branched = true;
                } else {
                    cpu_.pc += 2;
                }
                break;
            }
            case Opcode::Call: {
                cpu_.sp -= 1;
                write_ram_word(cpu_.sp, static_cast<std::uint32_t>(site + 2));
                out.branches.push_back(BranchEvent{t, BranchKind::Call, site, w1, site + 2});
                cpu_.pc = w1;
                branched = true;
                break;
            }
            case Opcode::Ret: {
                std::uint64_t target = read_word(cpu_.sp);
                cpu_.sp += 1;
                out.branches.push_back(BranchEvent{t, BranchKind::Return, site, target, target});
                cpu_.pc = target;
                branched = true;
                break;
            }
        }
        // A branch ends the tick's budget so the monitor vets it before the
        // next fetch.
        if (branched || cpu_.halted) break;
    }
}

void Plant::attack_baud(const std::string& sensor_id, std::int64_t new_baud, bool recoverable) {
    auto& ch = channel(sensor_id);
    ch.injected_baud = new_baud;
    ch.baud_recoverable = recoverable;
    ch.cfg.bus.baud = new_baud;
}

void Plant::attack_stuck(const std::string& sensor_id,
                         std::optional<std::vector<std::uint8_t>> payload, bool recoverable) {
    auto& ch = channel(sensor_id);
    ch.stuck_engaged = true;
    ch.stuck_recoverable = recoverable;
    if (payload && !payload->empty()) ch.stuck_payload = std::move(payload);
}

void Plant::attack_lock_receiver(const std::string& sensor_id, bool recoverable) {
    auto& ch = channel(sensor_id);
    ch.receiver_locked = true;
    ch.lock_recoverable = recoverable;
}

void Plant::attack_frame_corrupt(const std::string& sensor_id, std::uint64_t byte_offset,
                                 std::uint8_t value, bool recoverable) {
    auto& ch = channel(sensor_id);
    ch.corrupt_byte = {byte_offset, value};
    ch.corrupt_recoverable = recoverable;
}

void Plant::tamper_memory(std::uint64_t address, std::uint32_t value) {
    if (firmware_.in_range(address)) {
        firmware_.words[address - firmware_.base_address] = value;
        return;
    }
    if (ram_in_range(address)) {
        ram_[address - kRamBase] = value;
        return;
    }
    throw AddressOutOfRange("tamper at " + hex_word(address));
}

void Plant::corrupt_firmware_byte(std::uint64_t byte_offset, std::uint8_t value) {
    if (byte_offset >= firmware_.words.size() * 4)
        throw AddressOutOfRange("firmware byte offset " + std::to_string(byte_offset));
    std::uint32_t& w = firmware_.words[byte_offset / 4];
    int shift = static_cast<int>(byte_offset % 4) * 8;
    w = (w & ~(0xffu << shift)) | (static_cast<std::uint32_t>(value) << shift);
}

std::uint32_t Plant::read_word(std::uint64_t address) const {
    if (firmware_.in_range(address)) return firmware_.words[address - firmware_.base_address];
    if (ram_in_range(address)) return ram_[address - kRamBase];
    throw AddressOutOfRange("read at " + hex_word(address));
}

void Plant::write_ram_word(std::uint64_t address, std::uint32_t value) {
    if (!ram_in_range(address)) throw AddressOutOfRange("write at " + hex_word(address));
    ram_[address - kRamBase] = value;
}

std::int64_t Plant::measure_bit_period(const std::string& sensor_id) const {
    const auto& edges = channel(sensor_id).burst_edges;
    std::vector<Tick> v(edges.begin(), edges.end());
    return plant::measure_bit_period(v);
}

const std::deque<Tick>& Plant::burst_edges(const std::string& sensor_id) const {
    return channel(sensor_id).burst_edges;
}

const CrossbarState& Plant::crossbar(const std::string& sensor_id) const {
    return channel(sensor_id).crossbar;
}

const SensorConfig& Plant::sensor_config(const std::string& sensor_id) const {
    return channel(sensor_id).cfg;
}

const BusConfig& Plant::nominal_bus(const std::string& sensor_id) const {
    return channel(sensor_id).nominal_bus;
}

bool Plant::receiver_locked(const std::string& sensor_id) const {
    return channel(sensor_id).receiver_locked;
}

const FrameCounters& Plant::counters(const std::string& sensor_id) const {
    return channel(sensor_id).counters;
}

}  // namespace cpsmon::plant
