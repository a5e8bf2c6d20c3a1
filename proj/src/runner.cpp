#include "cpsmon/runner.hpp"

#include <algorithm>

#include "cpsmon/vocab.hpp"

namespace cpsmon::sim {

using ec::act;
namespace vb = cpsmon::vocab;

Runner::Runner(Scenario scenario) : scenario_(std::move(scenario)) {
    scenario_.validate();

    // Firmware and reference control flow.
    if (scenario_.firmware_path.empty()) {
        built_ = plant::build_default_firmware(scenario_.failsafe_address);
    } else {
        built_.image = plant::FirmwareImage::load(scenario_.firmware_path, scenario_.firmware_base);
        built_.reference.failsafe_address = scenario_.failsafe_address;
    }
    if (!scenario_.ref_cfg_path.empty())
        built_.reference = plant::ReferenceControlFlow::load(scenario_.ref_cfg_path);

    // Plant.
    plant::PlantConfig pc;
    pc.seed = scenario_.seed;
    pc.instructions_per_tick = scenario_.instructions_per_tick;
    pc.firmware = built_.image;
    for (const auto& s : scenario_.sensors) {
        plant::SensorConfig sensor;
        sensor.id = s.id;
        sensor.kind = s.kind;
        sensor.emit_period_ticks = s.emit_period_ticks;
        sensor.bus = plant::BusConfig{"uart." + s.id, s.baud, 8, 'N', 1};
        pc.sensors.push_back(sensor);
    }
    plant_ = std::make_unique<plant::Plant>(std::move(pc));

    // Streams.
    for (const auto& s : scenario_.sensors) {
        ms_.add_stream("bus." + s.id);
        ms_.add_stream("hrim.regs." + s.id);
        ms_.add_stream("i2m.valid." + s.id);
        ms_.add_state_stream("state.crossbar." + s.id);
    }
    ms_.add_stream("delta.program");
    ms_.add_stream("eim.fwcheck");
    ms_.add_stream("eim.watch");
    ms_.add_stream("plant.actuator");
    ms_.add_state_stream("state.cpu_mode");

    // Event calculus.
    std::vector<std::string> sensor_names = sensor_ids();
    rules_ = vb::default_rules(sensor_names);
    timeline_ = std::make_unique<ec::Timeline>(scenario_.horizon_ticks);
    vb::set_initial_fluents(*timeline_, sensor_names);
    engine_ = std::make_unique<ec::Engine>(rules_, *timeline_);

    // Monitor agents.
    MonitorContext ctx;
    ctx.plant = plant_.get();
    ctx.streams = &ms_;
    ctx.timeline = timeline_.get();
    ctx.engine = engine_.get();
    ctx.current = &current_out_;
    ctx.emit = [this](mon::MonitorEvent ev) { scheduler_->emit(std::move(ev)); };
    ctx.log = [this](LogRecord rec) { log_->append(std::move(rec)); };

    hrim::HrimConfig hc = build_hrim_config(scenario_);
    i2m::I2mConfig ic = build_i2m_config(scenario_);

    eim::EimConfig ec_cfg;
    ec_cfg.reference = built_.image;  // golden copy taken before any attack
    ec_cfg.ref_cfg = built_.reference;
    ec_cfg.failsafe_address = scenario_.failsafe_address;
    ec_cfg.paranoid_compare = scenario_.eim_paranoid;
    ec_cfg.continuous_hash = scenario_.eim_continuous_hash;
    ec_cfg.recheck_ticks = scenario_.eim_recheck_ticks;

    hrim_ = std::make_unique<hrim::Hrim>(hc, ctx);
    i2m_ = std::make_unique<i2m::I2m>(ic, ctx);
    eim_ = std::make_unique<eim::Eim>(ec_cfg, ctx);
    harness_ = std::make_unique<harness::Harness>(scenario_.attacks);

    wire_graph();

    hrim_->core().freeze(*engine_);
    i2m_->core().freeze(*engine_);
    eim_->core().freeze(*engine_);

    scheduler_ = std::make_unique<mon::Scheduler>(
        graph_, std::vector<mon::MonitorAgent*>{hrim_.get(), i2m_.get(), eim_.get()},
        [this](const mon::MonitorEvent& ev) { apply_actuation(ev); },
        [this](const mon::MonitorEvent& ev) {
            LogRecord rec;
            rec.tick = ev.tick;
            rec.source = "scheduler";
            rec.kind = "event";
            rec.payload["warning"] = "no_route";
            rec.payload["label"] = ev.label;
            rec.payload["from"] = ev.source;
            if (log_) log_->append(rec);
        });
}

std::vector<std::string> Runner::sensor_ids() const {
    std::vector<std::string> out;
    for (const auto& s : scenario_.sensors) out.push_back(s.id);
    return out;
}

void Runner::wire_graph() {
    for (const auto& s : scenario_.sensors) graph_.add_system_vertex(s.id);
    graph_.add_system_vertex("uart_bus");
    graph_.add_system_vertex("autopilot_cpu");
    graph_.add_system_vertex("autopilot_memory");
    graph_.add_system_vertex("crossbar_switch");
    graph_.add_monitor(&hrim_->core());
    graph_.add_monitor(&i2m_->core());
    graph_.add_monitor(&eim_->core());

    for (const auto& s : scenario_.sensors)
        graph_.add_edge(s.id, "hrim", mon::EdgeKind::Observe, mon::Grouping::Sequential);
    graph_.add_edge("uart_bus", "hrim", mon::EdgeKind::Observe, mon::Grouping::Sequential);
    graph_.add_edge("autopilot_memory", "i2m", mon::EdgeKind::Observe, mon::Grouping::Sequential);
    graph_.add_edge("autopilot_cpu", "eim", mon::EdgeKind::Observe, mon::Grouping::Parallel);
    graph_.add_edge("autopilot_memory", "eim", mon::EdgeKind::Observe, mon::Grouping::Parallel);

    // The hardware and information monitors cooperate serially; the reverse
    // direction carries mitigation traffic on the next tick.
    graph_.add_edge("hrim", "i2m", mon::EdgeKind::Event, mon::Grouping::Sequential);
    graph_.add_edge("i2m", "hrim", mon::EdgeKind::Event, mon::Grouping::Parallel);

    graph_.add_edge("hrim", "crossbar_switch", mon::EdgeKind::Mitigate, mon::Grouping::Sequential);
    graph_.add_edge("i2m", "crossbar_switch", mon::EdgeKind::Mitigate, mon::Grouping::Sequential);
    for (const auto& s : scenario_.sensors)
        graph_.add_edge("i2m", s.id, mon::EdgeKind::Mitigate, mon::Grouping::Sequential);
    graph_.add_edge("eim", "autopilot_cpu", mon::EdgeKind::Mitigate, mon::Grouping::Parallel);
}

void Runner::apply_actuation(const mon::MonitorEvent& ev) {
    LogRecord rec;
    rec.tick = ev.tick;
    rec.source = ev.source;
    rec.kind = "event";
    rec.payload["actuation"] = ev.label;
    for (const auto& [k, v] : ev.payload) rec.payload[k] = v;
    log_->append(rec);

    if (ev.label == "crossbar_isolate") {
        plant_->queue_crossbar(ev.payload.at("sensor"), false);
    } else if (ev.label == "crossbar_connect") {
        plant_->queue_crossbar(ev.payload.at("sensor"), true);
    } else if (ev.label == "sensor_reset") {
        plant_->queue_sensor_reset(ev.payload.at("sensor"));
    } else if (ev.label == "sensor_reconfig") {
        const auto& id = ev.payload.at("sensor");
        plant::BusConfig nominal{"uart." + id, std::stoll(ev.payload.at("baud")), 8, 'N', 1};
        plant_->queue_sensor_reconfig(id, nominal);
    } else if (ev.label == "receiver_reset") {
        plant_->queue_receiver_reset(ev.payload.at("sensor"));
    } else if (ev.label == "redirect") {
        plant_->queue_redirect(std::stoull(ev.payload.at("address"), nullptr, 0));
    } else if (ev.label == "permit_execution") {
        plant_->permit_execution(true);
    } else if (ev.label == "withhold_execution") {
        plant_->permit_execution(false);
    }
}

void Runner::log_meta(LogWriter& log) {
    LogRecord rec;
    rec.tick = -1;
    rec.source = "scheduler";
    rec.kind = "meta";
    rec.payload["scenario"] = scenario_.to_json_string();
    rec.payload["firmware_digest"] = hex_word(built_.image.digest());
    rec.payload["reference_cfg"] = built_.reference.to_text();
    std::string patterns;
    for (const auto* agent :
         std::initializer_list<const mon::Monitor*>{&hrim_->core(), &i2m_->core(), &eim_->core()})
        for (const auto& p : agent->patterns()) patterns += p.describe() + "\n";
    rec.payload["patterns"] = patterns;
    log.append(rec);
}

RunResult Runner::run(LogWriter& log) {
    log_ = &log;
    log_meta(log);

    RunResult result;
    std::map<std::string, mon::VerdictStatus> last_status;

    for (Tick t = 0; t < scenario_.horizon_ticks; ++t) {
        plant::StepOutput out = plant_->step(t);
        current_out_ = &out;

        // Plant-phase records and samples.
        ms_.advance(t, {});
        for (const auto& e : out.emissions) {
            LogRecord rec;
            rec.tick = t;
            rec.source = "plant";
            rec.kind = "frame";
            rec.payload["phase"] = "emitted";
            rec.payload["sensor"] = e.sensor_id;
            rec.payload["seq"] = std::to_string(e.seq);
            rec.payload["len"] = std::to_string(e.payload.size());
            log.append(rec);
        }
        for (const auto& b : out.branches) {
            LogRecord rec;
            rec.tick = t;
            rec.source = "plant";
            rec.kind = "branch";
            rec.payload["kind"] = plant::branch_kind_name(b.kind);
            rec.payload["site"] = hex_word(b.site_address);
            rec.payload["target"] = hex_word(b.target_address);
            rec.payload["return"] = hex_word(b.return_address);
            log.append(rec);

            ms_.push_sample("delta.program", eim::encode_branch_sample(b));
            streams::TransitionRecord tr;
            tr.tick = t;
            tr.from_state = built_.functions.name_of(b.site_address);
            tr.to_state = built_.functions.name_of(b.target_address);
            tr.cause = plant::branch_kind_name(b.kind);
            tr.site_address = b.site_address;
            tr.target_address = b.target_address;
            tr.return_address = b.return_address;
            if (ms_.transitions().empty() ||
                ms_.transitions().back().to_state == tr.from_state)
                ms_.push_transition(tr);
        }
        if (!out.actuator_writes.empty()) {
            streams::Sample s;  // one sample per stream per tick: keep the last write
            s.scalar = static_cast<std::int64_t>(out.actuator_writes.back().value);
            s.tag = "actuator";
            ms_.push_sample("plant.actuator", s);
        }
        if (out.redirect_applied) {
            LogRecord rec;
            rec.tick = t;
            rec.source = "plant";
            rec.kind = "event";
            rec.payload["action"] = "redirect_applied";
            rec.payload["address"] = hex_word(*out.redirect_applied);
            log.append(rec);
        }
        if (out.halted_this_tick) {
            result.program_halted = true;
            LogRecord rec;
            rec.tick = t;
            rec.source = "plant";
            rec.kind = "event";
            rec.payload["action"] = "program_halt";
            rec.payload["pc"] = hex_word(plant_->program_counter());
            log.append(rec);
        }
        for (const auto& s : scenario_.sensors) {
            const auto& cb = plant_->crossbar(s.id);
            auto it = last_crossbar_.find(s.id);
            if (it == last_crossbar_.end() || it->second.connected != cb.connected ||
                it->second.rx_line_active != cb.rx_line_active) {
                last_crossbar_[s.id] = cb;
                streams::Sample sample;
                sample.scalar = cb.connected ? 1 : 0;
                sample.tag = cb.rx_line_active ? "rx_active" : "rx_idle";
                ms_.push_sample("state.crossbar." + s.id, sample);
                LogRecord rec;
                rec.tick = t;
                rec.source = "plant";
                rec.kind = "event";
                rec.payload["action"] = "crossbar_state";
                rec.payload["sensor"] = s.id;
                rec.payload["connected"] = cb.connected ? "1" : "0";
                rec.payload["rx_line"] = cb.rx_line_active ? "active" : "idle";
                log.append(rec);
            }
        }
        std::string cpu_mode = plant_->halted() ? "halted"
                               : plant_->execution_permitted() ? "running"
                                                               : "blocked";
        if (cpu_mode != last_cpu_mode_) {
            last_cpu_mode_ = cpu_mode;
            streams::Sample sample;
            sample.scalar = cpu_mode == "running" ? 1 : 0;
            sample.tag = cpu_mode;
            ms_.push_sample("state.cpu_mode", sample);
        }

        // Injections.
        for (const auto& spec : harness_->apply_due(*plant_, t)) {
            LogRecord rec;
            rec.tick = t;
            rec.source = "harness";
            rec.kind = "injection";
            rec.payload["kind"] = harness::attack_kind_name(spec.kind);
            if (!spec.target.empty()) rec.payload["target"] = spec.target;
            rec.payload["recoverable"] = spec.recoverable ? "1" : "0";
            if (spec.kind == harness::AttackKind::MemoryTamper) {
                rec.payload["address"] = hex_word(spec.address);
                rec.payload["value"] = hex_word(spec.value);
            }
            log.append(rec);
        }

        // Monitors.
        auto verdicts = scheduler_->step_all(ms_, t);
        bool any_rejected = false;
        for (const auto& [id, verdict] : verdicts) {
            if (verdict.status == mon::VerdictStatus::Rejected) {
                any_rejected = true;
                if (!result.first_rejected.count(id)) result.first_rejected[id] = t;
            }
            auto it = last_status.find(id);
            if (it == last_status.end() || it->second != verdict.status) {
                last_status[id] = verdict.status;
                LogRecord rec;
                rec.tick = t;
                rec.source = "scheduler";
                rec.kind = "verdict";
                rec.payload["monitor"] = id;
                rec.payload["status"] =
                    verdict.status == mon::VerdictStatus::Holds ? "holds" : "rejected";
                if (!verdict.witnesses.empty()) {
                    const auto& w = verdict.witnesses.front();
                    rec.payload["witness_stream"] = w.stream_id;
                    rec.payload["witness_predicate"] = w.predicate_id;
                    rec.payload["witness_from"] = std::to_string(w.from);
                    rec.payload["witness_to"] = std::to_string(w.to);
                }
                log.append(rec);
            }
        }
        if (any_rejected) result.rejected_ticks += 1;

        // Fluent changes established this tick.
        for (const auto& ch : engine_->changes_at(t)) {
            LogRecord rec;
            rec.tick = t;
            rec.source = "scheduler";
            rec.kind = "fluent_change";
            rec.payload["fluent"] = ch.fluent.str();
            rec.payload["holds"] = ch.holds ? "1" : "0";
            log.append(rec);
        }
    }

    result.exit_code = result.rejected_ticks > 0 ? 2 : 0;
    return result;
}

std::map<std::string, ec::PatternOutcome> Runner::pattern_outcomes() const {
    std::map<std::string, ec::PatternOutcome> out;
    for (const auto* agent :
         std::initializer_list<const mon::Monitor*>{&hrim_->core(), &i2m_->core(), &eim_->core()})
        for (const auto& [name, outcome] : agent->pattern_outcomes()) out[name] = outcome;
    return out;
}

harness::TimingModel scenario_timing(const Scenario& sc, const std::string& sensor_id,
                                     std::int64_t attacked_baud) {
    const auto& s = sc.sensor(sensor_id);
    harness::TimingModel tm;
    tm.emit_period = s.emit_period_ticks;
    tm.frame_len = Scenario::frame_bytes(s.kind);
    plant::BusConfig nominal{"", s.baud, 8, 'N', 1};
    tm.nominal_bit_period = nominal.bit_period_ticks();
    if (attacked_baud > 0) {
        plant::BusConfig attacked{"", attacked_baud, 8, 'N', 1};
        tm.attacked_bit_period = attacked.bit_period_ticks();
    }
    tm.idle_gap_ticks = static_cast<Tick>(sc.idle_gap_bytes) * nominal.byte_duration_ticks();
    tm.store_delay = 1;
    tm.t_d = sc.t_d_for(sensor_id);
    tm.r_max = sc.r_max;
    return tm;
}

std::vector<harness::GroundTruthEntry> scenario_ground_truth(const Scenario& sc) {
    std::vector<harness::GroundTruthEntry> out;
    for (const auto& attack : sc.attacks) {
        std::string sensor = attack.target.empty() ? sc.sensors.front().id : attack.target;
        out.push_back(harness::ground_truth_for(attack, scenario_timing(sc, sensor, attack.new_baud)));
    }
    return out;
}

harness::TimingModel Runner::timing_for(const std::string& sensor_id,
                                        std::int64_t attacked_baud) const {
    return scenario_timing(scenario_, sensor_id, attacked_baud);
}

hrim::HrimConfig build_hrim_config(const Scenario& sc) {
    hrim::HrimConfig hc;
    hc.baud_tolerance = sc.baud_tolerance;
    hc.idle_gap_bytes = sc.idle_gap_bytes;
    std::uint64_t hrim_base = plant::kHrimRegBase;
    for (const auto& s : sc.sensors) {
        hc.expected[s.id] = plant::BusConfig{"uart." + s.id, s.baud, 8, 'N', 1};
        hc.register_base[s.id] = hrim_base;
        hrim_base += plant::kRegBlockWords;
    }
    return hc;
}

i2m::I2mConfig build_i2m_config(const Scenario& sc) {
    i2m::I2mConfig ic;
    ic.r_max = sc.r_max;
    ic.check_checksum = sc.check_checksum;
    ic.check_range = sc.check_range;
    ic.check_repeat = sc.check_repeat;
    ic.mitigation_retries = sc.mitigation_retries;
    std::uint64_t hrim_base = plant::kHrimRegBase;
    std::uint64_t i2m_base = plant::kI2mRegBase;
    for (const auto& s : sc.sensors) {
        plant::BusConfig nominal{"uart." + s.id, s.baud, 8, 'N', 1};
        ic.sensor_kind[s.id] = s.kind;
        ic.t_d[s.id] = sc.t_d_for(s.id);
        ic.hrim_reg_base[s.id] = hrim_base;
        ic.i2m_reg_base[s.id] = i2m_base;
        ic.nominal_bus[s.id] = nominal;
        Tick frame_ticks =
            static_cast<Tick>(Scenario::frame_bytes(s.kind)) * 10 * nominal.bit_period_ticks();
        ic.verify_window[s.id] = s.emit_period_ticks + 2 * frame_ticks;
        if (s.kind == "gps") {
            ic.ranges[s.id] = {{"lat_e4", {-900'000, 900'000}},
                               {"lon_e4", {-1'800'000, 1'800'000}},
                               {"alt_dm", {0, 100'000}}};
        } else {
            ic.ranges[s.id] = {{"pressure_pa", {30'000, 110'000}}, {"temp_centi", {-4'000, 8'500}}};
        }
        auto override_it = sc.ranges.find(s.id);
        if (override_it != sc.ranges.end())
            for (const auto& [field, bounds] : override_it->second)
                ic.ranges[s.id][field] = {bounds.first, bounds.second};
        hrim_base += plant::kRegBlockWords;
        i2m_base += plant::kRegBlockWords;
    }
    return ic;
}

RunResult run_scenario_file(const std::string& scenario_path, const std::string& log_path,
                            std::uint64_t seed_override, Tick ticks_override) {
    Scenario sc = Scenario::load(scenario_path);
    if (seed_override != 0) sc.seed = seed_override;
    if (ticks_override > 0) sc.horizon_ticks = ticks_override;
    sc.validate();
    Runner runner(std::move(sc));
    LogWriter log;
    RunResult result = runner.run(log);
    if (!log_path.empty()) log.write_file(log_path);
    return result;
}

}  // namespace cpsmon::sim
