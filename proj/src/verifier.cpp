#include "cpsmon/verifier.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "cpsmon/ec.hpp"
#include "cpsmon/ec_pattern.hpp"
#include "cpsmon/eim.hpp"
#include "cpsmon/hrim.hpp"
#include "cpsmon/i2m.hpp"
#include "cpsmon/runner.hpp"
#include "cpsmon/scenario.hpp"
#include "cpsmon/vocab.hpp"

namespace cpsmon::sim {

namespace vb = cpsmon::vocab;

std::string VerifyReport::summary() const {
    return std::to_string(divergences.size()) + " divergences across " + std::to_string(records) +
           " records";
}

namespace {

bool is_ec_action(const std::string& action) {
    static const std::set<std::string> known = {
        vb::kReadSensorData,    vb::kStoreSensorData, vb::kCrossBarEn,
        vb::kI2mSendInfoToDisconnect, vb::kBusMismatch,  vb::kSensorReconnected,
        vb::kI2mReadData,       vb::kI2mParseData,    vb::kI2mParseFailure,
        vb::kStoreI2mData,      vb::kCheckFirmwareOk, vb::kFirmwareViolation,
        vb::kCheckControlFlowOk, vb::kControlFlowViolation, vb::kExecuteProgram,
        vb::kFailSafe};
    auto colon = action.find(':');
    return known.count(colon == std::string::npos ? action : action.substr(0, colon)) != 0;
}

struct Interval {
    Tick lo = 0;
    Tick hi = 0;  // inclusive
};

std::vector<Interval> merge_intervals(std::vector<Interval> v) {
    std::sort(v.begin(), v.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    std::vector<Interval> out;
    for (const auto& i : v) {
        if (i.hi < i.lo) continue;
        if (!out.empty() && i.lo <= out.back().hi + 1)
            out.back().hi = std::max(out.back().hi, i.hi);
        else
            out.push_back(i);
    }
    return out;
}

bool covered(const std::vector<Interval>& v, Tick t) {
    for (const auto& i : v)
        if (t >= i.lo && t <= i.hi) return true;
    return false;
}

struct VerdictChange {
    Tick tick = 0;
    bool rejected = false;
};

// Change list implied by a set of rejected intervals over [0, horizon).
std::vector<VerdictChange> change_list(const std::vector<Interval>& rejected, Tick horizon) {
    std::vector<VerdictChange> out;
    bool status = covered(rejected, 0);
    out.push_back({0, status});
    std::vector<Tick> candidates;
    for (const auto& i : rejected) {
        candidates.push_back(i.lo);
        candidates.push_back(i.hi + 1);
    }
    std::sort(candidates.begin(), candidates.end());
    for (Tick t : candidates) {
        if (t <= 0 || t >= horizon) continue;
        bool s = covered(rejected, t);
        if (s != status) {
            status = s;
            out.push_back({t, s});
        }
    }
    return out;
}

}  // namespace

VerifyReport verify_log(const std::vector<LogRecord>& records) {
    VerifyReport report;
    report.records = static_cast<std::int64_t>(records.size());
    if (records.empty() || records.front().kind != "meta")
        throw CorruptLog("log does not start with a meta record");

    // Ordering: (tick, source rank, seq) strictly increasing.
    for (std::size_t i = 1; i < records.size(); ++i) {
        const auto& a = records[i - 1];
        const auto& b = records[i];
        auto key = [](const LogRecord& r) {
            return std::tuple<Tick, int, std::int64_t>(r.tick, source_rank(r.source), r.seq);
        };
        if (!(key(a) < key(b))) throw CorruptLog("records out of order at seq " + std::to_string(b.seq));
    }

    Scenario sc = Scenario::from_json_string(records.front().payload.at("scenario"));
    plant::ReferenceControlFlow ref =
        plant::ReferenceControlFlow::from_text(records.front().payload.at("reference_cfg"));
    hrim::HrimConfig hrim_cfg = build_hrim_config(sc);
    i2m::I2mConfig i2m_cfg = build_i2m_config(sc);
    Tick horizon = sc.horizon_ticks;
    Tick last_tick = horizon - 1;

    auto diverge = [&report](Tick tick, const std::string& what, const std::string& expected,
                             const std::string& found) {
        report.divergences.push_back({tick, what, expected, found});
    };

    // --- rebuild the event-calculus timeline from event records ---
    ec::RuleSet rules = vb::default_rules([&] {
        std::vector<std::string> ids;
        for (const auto& s : sc.sensors) ids.push_back(s.id);
        return ids;
    }());
    ec::Timeline timeline(horizon);
    {
        std::vector<std::string> ids;
        for (const auto& s : sc.sensors) ids.push_back(s.id);
        vb::set_initial_fluents(timeline, ids);
    }
    for (const auto& rec : records) {
        if (rec.kind != "event") continue;
        auto it = rec.payload.find("action");
        if (it == rec.payload.end() || !is_ec_action(it->second)) continue;
        ec::OccurrenceContext ctx;
        for (const auto& [k, v] : rec.payload)
            if (k.rfind("ctx_", 0) == 0) ctx[k.substr(4)] = v;
        if (!timeline.happens(it->second, rec.tick)) timeline.record_happens(it->second, rec.tick, ctx);
    }
    ec::Engine engine(rules, timeline);

    // --- fluent changes ---
    std::map<Tick, std::map<std::string, std::string>> logged_fluents;
    for (const auto& rec : records)
        if (rec.kind == "fluent_change")
            logged_fluents[rec.tick][rec.payload.at("fluent")] = rec.payload.at("holds");
    std::set<Tick> event_ticks;
    for (const auto& occ : timeline.store()) event_ticks.insert(occ.tick);
    std::map<Tick, std::map<std::string, std::string>> computed_fluents;
    for (Tick t : event_ticks)
        for (const auto& ch : engine.changes_at(t))
            computed_fluents[t][ch.fluent.str()] = ch.holds ? "1" : "0";
    for (const auto& [t, expected] : computed_fluents) {
        auto it = logged_fluents.find(t);
        std::map<std::string, std::string> found =
            it == logged_fluents.end() ? std::map<std::string, std::string>{} : it->second;
        if (found != expected)
            diverge(t, "fluent_change", std::to_string(expected.size()) + " changes",
                    std::to_string(found.size()) + " changes");
    }
    for (const auto& [t, found] : logged_fluents)
        if (!computed_fluents.count(t)) diverge(t, "fluent_change", "none", "records present");

    // --- HRIM byte checks ---
    std::map<std::string, std::vector<Interval>> rejected;  // monitor -> intervals
    std::set<std::pair<Tick, std::string>> logged_mismatch;
    for (const auto& rec : records)
        if (rec.kind == "event" && rec.payload.count("action")) {
            const auto& a = rec.payload.at("action");
            if (a.rfind(std::string(vb::kBusMismatch) + ":", 0) == 0)
                logged_mismatch.insert({rec.tick, a.substr(std::string(vb::kBusMismatch).size() + 1)});
        }
    std::set<std::pair<Tick, std::string>> computed_mismatch;
    for (const auto& rec : records) {
        if (rec.kind != "frame" || rec.source != "hrim") continue;
        if (rec.payload.at("phase") != "byte") continue;
        const auto& sensor = rec.payload.at("sensor");
        std::int64_t period = std::stoll(rec.payload.at("period"));
        bool ok = hrim::check_bus_config(period, hrim_cfg.expected.at(sensor), hrim_cfg.baud_tolerance);
        if (!ok) {
            computed_mismatch.insert({rec.tick, sensor});
            rejected["hrim"].push_back({rec.tick, rec.tick});
        }
    }
    for (const auto& m : computed_mismatch)
        if (!logged_mismatch.count(m))
            diverge(m.first, "bus_mismatch." + m.second, "mismatch event", "none");
    for (const auto& m : logged_mismatch)
        if (!computed_mismatch.count(m))
            diverge(m.first, "bus_mismatch." + m.second, "no mismatch", "mismatch event");

    // --- I2M parse outcomes (recomputed from stored frames) ---
    std::map<std::string, std::vector<std::vector<std::uint8_t>>> history;
    std::map<std::string, std::vector<Tick>> store_ticks;
    std::map<std::pair<std::string, std::string>, std::string> parse_outcomes;  // (sensor, seq) -> outcome
    for (const auto& rec : records) {
        if (rec.kind == "event" && rec.payload.count("action")) {
            const auto& a = rec.payload.at("action");
            std::string prefix = std::string(vb::kI2mParseData) + ":";
            if (a.rfind(prefix, 0) == 0 && rec.payload.count("ctx_detail"))
                parse_outcomes[{a.substr(prefix.size()), rec.payload.at("ctx_seq")}] =
                    rec.payload.at("ctx_detail");
        }
    }
    for (const auto& rec : records) {
        if (rec.kind != "frame" || rec.source != "hrim" || rec.payload.at("phase") != "stored")
            continue;
        const auto& sensor = rec.payload.at("sensor");
        auto payload = from_hex(rec.payload.at("payload"));
        auto& h = history[sensor];
        std::vector<streams::Sample> prior;
        for (const auto& p : h) {
            streams::Sample s;
            s.bytes = p;
            prior.push_back(std::move(s));
        }
        auto outcome = i2m::parse_and_verify(payload, sensor, prior, i2m_cfg);
        h.push_back(payload);
        if (h.size() > 33) h.erase(h.begin());
        store_ticks[sensor].push_back(rec.tick);

        Tick parse_tick = rec.tick + 2;
        if (parse_tick > last_tick) continue;
        auto logged = parse_outcomes.find({sensor, rec.payload.at("seq")});
        if (logged == parse_outcomes.end()) {
            diverge(parse_tick, "i2m_parse." + sensor, outcome.str(), "missing parse event");
            continue;
        }
        if (logged->second != outcome.str())
            diverge(parse_tick, "i2m_parse." + sensor, outcome.str(), logged->second);
        if (!outcome.pass) rejected["i2m"].push_back({rec.tick, rec.tick});
    }

    // --- I2M inactivity: rejected while the register stream is stale ---
    for (const auto& s : sc.sensors) {
        Tick t_d = sc.t_d_for(s.id);
        const auto& ticks = store_ticks[s.id];
        for (std::size_t i = 0; i < ticks.size(); ++i) {
            Tick start = ticks[i] + t_d + 1;
            Tick end = i + 1 < ticks.size() ? ticks[i + 1] - 1 : last_tick;
            if (start <= end) rejected["i2m"].push_back({start, end});
        }
    }

    // --- EIM branch checks ---
    std::set<Tick> logged_cf_violation;
    for (const auto& rec : records)
        if (rec.kind == "event" && rec.payload.count("action") &&
            rec.payload.at("action") == vb::kControlFlowViolation)
            logged_cf_violation.insert(rec.tick);
    std::set<Tick> computed_cf_violation;
    std::vector<std::pair<Tick, plant::BranchEvent>> branches;
    for (const auto& rec : records) {
        if (rec.kind != "branch" || rec.source != "plant") continue;
        plant::BranchEvent ev;
        ev.tick = rec.tick;
        ev.kind = *plant::branch_kind_from(rec.payload.at("kind"));
        ev.site_address = std::stoull(rec.payload.at("site"), nullptr, 0);
        ev.target_address = std::stoull(rec.payload.at("target"), nullptr, 0);
        ev.return_address = std::stoull(rec.payload.at("return"), nullptr, 0);
        branches.emplace_back(rec.tick, ev);
        if (!eim::check_branch(ev, ref).ok) {
            computed_cf_violation.insert(rec.tick);
            rejected["eim"].push_back({rec.tick, rec.tick});
        }
    }
    for (Tick t : computed_cf_violation)
        if (!logged_cf_violation.count(t)) diverge(t, "control_flow", "violation event", "none");
    for (Tick t : logged_cf_violation)
        if (!computed_cf_violation.count(t)) diverge(t, "control_flow", "no violation", "violation event");

    // --- EIM firmware gate: recompute from logged digests ---
    for (const auto& rec : records) {
        if (rec.kind != "event" || rec.source != "eim") continue;
        auto it = rec.payload.find("action");
        if (it == rec.payload.end() || it->second != "gate_execution") continue;
        bool ok = rec.payload.at("live_digest") == rec.payload.at("ref_digest");
        std::string expected = ok ? "granted" : "withheld";
        if (rec.payload.at("result") != expected)
            diverge(rec.tick, "gate_execution", expected, rec.payload.at("result"));
        if (!ok) rejected["eim"].push_back({rec.tick, rec.tick});
    }

    // --- EIM memory watch flips ---
    for (const auto& rec : records) {
        if (rec.kind != "memory_check") continue;
        if (rec.payload.at("status") == "mismatch") rejected["eim"].push_back({rec.tick, rec.tick});
    }

    // --- pattern violations (sticky) ---
    {
        std::vector<std::pair<std::string, ec::Pattern>> all;
        for (const auto& s : sc.sensors) {
            for (auto& p : vb::hrim_patterns(s.id)) all.emplace_back("hrim", std::move(p));
            for (auto& p : vb::i2m_patterns(s.id, sc.t_d_for(s.id))) all.emplace_back("i2m", std::move(p));
        }
        for (auto& p : vb::eim_patterns()) all.emplace_back("eim", std::move(p));
        for (const auto& [monitor, pattern] : all) {
            auto out = ec::evaluate_pattern(pattern, engine, last_tick);
            if (out.status == ec::PatternStatus::Violated)
                rejected[monitor].push_back({std::max<Tick>(out.violation_tick, 0), last_tick});
        }
    }

    // --- verdict change streams ---
    std::map<std::string, std::vector<std::pair<Tick, std::string>>> logged_verdicts;
    for (const auto& rec : records)
        if (rec.kind == "verdict")
            logged_verdicts[rec.payload.at("monitor")].emplace_back(rec.tick,
                                                                    rec.payload.at("status"));
    for (const auto& monitor : {"hrim", "i2m", "eim"}) {
        auto merged = merge_intervals(rejected[monitor]);
        auto expected = change_list(merged, horizon);
        const auto& logged = logged_verdicts[monitor];
        std::size_t n = std::max(expected.size(), logged.size());
        for (std::size_t i = 0; i < n; ++i) {
            if (i >= expected.size()) {
                diverge(logged[i].first, std::string("verdict.") + monitor, "no change",
                        logged[i].second);
                continue;
            }
            if (i >= logged.size()) {
                diverge(expected[i].tick, std::string("verdict.") + monitor,
                        expected[i].rejected ? "rejected" : "holds", "missing record");
                continue;
            }
            std::string want = expected[i].rejected ? "rejected" : "holds";
            if (logged[i].first != expected[i].tick || logged[i].second != want)
                diverge(expected[i].tick, std::string("verdict.") + monitor,
                        want + "@" + std::to_string(expected[i].tick),
                        logged[i].second + "@" + std::to_string(logged[i].first));
        }
    }

    // --- invariant: gatekeeping (store only after a passing parse, same tick) ---
    for (const auto& rec : records) {
        if (rec.kind != "event" || !rec.payload.count("action")) continue;
        const auto& a = rec.payload.at("action");
        std::string prefix = std::string(vb::kStoreI2mData) + ":";
        if (a.rfind(prefix, 0) != 0) continue;
        std::string sensor = a.substr(prefix.size());
        if (!timeline.happens(ec::act(vb::kI2mParseData, sensor), rec.tick)) {
            diverge(rec.tick, "gatekeeping." + sensor, "parse event at store tick", "none");
            continue;
        }
        auto logged = parse_outcomes.find({sensor, rec.payload.count("ctx_seq")
                                                       ? rec.payload.at("ctx_seq")
                                                       : std::string()});
        if (logged != parse_outcomes.end() && logged->second != "pass")
            diverge(rec.tick, "gatekeeping." + sensor, "pass", logged->second);
    }

    // --- invariant: inactivity disconnects land exactly at baseline + t_d + 1 ---
    std::map<std::string, std::vector<Tick>> recovery_ticks;
    for (const auto& rec : records)
        if (rec.kind == "mitigation" && rec.payload.count("phase") &&
            rec.payload.at("phase") == "recovered")
            recovery_ticks[rec.payload.at("sensor")].push_back(rec.tick);
    for (const auto& rec : records) {
        if (rec.kind != "event" || !rec.payload.count("action")) continue;
        const auto& a = rec.payload.at("action");
        std::string prefix = std::string(vb::kI2mSendInfoToDisconnect) + ":";
        if (a.rfind(prefix, 0) != 0) continue;
        if (!rec.payload.count("ctx_reason") || rec.payload.at("ctx_reason") != "inactivity") continue;
        std::string sensor = a.substr(prefix.size());
        Tick baseline = 0;
        for (Tick st : store_ticks[sensor])
            if (st < rec.tick) baseline = std::max(baseline, st);
        for (Tick rt : recovery_ticks[sensor])
            if (rt < rec.tick) baseline = std::max(baseline, rt);
        Tick expected_tick = baseline + sc.t_d_for(sensor) + 1;
        if (rec.tick != expected_tick)
            diverge(rec.tick, "timeout_exactness." + sensor, std::to_string(expected_tick),
                    std::to_string(rec.tick));
    }

    // --- invariant: failsafe reachability after a tampered branch ---
    for (Tick t : computed_cf_violation) {
        bool redirect_found = false;
        for (const auto& rec : records) {
            if (rec.kind == "event" && rec.source == "plant" && rec.payload.count("action") &&
                rec.payload.at("action") == "redirect_applied" && rec.tick == t + 1) {
                redirect_found = true;
                std::uint64_t addr = std::stoull(rec.payload.at("address"), nullptr, 0);
                if (addr != ref.failsafe_address)
                    diverge(t + 1, "failsafe_address", hex_word(ref.failsafe_address),
                            hex_word(addr));
            }
        }
        if (!redirect_found) diverge(t + 1, "failsafe_redirect", "redirect_applied", "none");
        for (const auto& [bt, ev] : branches)
            if (bt > t) diverge(bt, "post_failsafe_branch", "none", "branch executed");
    }

    return report;
}

VerifyReport verify_log_file(const std::string& path) { return verify_log(read_log_file(path)); }

}  // namespace cpsmon::sim
