#include "cpsmon/eim.hpp"

#include <algorithm>

#include "cpsmon/vocab.hpp"

namespace cpsmon::eim {

using ec::act;
using ec::fluent;
namespace vb = cpsmon::vocab;

bool verify_firmware(const plant::FirmwareImage& live, const plant::FirmwareImage& reference,
                     bool paranoid) {
    if (live.base_address != reference.base_address || live.words.size() != reference.words.size())
        throw ShapeMismatch("firmware images differ in base or length");
    if (live.digest() != reference.digest()) return false;
    if (paranoid) return live.words == reference.words;
    return true;
}

BranchVerdict check_branch(const plant::BranchEvent& event, const plant::ReferenceControlFlow& ref) {
    const plant::ReferenceEntry* entry = ref.find(event.site_address);
    if (!entry) return {false, "site"};
    if (entry->kind != event.kind) return {false, "kind"};
    if (event.kind == plant::BranchKind::Return) {
        if (event.return_address != entry->expected_return) return {false, "return"};
        if (event.target_address != entry->expected_target) return {false, "target"};
    } else {
        if (event.target_address != entry->expected_target) return {false, "target"};
        if (event.return_address != entry->expected_return) return {false, "return"};
    }
    return {true, ""};
}

streams::Sample encode_branch_sample(const plant::BranchEvent& ev) {
    streams::Sample s;
    s.tick = ev.tick;
    s.scalar = static_cast<std::int64_t>(ev.site_address);
    s.tag = plant::branch_kind_name(ev.kind);
    s.bytes.resize(25);
    s.bytes[0] = static_cast<std::uint8_t>(ev.kind);
    auto put64 = [&](std::size_t off, std::uint64_t v) {
        for (int i = 0; i < 8; ++i) s.bytes[off + static_cast<std::size_t>(i)] =
            static_cast<std::uint8_t>((v >> (8 * i)) & 0xff);
    };
    put64(1, ev.site_address);
    put64(9, ev.target_address);
    put64(17, ev.return_address);
    return s;
}

plant::BranchEvent decode_branch_sample(const streams::Sample& s) {
    if (s.bytes.size() != 25) throw SimError("bad branch sample encoding");
    plant::BranchEvent ev;
    ev.tick = s.tick;
    ev.kind = static_cast<plant::BranchKind>(s.bytes[0]);
    auto get64 = [&](std::size_t off) {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(s.bytes[off + static_cast<std::size_t>(i)]) << (8 * i);
        return v;
    };
    ev.site_address = get64(1);
    ev.target_address = get64(9);
    ev.return_address = get64(17);
    return ev;
}

Eim::Eim(EimConfig cfg, sim::MonitorContext ctx)
    : cfg_(std::move(cfg)), ctx_(std::move(ctx)),
      core_("eim", {"delta.program", "eim.fwcheck", "eim.watch"}) {
    // Static watch: the words forming each branch instruction (site and its
    // operand word for two-word forms).
    for (const auto& e : cfg_.ref_cfg.entries) {
        Watch w;
        w.address = e.site_address;
        w.expected = cfg_.reference.word_at(e.site_address);
        watches_.push_back(w);
        if (e.kind != plant::BranchKind::Return) {
            Watch op;
            op.address = e.site_address + 1;
            op.expected = cfg_.reference.word_at(e.site_address + 1);
            watches_.push_back(op);
        }
    }

    plant::ReferenceControlFlow ref = cfg_.ref_cfg;
    mon::DetectionPredicate branch_pred;
    branch_pred.id = "control_flow";
    branch_pred.stream_id = "delta.program";
    branch_pred.cadence = mon::Cadence::OnSample;
    branch_pred.check = [ref](std::span<const streams::Sample> w, Tick) {
        return check_branch(decode_branch_sample(w.back()), ref).ok;
    };
    core_.add_predicate(std::move(branch_pred));

    mon::DetectionPredicate fw_pred;
    fw_pred.id = "firmware_digest";
    fw_pred.stream_id = "eim.fwcheck";
    fw_pred.cadence = mon::Cadence::OnSample;
    fw_pred.check = [](std::span<const streams::Sample> w, Tick) {
        // bytes hold live and reference digests back to back
        const auto& b = w.back().bytes;
        return b.size() == 16 && std::equal(b.begin(), b.begin() + 8, b.begin() + 8);
    };
    core_.add_predicate(std::move(fw_pred));

    mon::DetectionPredicate watch_pred;
    watch_pred.id = "memory_watch";
    watch_pred.stream_id = "eim.watch";
    watch_pred.cadence = mon::Cadence::OnSample;
    watch_pred.check = [](std::span<const streams::Sample> w, Tick) { return w.back().scalar == 0; };
    core_.add_predicate(std::move(watch_pred));

    for (auto& pat : vb::eim_patterns()) core_.add_pattern(std::move(pat));
}

ExecutionPermit Eim::gate_execution(Tick t, bool mid_run) {
    bool ok = verify_firmware(ctx_.plant->live_firmware(), cfg_.reference, cfg_.paranoid_compare);
    std::uint64_t live_digest = ctx_.plant->live_firmware().digest();
    std::uint64_t ref_digest = cfg_.reference.digest();

    ctx_.happens("eim", vb::kCheckFirmwareOk, t, {{"outcome", ok ? "pass" : "fail"}});

    streams::Sample s;
    s.scalar = ok ? 1 : 0;
    s.tag = "fwcheck";
    s.bytes.resize(16);
    for (int i = 0; i < 8; ++i) {
        s.bytes[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>((live_digest >> (8 * i)) & 0xff);
        s.bytes[static_cast<std::size_t>(8 + i)] = static_cast<std::uint8_t>((ref_digest >> (8 * i)) & 0xff);
    }
    ctx_.streams->push_sample("eim.fwcheck", std::move(s));

    sim::LogRecord rec;
    rec.tick = t;
    rec.source = "eim";
    rec.kind = "event";
    rec.payload["action"] = "gate_execution";
    rec.payload["result"] = ok ? "granted" : "withheld";
    rec.payload["live_digest"] = hex_word(live_digest);
    rec.payload["ref_digest"] = hex_word(ref_digest);
    ctx_.log(rec);

    if (ok) {
        if (!mid_run) {
            ctx_.happens("eim", vb::kExecuteProgram, t);
            mon::MonitorEvent permit;
            permit.tick = t;
            permit.source = "eim";
            permit.target = "autopilot_cpu";
            permit.label = "permit_execution";
            ctx_.emit(permit);
        }
        permit_ = ExecutionPermit::Granted;
    } else {
        ctx_.happens("eim", vb::kFirmwareViolation, t);
        permit_ = ExecutionPermit::Withheld;
        if (!mid_run) {
            mon::MonitorEvent withhold;
            withhold.tick = t;
            withhold.source = "eim";
            withhold.target = "autopilot_cpu";
            withhold.label = "withhold_execution";
            ctx_.emit(withhold);
        } else {
            trigger_failsafe(t, "firmware");
        }
    }
    return permit_;
}

void Eim::trigger_failsafe(Tick t, const std::string& why) {
    if (failsafe_sent_) return;
    failsafe_sent_ = true;
    ctx_.happens("eim", vb::kFailSafe, t, {{"why", why}});
    mon::MonitorEvent ev;
    ev.tick = t;
    ev.source = "eim";
    ev.target = "autopilot_cpu";
    ev.label = "redirect";
    ev.payload["address"] = hex_word(cfg_.failsafe_address);
    ctx_.emit(ev);

    sim::LogRecord rec;
    rec.tick = t;
    rec.source = "eim";
    rec.kind = "mitigation";
    rec.payload["phase"] = "failsafe";
    rec.payload["why"] = why;
    rec.payload["address"] = hex_word(cfg_.failsafe_address);
    ctx_.log(rec);
}

void Eim::handle_branch(const plant::BranchEvent& ev, Tick t) {
    branch_checks_ += 1;
    BranchVerdict v = check_branch(ev, cfg_.ref_cfg);
    ctx_.happens("eim", vb::kCheckControlFlowOk, t,
                 {{"outcome", v.ok ? "ok" : "tampered"},
                  {"field", v.tampered_field},
                  {"site", hex_word(ev.site_address)}});

    // Shadow bookkeeping for the return-slot watch.
    if (ev.kind == plant::BranchKind::Call) {
        std::uint64_t slot = cfg_.stack_top - (shadow_stack_.size() + 1);
        shadow_stack_.emplace_back(slot, ev.return_address);
        watches_.push_back(Watch{slot, static_cast<std::uint32_t>(ev.return_address), true});
    } else if (ev.kind == plant::BranchKind::Return && !shadow_stack_.empty()) {
        std::uint64_t slot = shadow_stack_.back().first;
        shadow_stack_.pop_back();
        watches_.erase(std::remove_if(watches_.begin(), watches_.end(),
                                      [slot](const Watch& w) { return w.dynamic && w.address == slot; }),
                       watches_.end());
    }

    if (!v.ok) {
        tampered_branches_ += 1;
        ctx_.happens("eim", vb::kControlFlowViolation, t, {{"field", v.tampered_field}});
        sim::LogRecord rec;
        rec.tick = t;
        rec.source = "eim";
        rec.kind = "branch";
        rec.payload["verdict"] = "tampered";
        rec.payload["field"] = v.tampered_field;
        rec.payload["site"] = hex_word(ev.site_address);
        rec.payload["target"] = hex_word(ev.target_address);
        rec.payload["return"] = hex_word(ev.return_address);
        ctx_.log(rec);
        trigger_failsafe(t, "control_flow:" + v.tampered_field);
    }
}

void Eim::check_watches(Tick t) {
    int mismatches = 0;
    std::uint64_t first_addr = 0;
    std::uint32_t first_expected = 0, first_actual = 0;
    for (const auto& w : watches_) {
        std::uint32_t actual = ctx_.plant->read_word(w.address);
        if (actual != w.expected) {
            if (mismatches == 0) {
                first_addr = w.address;
                first_expected = w.expected;
                first_actual = actual;
            }
            ++mismatches;
        }
    }
    if (mismatches != prev_mismatches_) {
        streams::Sample s;
        s.scalar = mismatches;
        s.tag = "watch";
        s.bytes.resize(16);
        auto put = [&](std::size_t off, std::uint64_t v, int n) {
            for (int i = 0; i < n; ++i)
                s.bytes[off + static_cast<std::size_t>(i)] =
                    static_cast<std::uint8_t>((v >> (8 * i)) & 0xff);
        };
        put(0, first_addr, 8);
        put(8, first_expected, 4);
        put(12, first_actual, 4);
        ctx_.streams->push_sample("eim.watch", std::move(s));

        sim::LogRecord rec;
        rec.tick = t;
        rec.source = "eim";
        rec.kind = "memory_check";
        rec.payload["status"] = mismatches == 0 ? "match" : "mismatch";
        rec.payload["mismatches"] = std::to_string(mismatches);
        if (mismatches > 0) {
            rec.payload["address"] = hex_word(first_addr);
            rec.payload["expected"] = hex_word(first_expected);
            rec.payload["actual"] = hex_word(first_actual);
        }
        ctx_.log(rec);
        prev_mismatches_ = mismatches;
    }
}

void Eim::step(Tick t) {
    (void)core_.drain(t);

    if (!booted_) {
        booted_ = true;
        gate_execution(t, false);
        // initial memory-check record establishes the "match" baseline
        sim::LogRecord rec;
        rec.tick = t;
        rec.source = "eim";
        rec.kind = "memory_check";
        rec.payload["status"] = "match";
        rec.payload["mismatches"] = "0";
        ctx_.log(rec);
    } else if (std::find(cfg_.recheck_ticks.begin(), cfg_.recheck_ticks.end(), t) !=
               cfg_.recheck_ticks.end()) {
        gate_execution(t, true);
    } else if (cfg_.continuous_hash) {
        gate_execution(t, true);
    }

    for (const auto& ev : (*ctx_.current)->branches) handle_branch(ev, t);
    check_watches(t);
}

}  // namespace cpsmon::eim
