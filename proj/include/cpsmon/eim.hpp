#pragma once

// Execution integrity monitor: verifies the firmware image before granting
// execution, checks every branch event against the reference control-flow
// table, and watches the branch-site words plus live return-address slots.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cpsmon/context.hpp"
#include "cpsmon/firmware.hpp"
#include "cpsmon/monitor.hpp"

namespace cpsmon::eim {

struct EimConfig {
    plant::FirmwareImage reference;         // immutable golden copy
    plant::ReferenceControlFlow ref_cfg;
    std::uint64_t failsafe_address = plant::kDefaultFailsafeAddress;
    std::uint64_t stack_top = plant::kStackTop;
    bool paranoid_compare = false;  // full word compare on digest match
    bool continuous_hash = false;   // re-hash every tick (expensive, off by default)
    std::vector<Tick> recheck_ticks;
};

enum class ExecutionPermit { Granted, Withheld };

struct BranchVerdict {
    bool ok = true;
    std::string tampered_field;  // site | kind | target | return
};

// True iff the images match. Throws ShapeMismatch on differing base/length.
bool verify_firmware(const plant::FirmwareImage& live, const plant::FirmwareImage& reference,
                     bool paranoid = false);

// Unknown sites count as tampered(site); returns check target/return first
// by their kind's sensitive field.
BranchVerdict check_branch(const plant::BranchEvent& event, const plant::ReferenceControlFlow& ref);

// Encoding used for delta-stream samples.
streams::Sample encode_branch_sample(const plant::BranchEvent& ev);
plant::BranchEvent decode_branch_sample(const streams::Sample& s);

class Eim : public mon::MonitorAgent {
public:
    Eim(EimConfig cfg, sim::MonitorContext ctx);

    mon::Monitor& core() override { return core_; }
    void step(Tick t) override;

    ExecutionPermit permit() const { return permit_; }
    std::uint64_t reference_digest() const { return cfg_.reference.digest(); }
    std::int64_t branch_checks() const { return branch_checks_; }
    std::int64_t tampered_branches() const { return tampered_branches_; }

    // Boot/re-check gate; records the check and blocks or redirects on
    // failure. Exposed for tests; the step loop invokes it at boot and at the
    // configured recheck ticks.
    ExecutionPermit gate_execution(Tick t, bool mid_run);

private:
    struct Watch {
        std::uint64_t address = 0;
        std::uint32_t expected = 0;
        bool dynamic = false;  // live return-address slot
    };

    void check_watches(Tick t);
    void handle_branch(const plant::BranchEvent& ev, Tick t);
    void trigger_failsafe(Tick t, const std::string& why);

    EimConfig cfg_;
    sim::MonitorContext ctx_;
    mon::Monitor core_;
    ExecutionPermit permit_ = ExecutionPermit::Withheld;
    bool booted_ = false;
    std::vector<Watch> watches_;
    std::vector<std::pair<std::uint64_t, std::uint64_t>> shadow_stack_;  // slot, expected return
    int prev_mismatches_ = 0;
    bool failsafe_sent_ = false;
    std::int64_t branch_checks_ = 0;
    std::int64_t tampered_branches_ = 0;
};

}  // namespace cpsmon::eim
