#pragma once

// Firmware image, miniature word-addressed ISA, and the reference
// control-flow table derived from static program layout.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cpsmon/util.hpp"

namespace cpsmon::plant {

// Word-addressed memory map.
inline constexpr std::uint64_t kFlashBase = 0x08000000;
inline constexpr std::uint64_t kFlashWords = 25'600;  // covers the failsafe routine
inline constexpr std::uint64_t kRamBase = 0x20000000;
inline constexpr std::uint64_t kRamWords = 4'096;
inline constexpr std::uint64_t kScratchBase = kRamBase + 0x000;
inline constexpr std::uint64_t kActuatorBase = kRamBase + 0x100;
inline constexpr std::uint64_t kHrimRegBase = kRamBase + 0x200;  // one block per sensor
inline constexpr std::uint64_t kI2mRegBase = kRamBase + 0x300;
inline constexpr std::uint64_t kRegBlockWords = 0x40;
inline constexpr std::uint64_t kStackTop = kRamBase + kRamWords;  // grows down
inline constexpr std::uint64_t kDefaultFailsafeAddress = 0x08006168;

// Register block layout (word offsets). Payload bytes occupy one word each.
inline constexpr std::uint64_t kRegStatus = 0;   // 0 empty, 1 fresh
inline constexpr std::uint64_t kRegLength = 1;   // payload length in bytes
inline constexpr std::uint64_t kRegSeq = 2;      // frame sequence number
inline constexpr std::uint64_t kHrimRegPayload = 3;
inline constexpr std::uint64_t kI2mRegVerify = 3;  // 1 = passed verification
inline constexpr std::uint64_t kI2mRegPayload = 4;

enum class Opcode : std::uint32_t {
    Halt = 0,
    LoadImm = 1,
    Load = 2,
    Store = 3,
    Add = 4,
    Cmp = 5,
    Jump = 6,
    Call = 7,
    Ret = 8,
};

enum class JumpCond : std::uint32_t { Always = 0, IfEqual = 1, IfNotEqual = 2 };

// word0 = opcode | rA<<8 | rB<<12 | cond<<16; two-word forms carry the
// immediate/address in the following word.
std::uint32_t encode_op(Opcode op, int ra = 0, int rb = 0, JumpCond cond = JumpCond::Always);
Opcode opcode_of(std::uint32_t word);
int instruction_words(Opcode op);

struct FirmwareImage {
    std::uint64_t base_address = kFlashBase;
    std::vector<std::uint32_t> words;

    std::uint64_t digest() const;
    bool in_range(std::uint64_t address) const {
        return address >= base_address && address < base_address + words.size();
    }
    std::uint32_t word_at(std::uint64_t address) const;

    // Flat little-endian binary (4 bytes per word).
    std::vector<std::uint8_t> to_bytes() const;
    static FirmwareImage from_bytes(std::uint64_t base, const std::vector<std::uint8_t>& bytes);
    void save(const std::string& path) const;
    static FirmwareImage load(const std::string& path, std::uint64_t base);
};

enum class BranchKind { Call, Return, Jump };

std::string branch_kind_name(BranchKind kind);
std::optional<BranchKind> branch_kind_from(const std::string& name);

struct BranchEvent {
    Tick tick = 0;
    BranchKind kind = BranchKind::Call;
    std::uint64_t site_address = 0;
    std::uint64_t target_address = 0;
    std::uint64_t return_address = 0;
};

struct ReferenceEntry {
    std::uint64_t site_address = 0;
    BranchKind kind = BranchKind::Call;
    std::uint64_t expected_target = 0;
    std::uint64_t expected_return = 0;
};

struct ReferenceControlFlow {
    std::vector<ReferenceEntry> entries;
    std::uint64_t failsafe_address = kDefaultFailsafeAddress;

    const ReferenceEntry* find(std::uint64_t site) const;

    // Plain-text table: one "site kind target return" row per line, hex
    // fields, '#' comments.
    std::string to_text() const;
    static ReferenceControlFlow from_text(const std::string& text);
    void save(const std::string& path) const;
    static ReferenceControlFlow load(const std::string& path);
};

struct FunctionSpan {
    std::string name;
    std::uint64_t start = 0;
    std::uint64_t end = 0;  // exclusive
};

struct FunctionMap {
    std::vector<FunctionSpan> spans;
    std::string name_of(std::uint64_t address) const;
};

struct BuiltFirmware {
    FirmwareImage image;
    ReferenceControlFlow reference;
    FunctionMap functions;
    std::uint64_t mcu_init_call_site = 0;
    std::uint64_t mcu_init_return_slot = 0;  // RAM stack slot holding the return address
};

// The builtin flight-control program: main calls mcu_init once (calibration
// delay loop included), then loops over sensor_poll / control_step reading
// the validated-data registers. A failsafe routine parks the outputs and
// halts; it lives at the configured failsafe address.
BuiltFirmware build_default_firmware(std::uint64_t failsafe_address = kDefaultFailsafeAddress);

}  // namespace cpsmon::plant
