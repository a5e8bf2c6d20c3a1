#include "cpsmon/firmware.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace cpsmon::plant {

std::uint32_t encode_op(Opcode op, int ra, int rb, JumpCond cond) {
    return static_cast<std::uint32_t>(op) | (static_cast<std::uint32_t>(ra) << 8) |
           (static_cast<std::uint32_t>(rb) << 12) | (static_cast<std::uint32_t>(cond) << 16);
}

Opcode opcode_of(std::uint32_t word) { return static_cast<Opcode>(word & 0xff); }

int instruction_words(Opcode op) {
    switch (op) {
        case Opcode::LoadImm:
        case Opcode::Load:
        case Opcode::Store:
        case Opcode::Jump:
        case Opcode::Call:
            return 2;
        default:
            return 1;
    }
}

std::uint64_t FirmwareImage::digest() const {
    return fnv1a64(words.data(), words.size() * sizeof(std::uint32_t));
}

std::uint32_t FirmwareImage::word_at(std::uint64_t address) const {
    if (!in_range(address)) throw AddressOutOfRange("flash read at " + hex_word(address));
    return words[address - base_address];
}

std::vector<std::uint8_t> FirmwareImage::to_bytes() const {
    std::vector<std::uint8_t> out;
    out.reserve(words.size() * 4);
    for (std::uint32_t w : words) {
        out.push_back(static_cast<std::uint8_t>(w & 0xff));
        out.push_back(static_cast<std::uint8_t>((w >> 8) & 0xff));
        out.push_back(static_cast<std::uint8_t>((w >> 16) & 0xff));
        out.push_back(static_cast<std::uint8_t>((w >> 24) & 0xff));
    }
    return out;
}

FirmwareImage FirmwareImage::from_bytes(std::uint64_t base, const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() % 4 != 0) throw ParseError("firmware binary is not word aligned");
    FirmwareImage img;
    img.base_address = base;
    img.words.reserve(bytes.size() / 4);
    for (std::size_t i = 0; i < bytes.size(); i += 4) {
        img.words.push_back(static_cast<std::uint32_t>(bytes[i]) |
                            static_cast<std::uint32_t>(bytes[i + 1]) << 8 |
                            static_cast<std::uint32_t>(bytes[i + 2]) << 16 |
                            static_cast<std::uint32_t>(bytes[i + 3]) << 24);
    }
    return img;
}

void FirmwareImage::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SimError("cannot write firmware to " + path);
    auto bytes = to_bytes();
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

FirmwareImage FirmwareImage::load(const std::string& path, std::uint64_t base) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot read firmware from " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return from_bytes(base, bytes);
}

std::string branch_kind_name(BranchKind kind) {
    switch (kind) {
        case BranchKind::Call: return "call";
        case BranchKind::Return: return "return";
        case BranchKind::Jump: return "jump";
    }
    return "?";
}

std::optional<BranchKind> branch_kind_from(const std::string& name) {
    if (name == "call") return BranchKind::Call;
    if (name == "return") return BranchKind::Return;
    if (name == "jump") return BranchKind::Jump;
    return std::nullopt;
}

const ReferenceEntry* ReferenceControlFlow::find(std::uint64_t site) const {
    for (const auto& e : entries)
        if (e.site_address == site) return &e;
    return nullptr;
}

std::string ReferenceControlFlow::to_text() const {
    std::ostringstream out;
    out << "# site kind target return\n";
    out << "# failsafe " << hex_word(failsafe_address) << "\n";
    for (const auto& e : entries) {
        out << hex_word(e.site_address) << " " << branch_kind_name(e.kind) << " "
            << hex_word(e.expected_target) << " " << hex_word(e.expected_return) << "\n";
    }
    return out.str();
}

ReferenceControlFlow ReferenceControlFlow::from_text(const std::string& text) {
    ReferenceControlFlow ref;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("# failsafe ", 0) == 0) {
            ref.failsafe_address = std::stoull(line.substr(11), nullptr, 16);
            continue;
        }
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream fields(line);
        std::string site, kind, target, ret;
        if (!(fields >> site >> kind >> target >> ret)) continue;
        auto k = branch_kind_from(kind);
        if (!k) throw ParseError("bad branch kind '" + kind + "' in control-flow table");
        ReferenceEntry e;
        e.site_address = std::stoull(site, nullptr, 16);
        e.kind = *k;
        e.expected_target = std::stoull(target, nullptr, 16);
        e.expected_return = std::stoull(ret, nullptr, 16);
        ref.entries.push_back(e);
    }
    return ref;
}

void ReferenceControlFlow::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw SimError("cannot write control-flow table to " + path);
    out << to_text();
}

ReferenceControlFlow ReferenceControlFlow::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot read control-flow table from " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return from_text(buf.str());
}

std::string FunctionMap::name_of(std::uint64_t address) const {
    for (const auto& s : spans)
        if (address >= s.start && address < s.end) return s.name;
    return "pad";
}

namespace {

// Minimal label-based assembler for the builtin program.
class Assembler {
public:
    explicit Assembler(std::uint64_t base) : base_(base) { words_.resize(kFlashWords, 0); }

    std::uint64_t here() const { return base_ + cursor_; }
    void org(std::uint64_t address) { cursor_ = address - base_; }
    void label(const std::string& name) { labels_[name] = here(); }
    std::uint64_t label_address(const std::string& name) const { return labels_.at(name); }

    void loadi(int r, std::uint32_t imm) { emit(encode_op(Opcode::LoadImm, r), imm); }
    void load(int r, std::uint64_t addr) { emit(encode_op(Opcode::Load, r), static_cast<std::uint32_t>(addr)); }
    void store(int r, std::uint64_t addr) { emit(encode_op(Opcode::Store, r), static_cast<std::uint32_t>(addr)); }
    void add(int ra, int rb) { emit(encode_op(Opcode::Add, ra, rb)); }
    void cmp(int ra, int rb) { emit(encode_op(Opcode::Cmp, ra, rb)); }
    void halt() { emit(encode_op(Opcode::Halt)); }
    void ret() { emit(encode_op(Opcode::Ret)); }

    void jump(const std::string& target, JumpCond cond = JumpCond::Always) {
        fixups_.push_back({cursor_ + 1, target});
        emit(encode_op(Opcode::Jump, 0, 0, cond), 0);
    }
    void call(const std::string& target) {
        fixups_.push_back({cursor_ + 1, target});
        emit(encode_op(Opcode::Call), 0);
    }

    std::vector<std::uint32_t> finish() {
        for (const auto& [offset, label] : fixups_)
            words_[offset] = static_cast<std::uint32_t>(labels_.at(label));
        return words_;
    }

private:
    void emit(std::uint32_t w0) { words_[cursor_++] = w0; }
    void emit(std::uint32_t w0, std::uint32_t w1) {
        words_[cursor_++] = w0;
        words_[cursor_++] = w1;
    }

    std::uint64_t base_;
    std::uint64_t cursor_ = 0;
    std::vector<std::uint32_t> words_;
    std::map<std::string, std::uint64_t> labels_;
    std::vector<std::pair<std::uint64_t, std::string>> fixups_;
};

}  // namespace

BuiltFirmware build_default_firmware(std::uint64_t failsafe_address) {
    Assembler a(kFlashBase);
    BuiltFirmware built;
    ReferenceControlFlow& ref = built.reference;
    ref.failsafe_address = failsafe_address;

    struct PendingBranch {
        std::uint64_t site;
        BranchKind kind;
        std::string target_label;
    };
    std::vector<PendingBranch> branches;
    std::map<std::string, std::uint64_t> call_site_of;  // single-caller convention

    auto record_call = [&](const std::string& target) {
        std::uint64_t site = a.here();
        branches.push_back({site, BranchKind::Call, target});
        call_site_of[target] = site;
        a.call(target);
    };
    auto record_jump = [&](const std::string& target, JumpCond cond) {
        branches.push_back({a.here(), BranchKind::Jump, target});
        a.jump(target, cond);
    };
    auto record_ret = [&](const std::string& own_function) {
        branches.push_back({a.here(), BranchKind::Return, own_function});
        a.ret();
    };

    // main
    a.label("main");
    record_call("mcu_init");
    a.label("loop");
    record_call("sensor_poll");
    record_call("control_step");
    record_jump("loop", JumpCond::Always);
    std::uint64_t main_end = a.here();

    // mcu_init: store a config word, then a calibration delay loop.
    a.label("mcu_init");
    a.loadi(0, 0x57A7);
    a.store(0, kScratchBase + 0);
    a.loadi(1, 600);                  // delay iterations
    a.loadi(2, 0xFFFFFFFFu);          // -1
    a.loadi(3, 0);
    a.label("mcu_delay");
    a.add(1, 2);
    a.cmp(1, 3);
    record_jump("mcu_delay", JumpCond::IfNotEqual);
    record_ret("mcu_init");
    std::uint64_t mcu_init_end = a.here();

    // sensor_poll: read validated-data registers into scratch.
    a.label("sensor_poll");
    a.load(0, kI2mRegBase + kRegStatus);
    a.load(1, kI2mRegBase + kI2mRegPayload);
    a.store(1, kScratchBase + 1);
    a.load(2, kI2mRegBase + kRegBlockWords + kRegStatus);
    a.load(3, kI2mRegBase + kRegBlockWords + kI2mRegPayload);
    a.store(3, kScratchBase + 2);
    a.add(0, 2);
    a.store(0, kScratchBase + 3);
    record_ret("sensor_poll");
    std::uint64_t sensor_poll_end = a.here();

    // control_step: combine scratch values into the actuator block.
    a.label("control_step");
    a.load(0, kScratchBase + 1);
    a.load(1, kScratchBase + 2);
    a.add(0, 1);
    a.store(0, kActuatorBase + 0);
    a.loadi(2, 0);
    a.cmp(0, 2);
    record_jump("control_skip", JumpCond::IfEqual);
    a.store(0, kActuatorBase + 1);
    a.label("control_skip");
    record_ret("control_step");
    std::uint64_t control_step_end = a.here();

    // failsafe: park the outputs, halt.
    a.org(failsafe_address);
    a.label("failsafe");
    a.loadi(0, 0);
    a.store(0, kActuatorBase + 0);
    a.store(0, kActuatorBase + 1);
    a.halt();
    std::uint64_t failsafe_end = a.here();

    built.image.base_address = kFlashBase;
    built.image.words = a.finish();

    // Resolve the static expectations now that labels are known.
    for (const auto& b : branches) {
        ReferenceEntry e;
        e.site_address = b.site;
        e.kind = b.kind;
        switch (b.kind) {
            case BranchKind::Call:
                e.expected_target = a.label_address(b.target_label);
                e.expected_return = b.site + 2;
                break;
            case BranchKind::Jump:
                e.expected_target = a.label_address(b.target_label);
                e.expected_return = b.site + 1;  // convention for non-returning branches
                break;
            case BranchKind::Return: {
                std::uint64_t call_site = call_site_of.at(b.target_label);
                e.expected_target = call_site + 2;
                e.expected_return = call_site + 2;
                break;
            }
        }
        ref.entries.push_back(e);
    }

    built.functions.spans = {
        {"main", a.label_address("main"), main_end},
        {"mcu_init", a.label_address("mcu_init"), mcu_init_end},
        {"sensor_poll", a.label_address("sensor_poll"), sensor_poll_end},
        {"control_step", a.label_address("control_step"), control_step_end},
        {"failsafe", a.label_address("failsafe"), failsafe_end},
    };
    built.mcu_init_call_site = call_site_of.at("mcu_init");
    // main runs at the outermost frame; its callees' return addresses occupy
    // the first stack slot below the stack top.
    built.mcu_init_return_slot = kStackTop - 1;
    return built;
}

}  // namespace cpsmon::plant
