#include "doctest.h"

#include <cstdio>

#include "cpsmon/firmware.hpp"

using namespace cpsmon;
using namespace cpsmon::plant;

TEST_CASE("builtin firmware layout") {
    auto built = build_default_firmware();
    CHECK(built.image.base_address == kFlashBase);
    CHECK(built.image.words.size() == kFlashWords);

    // failsafe routine sits at the configured address
    CHECK(opcode_of(built.image.word_at(kDefaultFailsafeAddress)) == Opcode::LoadImm);
    CHECK(built.reference.failsafe_address == kDefaultFailsafeAddress);

    // every function has a span and the map resolves addresses
    CHECK(built.functions.name_of(kFlashBase) == "main");
    CHECK(built.functions.name_of(kDefaultFailsafeAddress) == "failsafe");
    CHECK(built.functions.name_of(kFlashBase + 0x5000) == "pad");

    // reference table covers call, jump and return sites
    int calls = 0, jumps = 0, rets = 0;
    for (const auto& e : built.reference.entries) {
        switch (e.kind) {
            case BranchKind::Call: ++calls; break;
            case BranchKind::Jump: ++jumps; break;
            case BranchKind::Return: ++rets; break;
        }
    }
    CHECK(calls == 3);
    CHECK(jumps == 3);
    CHECK(rets == 3);

    // call/return expectations agree (single-caller convention)
    const auto* call_entry = built.reference.find(built.mcu_init_call_site);
    REQUIRE(call_entry != nullptr);
    CHECK(call_entry->expected_return == built.mcu_init_call_site + 2);
}

TEST_CASE("reference table round-trips through its text format") {
    auto built = build_default_firmware();
    auto text = built.reference.to_text();
    auto parsed = ReferenceControlFlow::from_text(text);
    CHECK(parsed.failsafe_address == built.reference.failsafe_address);
    REQUIRE(parsed.entries.size() == built.reference.entries.size());
    for (std::size_t i = 0; i < parsed.entries.size(); ++i) {
        CHECK(parsed.entries[i].site_address == built.reference.entries[i].site_address);
        CHECK(parsed.entries[i].kind == built.reference.entries[i].kind);
        CHECK(parsed.entries[i].expected_target == built.reference.entries[i].expected_target);
        CHECK(parsed.entries[i].expected_return == built.reference.entries[i].expected_return);
    }
    CHECK_THROWS_AS(ReferenceControlFlow::from_text("0x1 warp 0x2 0x3\n"), ParseError);
}

TEST_CASE("firmware image round-trips through flat binary") {
    auto built = build_default_firmware();
    auto bytes = built.image.to_bytes();
    auto back = FirmwareImage::from_bytes(built.image.base_address, bytes);
    CHECK(back.words == built.image.words);
    CHECK(back.digest() == built.image.digest());

    std::string path = "/tmp/cpsmon_fw_test.bin";
    built.image.save(path);
    auto loaded = FirmwareImage::load(path, built.image.base_address);
    CHECK(loaded.digest() == built.image.digest());
    std::remove(path.c_str());
}

TEST_CASE("digest is sensitive to any word") {
    auto built = build_default_firmware();
    auto base = built.image.digest();
    auto copy = built.image;
    copy.words[12'000] ^= 1;  // deep in the padding
    CHECK(copy.digest() != base);
}
