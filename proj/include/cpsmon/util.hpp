#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpsmon {

// Simulation time step. The plant runs at 1,000,000 ticks per simulated
// second so standard baud rates map to small integer bit periods.
using Tick = std::int64_t;

inline constexpr std::int64_t kTickRateHz = 1'000'000;

struct SimError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define CPSMON_ERROR(Name)                          \
    struct Name : SimError {                        \
        using SimError::SimError;                   \
    }

// ec-engine
CPSMON_ERROR(DuplicateOccurrence);
CPSMON_ERROR(TickBeyondHorizon);
CPSMON_ERROR(UnknownFluent);
CPSMON_ERROR(InvalidInterval);
CPSMON_ERROR(MalformedPattern);
CPSMON_ERROR(ConflictingRule);
// streams
CPSMON_ERROR(NonMonotonicTick);
CPSMON_ERROR(EmptyWindow);
CPSMON_ERROR(SkippedTick);
// monitor-core
CPSMON_ERROR(UnregisteredStream);
CPSMON_ERROR(UnknownVertex);
CPSMON_ERROR(CycleWithoutDelay);
CPSMON_ERROR(FrozenMonitor);
// plant
CPSMON_ERROR(InsufficientEdges);
CPSMON_ERROR(UnknownSensor);
CPSMON_ERROR(AddressOutOfRange);
CPSMON_ERROR(ShapeMismatch);
// eim
CPSMON_ERROR(UnknownBranchSite);
// harness
CPSMON_ERROR(UnknownTarget);
// i2m
CPSMON_ERROR(MitigationFailed);
// cli
CPSMON_ERROR(ParseError);
CPSMON_ERROR(CorruptLog);

#undef CPSMON_ERROR

// Deterministic 64-bit mix; the only randomness source in the simulator.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, bound).
    std::uint64_t below(std::uint64_t bound) { return bound ? next() % bound : 0; }

private:
    std::uint64_t state_;
};

inline std::uint64_t fnv1a64(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

std::string to_hex(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> from_hex(const std::string& hex);
std::string hex_word(std::uint64_t value);  // 0x%08x style, fixed width 8

}  // namespace cpsmon
