#pragma once

// Offline forensics: re-derives monitor behaviour from the non-verdict
// records of a log and reports every divergence from what was recorded.

#include <string>
#include <vector>

#include "cpsmon/logrec.hpp"
#include "cpsmon/util.hpp"

namespace cpsmon::sim {

struct Divergence {
    Tick tick = 0;
    std::string what;
    std::string expected;
    std::string found;
};

struct VerifyReport {
    std::int64_t records = 0;
    std::vector<Divergence> divergences;
    std::string summary() const;
};

// Throws CorruptLog on schema or ordering violations; everything else is
// reported as a divergence.
VerifyReport verify_log(const std::vector<LogRecord>& records);
VerifyReport verify_log_file(const std::string& path);

}  // namespace cpsmon::sim
