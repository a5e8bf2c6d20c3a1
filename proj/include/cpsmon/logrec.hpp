#pragma once

// Structured forensic log: newline-delimited records, strictly ordered by
// (tick, source rank, sequence).

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cpsmon/util.hpp"

namespace cpsmon::sim {

inline constexpr int kLogSchemaVersion = 1;

struct LogRecord {
    Tick tick = 0;
    std::string source;  // plant | harness | hrim | i2m | eim | scheduler
    std::string kind;    // event | fluent_change | verdict | mitigation | branch | frame | injection | meta | memory_check
    std::map<std::string, std::string> payload;
    std::int64_t seq = 0;  // assigned by the writer; strictly increasing
};

int source_rank(const std::string& source);

std::string to_json_line(const LogRecord& rec);
LogRecord from_json_line(const std::string& line);

class LogWriter {
public:
    void append(LogRecord rec);
    const std::vector<LogRecord>& records() const { return records_; }
    void write_file(const std::string& path) const;

private:
    std::vector<LogRecord> records_;
    std::int64_t next_seq_ = 0;
};

std::vector<LogRecord> read_log_file(const std::string& path);

}  // namespace cpsmon::sim
