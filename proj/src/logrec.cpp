#include "cpsmon/logrec.hpp"

#include <fstream>

#include "json.hpp"

namespace cpsmon::sim {

int source_rank(const std::string& source) {
    if (source == "plant") return 0;
    if (source == "harness") return 1;
    if (source == "hrim") return 2;
    if (source == "i2m") return 3;
    if (source == "eim") return 4;
    if (source == "scheduler") return 5;
    return 6;
}

std::string to_json_line(const LogRecord& rec) {
    nlohmann::json j;
    j["v"] = kLogSchemaVersion;
    j["tick"] = rec.tick;
    j["source"] = rec.source;
    j["kind"] = rec.kind;
    j["seq"] = rec.seq;
    j["payload"] = rec.payload;
    return j.dump();
}

LogRecord from_json_line(const std::string& line) {
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw CorruptLog("unparseable log line");
    if (!j.contains("v") || j["v"].get<int>() != kLogSchemaVersion)
        throw CorruptLog("unsupported log schema version");
    LogRecord rec;
    rec.tick = j.at("tick").get<Tick>();
    rec.source = j.at("source").get<std::string>();
    rec.kind = j.at("kind").get<std::string>();
    rec.seq = j.at("seq").get<std::int64_t>();
    rec.payload = j.at("payload").get<std::map<std::string, std::string>>();
    return rec;
}

void LogWriter::append(LogRecord rec) {
    rec.seq = next_seq_++;
    records_.push_back(std::move(rec));
}

void LogWriter::write_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SimError("cannot write log to " + path);
    for (const auto& rec : records_) out << to_json_line(rec) << "\n";
}

std::vector<LogRecord> read_log_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CorruptLog("cannot read log from " + path);
    std::vector<LogRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(from_json_line(line));
    }
    return out;
}

}  // namespace cpsmon::sim
