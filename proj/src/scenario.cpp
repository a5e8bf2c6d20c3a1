#include "cpsmon/scenario.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace cpsmon::sim {

using nlohmann::json;

namespace {

std::uint64_t parse_address(const json& j, const char* what) {
    if (j.is_number_unsigned() || j.is_number_integer()) return j.get<std::uint64_t>();
    if (j.is_string()) {
        try {
            return std::stoull(j.get<std::string>(), nullptr, 0);
        } catch (const std::exception&) {
            throw ParseError(std::string("bad address in ") + what);
        }
    }
    throw ParseError(std::string("bad address in ") + what);
}

}  // namespace

Tick Scenario::t_d_for(const std::string& sensor_id) const {
    auto it = t_d_ticks.find(sensor_id);
    if (it != t_d_ticks.end()) return it->second;
    return 3 * sensor(sensor_id).emit_period_ticks;
}

const ScenarioSensor& Scenario::sensor(const std::string& id) const {
    for (const auto& s : sensors)
        if (s.id == id) return s;
    throw ParseError("scenario has no sensor '" + id + "'");
}

std::size_t Scenario::frame_bytes(const std::string& kind) {
    if (kind == "gps") return 45;
    if (kind == "baro") return 16;
    throw ParseError("unknown sensor kind '" + kind + "'");
}

void Scenario::validate() const {
    if (version != 1) throw ParseError("unsupported scenario version");
    if (name.empty()) throw ParseError("scenario needs a name");
    if (horizon_ticks < 1) throw ParseError("horizon must be positive");
    if (sensors.empty()) throw ParseError("at least one sensor required");
    for (const auto& s : sensors) {
        if (s.kind != "gps" && s.kind != "baro")
            throw ParseError("unknown sensor kind '" + s.kind + "'");
        if (s.baud < 1) throw ParseError("sensor baud must be positive");
        if (s.emit_period_ticks < 1) throw ParseError("emit period must be positive");
        for (const auto& other : sensors)
            if (&s != &other && s.id == other.id) throw ParseError("duplicate sensor id " + s.id);
        Tick t_d = t_d_for(s.id);
        if (t_d <= s.emit_period_ticks)
            throw ParseError("t_d must exceed the emit period for sensor " + s.id);
    }
    if (!(baud_tolerance > 0.0 && baud_tolerance < 0.2))
        throw ParseError("baud tolerance must lie in (0, 0.2)");
    if (r_max < 2) throw ParseError("r_max must be >= 2");
    if (mitigation_retries < 1) throw ParseError("mitigation retries must be >= 1");
    if (instructions_per_tick < 1) throw ParseError("instructions_per_tick must be >= 1");

    for (const auto& a : attacks) {
        if (a.at_tick < 0 || a.at_tick >= horizon_ticks)
            throw ParseError("attack at tick " + std::to_string(a.at_tick) + " beyond horizon");
        switch (a.kind) {
            case harness::AttackKind::BaudChange:
                sensor(a.target);
                if (a.new_baud < 1) throw ParseError("baud_change needs new_baud");
                break;
            case harness::AttackKind::UartLockup:
            case harness::AttackKind::StuckValue:
                sensor(a.target);
                break;
            case harness::AttackKind::FrameCorrupt:
                sensor(a.target);
                break;
            case harness::AttackKind::MemoryTamper:
                if (a.address == 0) throw ParseError("memory_tamper needs an address");
                break;
            case harness::AttackKind::FirmwareCorrupt:
                break;
        }
    }
}

std::string Scenario::to_json_string() const {
    json j;
    j["version"] = version;
    j["name"] = name;
    j["horizon_ticks"] = horizon_ticks;
    j["seed"] = seed;

    json plant_j;
    plant_j["instructions_per_tick"] = instructions_per_tick;
    plant_j["failsafe_address"] = hex_word(failsafe_address);
    if (firmware_path.empty()) {
        plant_j["firmware"] = "builtin";
    } else {
        plant_j["firmware"] = {{"path", firmware_path}, {"base_address", hex_word(firmware_base)}};
    }
    if (ref_cfg_path.empty())
        plant_j["reference_control_flow"] = "builtin";
    else
        plant_j["reference_control_flow"] = {{"path", ref_cfg_path}};
    plant_j["sensors"] = json::array();
    for (const auto& s : sensors)
        plant_j["sensors"].push_back({{"id", s.id},
                                      {"kind", s.kind},
                                      {"emit_period_ticks", s.emit_period_ticks},
                                      {"baud", s.baud}});
    j["plant"] = plant_j;

    json mon_j;
    mon_j["hrim"] = {{"baud_tolerance", baud_tolerance}, {"idle_gap_bytes", idle_gap_bytes}};
    json td_j = json::object();
    for (const auto& s : sensors) td_j[s.id] = t_d_for(s.id);
    mon_j["i2m"] = {{"r_max", r_max},
                    {"mitigation_retries", mitigation_retries},
                    {"t_d_ticks", td_j},
                    {"checks",
                     {{"checksum", check_checksum}, {"range", check_range}, {"repeat", check_repeat}}}};
    if (!ranges.empty()) {
        json rj = json::object();
        for (const auto& [sensor, fields] : ranges)
            for (const auto& [field, bounds] : fields)
                rj[sensor][field] = {bounds.first, bounds.second};
        mon_j["i2m"]["ranges"] = rj;
    }
    mon_j["eim"] = {{"paranoid_compare", eim_paranoid},
                    {"continuous_hash", eim_continuous_hash},
                    {"recheck_ticks", eim_recheck_ticks}};
    j["monitors"] = mon_j;

    j["attacks"] = json::array();
    for (const auto& a : attacks) {
        json aj;
        aj["kind"] = harness::attack_kind_name(a.kind);
        aj["at_tick"] = a.at_tick;
        aj["recoverable"] = a.recoverable;
        if (!a.target.empty()) aj["target"] = a.target;
        switch (a.kind) {
            case harness::AttackKind::BaudChange:
                aj["new_baud"] = a.new_baud;
                break;
            case harness::AttackKind::StuckValue:
                if (!a.stuck_payload.empty()) aj["stuck_payload"] = to_hex(a.stuck_payload);
                break;
            case harness::AttackKind::FrameCorrupt:
                aj["byte_offset"] = a.byte_offset;
                aj["byte_value"] = a.byte_value;
                break;
            case harness::AttackKind::MemoryTamper:
                aj["address"] = hex_word(a.address);
                aj["value"] = hex_word(a.value);
                break;
            case harness::AttackKind::FirmwareCorrupt:
                aj["byte_offset"] = a.byte_offset;
                aj["byte_value"] = a.byte_value;
                break;
            default:
                break;
        }
        j["attacks"].push_back(aj);
    }
    return j.dump(2);
}

Scenario Scenario::from_json_string(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ParseError("scenario is not valid JSON");
    Scenario sc;
    try {
        sc.version = j.value("version", 1);
        sc.name = j.at("name").get<std::string>();
        sc.horizon_ticks = j.at("horizon_ticks").get<Tick>();
        sc.seed = j.value("seed", 0ULL);

        const json& pj = j.at("plant");
        sc.instructions_per_tick = pj.value("instructions_per_tick", 1);
        if (pj.contains("failsafe_address"))
            sc.failsafe_address = parse_address(pj["failsafe_address"], "failsafe_address");
        if (pj.contains("firmware") && pj["firmware"].is_object()) {
            sc.firmware_path = pj["firmware"].at("path").get<std::string>();
            if (pj["firmware"].contains("base_address"))
                sc.firmware_base = parse_address(pj["firmware"]["base_address"], "firmware base");
        }
        if (pj.contains("reference_control_flow") && pj["reference_control_flow"].is_object())
            sc.ref_cfg_path = pj["reference_control_flow"].at("path").get<std::string>();
        for (const auto& sj : pj.at("sensors")) {
            ScenarioSensor s;
            s.id = sj.at("id").get<std::string>();
            s.kind = sj.at("kind").get<std::string>();
            s.emit_period_ticks = sj.at("emit_period_ticks").get<Tick>();
            s.baud = sj.at("baud").get<std::int64_t>();
            sc.sensors.push_back(s);
        }

        if (j.contains("monitors")) {
            const json& mj = j["monitors"];
            if (mj.contains("hrim")) {
                sc.baud_tolerance = mj["hrim"].value("baud_tolerance", 0.05);
                sc.idle_gap_bytes = mj["hrim"].value("idle_gap_bytes", 2);
            }
            if (mj.contains("i2m")) {
                const json& ij = mj["i2m"];
                sc.r_max = ij.value("r_max", 5);
                sc.mitigation_retries = ij.value("mitigation_retries", 3);
                if (ij.contains("t_d_ticks"))
                    for (const auto& [k, v] : ij["t_d_ticks"].items())
                        sc.t_d_ticks[k] = v.get<Tick>();
                if (ij.contains("checks")) {
                    sc.check_checksum = ij["checks"].value("checksum", true);
                    sc.check_range = ij["checks"].value("range", true);
                    sc.check_repeat = ij["checks"].value("repeat", true);
                }
                if (ij.contains("ranges"))
                    for (const auto& [sensor, fields] : ij["ranges"].items())
                        for (const auto& [field, bounds] : fields.items())
                            sc.ranges[sensor][field] = {bounds.at(0).get<std::int64_t>(),
                                                        bounds.at(1).get<std::int64_t>()};
            }
            if (mj.contains("eim")) {
                const json& ej = mj["eim"];
                sc.eim_paranoid = ej.value("paranoid_compare", false);
                sc.eim_continuous_hash = ej.value("continuous_hash", false);
                if (ej.contains("recheck_ticks"))
                    for (const auto& v : ej["recheck_ticks"]) sc.eim_recheck_ticks.push_back(v.get<Tick>());
            }
        }

        if (j.contains("attacks")) {
            for (const auto& aj : j["attacks"]) {
                harness::AttackSpec a;
                auto kind = harness::attack_kind_from(aj.at("kind").get<std::string>());
                if (!kind) throw ParseError("unknown attack kind " + aj.at("kind").dump());
                a.kind = *kind;
                a.at_tick = aj.at("at_tick").get<Tick>();
                a.recoverable = aj.value("recoverable", true);
                a.target = aj.value("target", std::string{});
                if (aj.contains("new_baud")) a.new_baud = aj["new_baud"].get<std::int64_t>();
                if (aj.contains("stuck_payload"))
                    a.stuck_payload = from_hex(aj["stuck_payload"].get<std::string>());
                if (aj.contains("address")) a.address = parse_address(aj["address"], "attack address");
                if (aj.contains("value"))
                    a.value = static_cast<std::uint32_t>(parse_address(aj["value"], "attack value"));
                if (aj.contains("byte_offset")) a.byte_offset = aj["byte_offset"].get<std::uint64_t>();
                if (aj.contains("byte_value")) a.byte_value = aj["byte_value"].get<std::uint8_t>();
                sc.attacks.push_back(a);
            }
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("scenario schema error: ") + e.what());
    }
    sc.validate();
    return sc;
}

Scenario Scenario::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open scenario " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json_string(buf.str());
}

void Scenario::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw SimError("cannot write scenario to " + path);
    out << to_json_string() << "\n";
}

}  // namespace cpsmon::sim
