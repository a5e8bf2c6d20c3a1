#pragma once

// Fluent and action vocabulary shared by the monitors, the pattern library,
// and the log verifier.

#include <string>
#include <vector>

#include "cpsmon/ec.hpp"
#include "cpsmon/ec_pattern.hpp"

namespace cpsmon::vocab {

// Fluents (per sensor unless noted otherwise).
inline constexpr const char* kSensorOkay = "sensor_okay";
inline constexpr const char* kBusConfigOkay = "bus_config_okay";
inline constexpr const char* kSensorReconfig = "sensor_reconfig";
inline constexpr const char* kHrimDataReady = "hrim_data_ready";
inline constexpr const char* kSensorIdle = "sensor_idle";
inline constexpr const char* kI2mParseDataSuccess = "i2m_parse_data_success";
inline constexpr const char* kI2mDataReady = "i2m_data_ready";
inline constexpr const char* kFirmwareOk = "firmware_ok";        // global
inline constexpr const char* kControlFlowOk = "control_flow_ok"; // global

// Actions (suffixed with ":<sensor>" where sensor-scoped).
inline constexpr const char* kReadSensorData = "read_sensor_data";
inline constexpr const char* kStoreSensorData = "store_sensor_data";
inline constexpr const char* kCrossBarEn = "cross_bar_en";
inline constexpr const char* kI2mSendInfoToDisconnect = "i2m_send_InfoToDisconnect";
inline constexpr const char* kBusMismatch = "bus_mismatch";
inline constexpr const char* kSensorReconnected = "sensor_reconnected";
inline constexpr const char* kI2mReadData = "i2m_read_data";
inline constexpr const char* kI2mParseData = "i2m_parse_data";
inline constexpr const char* kI2mParseFailure = "i2m_parse_failure";
inline constexpr const char* kStoreI2mData = "store_i2m_data";
inline constexpr const char* kCheckFirmwareOk = "check_firmware_ok";
inline constexpr const char* kFirmwareViolation = "firmware_violation";
inline constexpr const char* kCheckControlFlowOk = "check_control_flow_ok";
inline constexpr const char* kControlFlowViolation = "control_flow_violation";
inline constexpr const char* kExecuteProgram = "execute_program";
inline constexpr const char* kFailSafe = "fail_safe";

// Effect rules wiring the actions above to their fluents.
ec::RuleSet default_rules(const std::vector<std::string>& sensors);

// InitiallyP declarations: sensor_okay, bus_config_okay and sensor_idle per
// sensor, control_flow_ok globally.
void set_initial_fluents(ec::Timeline& timeline, const std::vector<std::string>& sensors);

// The monitor behaviour patterns, instantiated per sensor where applicable.
// t_d_ticks supplies each sensor's inactivity timeout.
std::vector<ec::Pattern> hrim_patterns(const std::string& sensor);
std::vector<ec::Pattern> i2m_patterns(const std::string& sensor, Tick t_d_ticks);
std::vector<ec::Pattern> eim_patterns();

}  // namespace cpsmon::vocab
