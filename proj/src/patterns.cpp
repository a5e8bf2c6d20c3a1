#include "cpsmon/vocab.hpp"

namespace cpsmon::vocab {

using namespace cpsmon::ec;

namespace {

// Monitors stage read/parse/store across adjacent ticks; patterns allow this
// much slack before a missing follow-up event counts as a violation.
constexpr Tick kPipelineDeadline = 16;

Guard outcome_is(std::string expected) {
    return [expected = std::move(expected)](const OccurrenceContext& ctx) {
        auto it = ctx.find("outcome");
        return it != ctx.end() && it->second == expected;
    };
}

}  // namespace

ec::RuleSet default_rules(const std::vector<std::string>& sensors) {
    RuleSet rules;
    for (const auto& s : sensors) {
        rules.add(RuleKind::Initiates, act(kStoreSensorData, s), fluent(kHrimDataReady, s));
        rules.add(RuleKind::Terminates, act(kI2mReadData, s), fluent(kHrimDataReady, s));
        rules.add(RuleKind::Terminates, act(kBusMismatch, s), fluent(kBusConfigOkay, s));
        rules.add(RuleKind::Terminates, act(kBusMismatch, s), fluent(kSensorOkay, s));
        rules.add(RuleKind::Terminates, act(kBusMismatch, s), fluent(kHrimDataReady, s));
        rules.add(RuleKind::Initiates, act(kCrossBarEn, s), fluent(kSensorReconfig, s));
        rules.add(RuleKind::Terminates, act(kCrossBarEn, s), fluent(kSensorOkay, s));
        rules.add(RuleKind::Terminates, act(kCrossBarEn, s), fluent(kHrimDataReady, s));
        rules.add(RuleKind::Terminates, act(kCrossBarEn, s), fluent(kI2mDataReady, s));
        rules.add(RuleKind::Terminates, act(kI2mReadData, s), fluent(kSensorIdle, s));
        rules.add(RuleKind::Initiates, act(kI2mParseData, s), fluent(kI2mParseDataSuccess, s),
                  outcome_is("pass"));
        rules.add(RuleKind::Terminates, act(kI2mParseFailure, s), fluent(kI2mParseDataSuccess, s));
        rules.add(RuleKind::Terminates, act(kI2mParseFailure, s), fluent(kI2mDataReady, s));
        rules.add(RuleKind::Initiates, act(kStoreI2mData, s), fluent(kI2mDataReady, s));
        rules.add(RuleKind::Initiates, act(kSensorReconnected, s), fluent(kSensorOkay, s));
        rules.add(RuleKind::Initiates, act(kSensorReconnected, s), fluent(kBusConfigOkay, s));
        rules.add(RuleKind::Terminates, act(kSensorReconnected, s), fluent(kSensorReconfig, s));
    }
    rules.add(RuleKind::Initiates, kExecuteProgram, fluent(kFirmwareOk));
    rules.add(RuleKind::Initiates, kCheckFirmwareOk, fluent(kFirmwareOk), outcome_is("pass"));
    rules.add(RuleKind::Terminates, kFirmwareViolation, fluent(kFirmwareOk));
    rules.add(RuleKind::Initiates, kCheckControlFlowOk, fluent(kControlFlowOk), outcome_is("ok"));
    rules.add(RuleKind::Terminates, kControlFlowViolation, fluent(kControlFlowOk));
    return rules;
}

void set_initial_fluents(ec::Timeline& timeline, const std::vector<std::string>& sensors) {
    for (const auto& s : sensors) {
        timeline.set_initially(fluent(kSensorOkay, s));
        timeline.set_initially(fluent(kBusConfigOkay, s));
        timeline.set_initially(fluent(kSensorIdle, s));
    }
    timeline.set_initially(fluent(kControlFlowOk));
}

std::vector<ec::Pattern> hrim_patterns(const std::string& s) {
    std::vector<Pattern> out;
    out.push_back(Pattern::statics("hrim-1:" + s, {initially_p(fluent(kSensorOkay, s))}));
    // An unclipped bus never leaves the sensor silently dead: it is either
    // healthy or under reconfiguration (an inactivity disconnect clips no bus
    // fluent).
    out.push_back(Pattern::tick_universal(
        "hrim-2:" + s, {not_clipped_since(fluent(kBusConfigOkay, s), 0)},
        {any_of({{holds_at(fluent(kSensorOkay, s), 0)}, {holds_at(fluent(kSensorReconfig, s), 0)}})}));
    out.push_back(Pattern::triggered(
        "hrim-3:" + s, {happens(act(kReadSensorData, s), 0)},
        {holds_at(fluent(kSensorOkay, s), 0), happens(act(kStoreSensorData, s), 1),
         rule_exists(RuleKind::Initiates, act(kStoreSensorData, s), fluent(kHrimDataReady, s))},
        {{0, 1}}, kPipelineDeadline));
    out.push_back(Pattern::triggered(
        "hrim-4:" + s, {happens(act(kCrossBarEn, s), 0)},
        {not_holds_at(fluent(kSensorOkay, s), 0), happens_at(act(kI2mSendInfoToDisconnect, s), 0, 0),
         rule_exists(RuleKind::Initiates, act(kCrossBarEn, s), fluent(kSensorReconfig, s))},
        {}, std::nullopt));
    return out;
}

std::vector<ec::Pattern> i2m_patterns(const std::string& s, Tick t_d_ticks) {
    std::vector<Pattern> out;
    out.push_back(Pattern::statics("i2m-1:" + s, {initially_p(fluent(kSensorIdle, s))}));
    out.push_back(Pattern::statics(
        "i2m-2:" + s,
        {rule_exists(RuleKind::Terminates, act(kI2mReadData, s), fluent(kSensorIdle, s))}));
    out.push_back(Pattern::triggered(
        "i2m-3:" + s, {happens(act(kStoreSensorData, s), 0)},
        {holds_at(fluent(kHrimDataReady, s), 0), happens(act(kI2mReadData, s), 1),
         happens(act(kI2mParseData, s), 2)},
        {{0, 1}, {1, 2}}, kPipelineDeadline));
    out.push_back(Pattern::triggered(
        "i2m-4:" + s, {happens(act(kI2mParseData, s), 0)},
        {any_of({{not_holds_at(fluent(kI2mParseDataSuccess, s), 0)},
                 {happens_at(act(kStoreI2mData, s), 0, 0)}})},
        {}, std::nullopt));
    out.push_back(Pattern::statics(
        "i2m-5:" + s,
        {rule_exists(RuleKind::Initiates, act(kStoreI2mData, s), fluent(kI2mDataReady, s))}));
    // Disconnect fires for a failed parse, a sensor HRIM already flagged, or
    // hrim_data_ready silent for t_d while the sensor still looked healthy.
    out.push_back(Pattern::triggered(
        "i2m-6:" + s, {happens(act(kI2mSendInfoToDisconnect, s), 0)},
        {happens_at(act(kCrossBarEn, s), 0, 0),
         any_of({{not_holds_at(fluent(kI2mParseDataSuccess, s), 0)},
                 {not_holds_at(fluent(kSensorOkay, s), 0)},
                 {holds_at(fluent(kSensorOkay, s), 0, -1),
                  absent_throughout(fluent(kHrimDataReady, s), 0, -1, t_d_ticks)}})},
        {}, std::nullopt));
    return out;
}

std::vector<ec::Pattern> eim_patterns() {
    std::vector<Pattern> out;
    out.push_back(Pattern::triggered("eim-1", {happens(kCheckFirmwareOk, 0)},
                                     {holds_at(fluent(kFirmwareOk), 0)}, {}, std::nullopt));
    out.push_back(Pattern::statics(
        "eim-2", {rule_exists(RuleKind::Initiates, kExecuteProgram, fluent(kFirmwareOk))}));
    out.push_back(Pattern::triggered("eim-3", {happens(kCheckControlFlowOk, 0)},
                                     {holds_at(fluent(kControlFlowOk), 0)}, {}, std::nullopt));
    out.push_back(Pattern::triggered(
        "eim-4", {happens(kFailSafe, 0)},
        {any_of({{not_holds_at(fluent(kFirmwareOk), 0)}, {not_holds_at(fluent(kControlFlowOk), 0)}})},
        {}, std::nullopt));
    return out;
}

}  // namespace cpsmon::vocab
