#pragma once

// Shared runtime wiring handed to the monitor agents by the runner.

#include <functional>

#include "cpsmon/ec.hpp"
#include "cpsmon/logrec.hpp"
#include "cpsmon/monitor.hpp"
#include "cpsmon/plant.hpp"
#include "cpsmon/streams.hpp"

namespace cpsmon::sim {

struct MonitorContext {
    plant::Plant* plant = nullptr;
    streams::MonitoredStreams* streams = nullptr;
    ec::Timeline* timeline = nullptr;
    ec::Engine* engine = nullptr;
    const plant::StepOutput* const* current = nullptr;  // this tick's plant output
    std::function<void(mon::MonitorEvent)> emit;
    std::function<void(LogRecord)> log;

    // Records an EC occurrence (once per tick and action) and logs it.
    void happens(const std::string& source, const ec::ActionLabel& action, Tick t,
                 ec::OccurrenceContext occ_ctx = {}) const {
        if (!timeline->happens(action, t)) {
            timeline->record_happens(action, t, occ_ctx);
            LogRecord rec;
            rec.tick = t;
            rec.source = source;
            rec.kind = "event";
            rec.payload["action"] = action;
            for (const auto& [k, v] : occ_ctx) rec.payload["ctx_" + k] = v;
            log(rec);
        }
    }
};

}  // namespace cpsmon::sim
