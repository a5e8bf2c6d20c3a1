// Scenario runner and forensic tooling for the monitored flight-control
// simulator. Exit codes: 0 safe run, 1 configuration error, 2 detection
// occurred (run) / divergences found (verify).

#include <cstdio>
#include <cstdlib>
#include <string>

#include "CLI11.hpp"

#include "cpsmon/harness.hpp"
#include "cpsmon/logrec.hpp"
#include "cpsmon/runner.hpp"
#include "cpsmon/scenario.hpp"
#include "cpsmon/verifier.hpp"

namespace {

std::string default_log_path(const std::string& scenario_path) {
    std::string base = scenario_path;
    auto slash = base.find_last_of('/');
    if (slash != std::string::npos) base = base.substr(slash + 1);
    auto dot = base.find_last_of('.');
    if (dot != std::string::npos) base = base.substr(0, dot);
    const char* dir = std::getenv("CPSMON_LOG_DIR");
    std::string prefix = dir && *dir ? std::string(dir) + "/" : std::string("./");
    return prefix + base + ".log.jsonl";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cpsmon - multilevel runtime monitor simulator"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::string out_path;
    std::uint64_t seed = 0;
    cpsmon::Tick ticks = 0;
    auto* run_cmd = app.add_subcommand("run", "execute a scenario and write the forensic log");
    run_cmd->add_option("scenario", scenario_path, "scenario file (JSON)")->required();
    run_cmd->add_option("--out", out_path, "log output path (default: $CPSMON_LOG_DIR/<name>.log.jsonl)");
    run_cmd->add_option("--seed", seed, "override the scenario seed");
    run_cmd->add_option("--ticks", ticks, "override the scenario horizon");

    std::string log_path;
    auto* verify_cmd = app.add_subcommand("verify", "replay a log and report divergences");
    verify_cmd->add_option("log", log_path, "log file (JSON lines)")->required();

    auto* list_cmd = app.add_subcommand("list-attacks", "list attack kinds, layers and monitors");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) {
            std::string out = out_path.empty() ? default_log_path(scenario_path) : out_path;
            auto result = cpsmon::sim::run_scenario_file(scenario_path, out, seed, ticks);
            std::printf("log: %s\n", out.c_str());
            if (result.exit_code == 0) {
                std::printf("safety property held for the whole run\n");
            } else {
                std::printf("detections on %lld ticks:\n",
                            static_cast<long long>(result.rejected_ticks));
                for (const auto& [monitor, tick] : result.first_rejected)
                    std::printf("  %s first rejected at tick %lld\n", monitor.c_str(),
                                static_cast<long long>(tick));
            }
            return result.exit_code;
        }
        if (verify_cmd->parsed()) {
            auto report = cpsmon::sim::verify_log_file(log_path);
            std::printf("%s\n", report.summary().c_str());
            for (const auto& d : report.divergences)
                std::printf("  tick %lld %s: expected %s, found %s\n",
                            static_cast<long long>(d.tick), d.what.c_str(), d.expected.c_str(),
                            d.found.c_str());
            return report.divergences.empty() ? 0 : 2;
        }
        if (list_cmd->parsed()) {
            std::printf("%-17s %-12s %-8s %s\n", "kind", "layer", "monitor", "parameters");
            for (const auto& row : cpsmon::harness::attack_table())
                std::printf("%-17s %-12s %-8s %s\n",
                            cpsmon::harness::attack_kind_name(row.kind).c_str(), row.layer.c_str(),
                            row.monitor.c_str(), row.params.c_str());
            return 0;
        }
    } catch (const cpsmon::CorruptLog& e) {
        std::fprintf(stderr, "corrupt log: %s\n", e.what());
        return 1;
    } catch (const cpsmon::SimError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
