// cansim: scenario runner, probability sweeps, and demo tables for the
// CAN attack/defense simulator. Talks to the library strictly through
// the C interface; exit codes reflect tool health only, never attack
// verdicts (those live in the artifacts).

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <system_error>
#include <vector>

#include "CLI11.hpp"
#include "cansim/cansim.h"

namespace {

int status_to_exit(cansim_status s) { return static_cast<int>(s); }

bool ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) std::fprintf(stderr, "cansim: cannot create %s\n", dir.c_str());
    return !ec;
}

int complain(cansim_status s) {
    std::fprintf(stderr, "cansim: %s\n", cansim_last_error());
    return status_to_exit(s);
}

std::string join(const std::string& dir, const char* name) { return dir + "/" + name; }

int cmd_run(const std::string& config, const std::string& out_dir, bool has_seed,
            uint64_t seed) {
    cansim_scenario* scn = nullptr;
    cansim_status s = cansim_scenario_load(config.c_str(), &scn);
    if (s != CANSIM_OK) return complain(s);
    if (has_seed) cansim_scenario_set_seed(scn, seed);

    cansim_report* rep = nullptr;
    s = cansim_scenario_run(scn, out_dir.c_str(), &rep);
    if (s != CANSIM_OK) {
        cansim_scenario_free(scn);
        return complain(s);
    }
    for (const char* key : {"strategy", "seed", "victim_bus_off", "completed_error_frames",
                            "ids_alerts", "attacker_failed"}) {
        const char* v = cansim_report_value(rep, key);
        if (v) std::printf("%s=%s\n", key, v);
    }
    std::printf("artifacts: %s\n", out_dir.c_str());
    cansim_report_free(rep);
    cansim_scenario_free(scn);
    return 0;
}

int cmd_sweep(const std::string& scenario, const std::vector<double>& ps, uint64_t trials,
              uint64_t seed, const std::string& out_dir) {
    if (!ensure_dir(out_dir)) return status_to_exit(CANSIM_ERR_IO);
    std::string csv = join(out_dir, "sweep.csv");
    std::string dat = join(out_dir, "sweep.dat");
    cansim_status s =
        cansim_sweep(scenario.c_str(), ps.empty() ? nullptr : ps.data(), ps.size(), trials,
                     seed, csv.c_str(), dat.c_str());
    if (s != CANSIM_OK) return complain(s);
    std::printf("wrote %s and %s\n", csv.c_str(), dat.c_str());
    return 0;
}

int cmd_blindsync(double utilization, uint64_t trials, uint64_t seed,
                  const std::string& out_dir) {
    cansim_blindsync_stats st;
    cansim_status s = cansim_blindsync_demo(utilization, trials, seed, &st);
    if (s != CANSIM_OK) return complain(s);

    char table[256];
    std::snprintf(table, sizeof table,
                  "utilization,trials,synced_rate,unsynced_rate,idle_fraction\n"
                  "%.4f,%llu,%.6f,%.6f,%.6f\n",
                  st.utilization, (unsigned long long)st.trials, st.synced_rate,
                  st.unsynced_rate, st.idle_fraction);
    std::fputs(table, stdout);

    if (!out_dir.empty()) {
        if (!ensure_dir(out_dir)) return status_to_exit(CANSIM_ERR_IO);
        std::string path = join(out_dir, "blindsync.csv");
        FILE* f = std::fopen(path.c_str(), "w");
        if (!f) {
            std::fprintf(stderr, "cansim: cannot write %s\n", path.c_str());
            return status_to_exit(CANSIM_ERR_IO);
        }
        std::fputs(table, f);
        std::fclose(f);
    }
    return 0;
}

int cmd_baseline(const std::string& config, const std::string& out_dir, bool has_seed,
                 uint64_t seed) {
    cansim_scenario* scn = nullptr;
    cansim_status s = cansim_scenario_load(config.c_str(), &scn);
    if (s != CANSIM_OK) return complain(s);
    if (has_seed) cansim_scenario_set_seed(scn, seed);

    if (!ensure_dir(out_dir)) {
        cansim_scenario_free(scn);
        return status_to_exit(CANSIM_ERR_IO);
    }
    std::string path = join(out_dir, "baseline.txt");
    s = cansim_train_baseline(scn, path.c_str());
    cansim_scenario_free(scn);
    if (s != CANSIM_OK) return complain(s);
    std::printf("wrote %s\n", path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bit-level CAN bus attack/defense simulator"};
    app.require_subcommand(1);
    app.set_version_flag("--version", cansim_version());

    std::string config;
    std::string out_dir = "out";
    uint64_t seed = 0;
    uint64_t trials = 1000;
    double p = -1.0;
    double utilization = 0.70;
    std::string scenario = "all";

    auto* run = app.add_subcommand("run", "run one scenario config to its horizon");
    run->add_option("--config", config, "scenario file")->required();
    run->add_option("--out-dir", out_dir, "artifact directory");
    auto* run_seed = run->add_option("--seed", seed, "override the config seed");

    auto* sweep = app.add_subcommand("sweep", "Monte Carlo vs analytic probability table");
    sweep->add_option("scenario", scenario,
                      "run-of-11 | flag-interruption | passive-in-data | "
                      "end-to-end-stealthy | all");
    sweep->add_option("--p", p, "single grid point instead of 0.0..1.0");
    sweep->add_option("--trials", trials, "trials per grid point");
    auto* sweep_seed = sweep->add_option("--seed", seed, "RNG seed");
    sweep->add_option("--out-dir", out_dir, "artifact directory");

    auto* blind = app.add_subcommand("blindsync-demo",
                                     "blind injection delivery rates, synced vs unsynced");
    blind->add_option("utilization", utilization, "bus utilization in [0,1)");
    blind->add_option("--trials", trials, "attack start phases to sample");
    auto* blind_seed = blind->add_option("--seed", seed, "RNG seed");
    blind->add_option("--out-dir", out_dir, "artifact directory");

    auto* base = app.add_subcommand("baseline",
                                    "train the monitor's aggregate baseline from a clean "
                                    "replay of the configured traffic");
    base->add_option("--config", config, "scenario file")->required();
    base->add_option("--out-dir", out_dir, "artifact directory");
    auto* base_seed = base->add_option("--seed", seed, "override the config seed");

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return cmd_run(config, out_dir, run_seed->count() > 0, seed);
    if (sweep->parsed()) {
        std::vector<double> ps;
        if (p >= 0.0) ps.push_back(p);
        return cmd_sweep(scenario, ps, trials, sweep_seed->count() ? seed : 1, out_dir);
    }
    if (blind->parsed())
        return cmd_blindsync(utilization, trials, blind_seed->count() ? seed : 1, out_dir);
    if (base->parsed()) return cmd_baseline(config, out_dir, base_seed->count() > 0, seed);
    return 0;
}
