#include "cansim/cansim.h"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "core/prob.hpp"
#include "core/scenario.hpp"

struct cansim_scenario {
    cansim::ScenarioConfig cfg;
};

struct cansim_report {
    std::string csv;
    std::vector<std::pair<std::string, std::string>> rows;
};

namespace {

thread_local std::string g_last_error;

cansim_status fail(cansim_status s, const std::string& msg) {
    g_last_error = msg;
    return s;
}

// the run/load error strings already say which file broke; classify by text
cansim_status classify(const std::string& msg) {
    if (msg.find("cannot open") != std::string::npos ||
        msg.find("cannot write") != std::string::npos)
        return CANSIM_ERR_IO;
    return CANSIM_ERR_INVALID;
}

void split_rows(const std::string& csv,
                std::vector<std::pair<std::string, std::string>>* rows) {
    size_t pos = 0;
    bool header = true;
    while (pos < csv.size()) {
        size_t nl = csv.find('\n', pos);
        if (nl == std::string::npos) nl = csv.size();
        std::string line = csv.substr(pos, nl - pos);
        pos = nl + 1;
        if (header) {  // "key,value"
            header = false;
            continue;
        }
        size_t comma = line.find(',');
        if (comma == std::string::npos) continue;
        rows->emplace_back(line.substr(0, comma), line.substr(comma + 1));
    }
}

}  // namespace

extern "C" const char* cansim_version(void) { return CANSIM_VERSION_STRING; }

extern "C" const char* cansim_last_error(void) { return g_last_error.c_str(); }

extern "C" cansim_status cansim_scenario_load(const char* path, cansim_scenario** out) {
    if (!path || !out) return fail(CANSIM_ERR_INVALID, "null argument");
    *out = nullptr;
    std::error_code ec;
    if (!std::filesystem::exists(path, ec))
        return fail(CANSIM_ERR_IO, std::string("cannot open ") + path);
    std::string err;
    auto cfg = cansim::load_scenario(path, &err);
    if (!cfg) return fail(classify(err), err);
    *out = new cansim_scenario{std::move(*cfg)};
    return CANSIM_OK;
}

extern "C" cansim_status cansim_scenario_parse(const char* text, cansim_scenario** out) {
    if (!text || !out) return fail(CANSIM_ERR_INVALID, "null argument");
    *out = nullptr;
    std::string err;
    auto cfg = cansim::parse_scenario(text, &err);
    if (!cfg) return fail(CANSIM_ERR_INVALID, err);
    *out = new cansim_scenario{std::move(*cfg)};
    return CANSIM_OK;
}

extern "C" void cansim_scenario_free(cansim_scenario* scn) { delete scn; }

extern "C" cansim_status cansim_scenario_set_seed(cansim_scenario* scn, uint64_t seed) {
    if (!scn) return fail(CANSIM_ERR_INVALID, "null scenario");
    scn->cfg.seed = seed;
    return CANSIM_OK;
}

extern "C" cansim_status cansim_scenario_run(const cansim_scenario* scn, const char* out_dir,
                                             cansim_report** out) {
    if (!scn || !out_dir || !out) return fail(CANSIM_ERR_INVALID, "null argument");
    *out = nullptr;
    std::string err;
    auto r = cansim::run_scenario(scn->cfg, out_dir, &err);
    if (!r) {
        cansim_status s = classify(err);
        return fail(s == CANSIM_ERR_INVALID ? CANSIM_ERR_RUN : s, err);
    }
    auto* rep = new cansim_report;
    rep->csv = cansim::format_report_csv(scn->cfg, *r);
    split_rows(rep->csv, &rep->rows);
    *out = rep;
    return CANSIM_OK;
}

extern "C" void cansim_report_free(cansim_report* rep) { delete rep; }

extern "C" const char* cansim_report_value(const cansim_report* rep, const char* key) {
    if (!rep || !key) return nullptr;
    for (const auto& [k, v] : rep->rows)
        if (k == key) return v.c_str();
    return nullptr;
}

extern "C" const char* cansim_report_csv(const cansim_report* rep) {
    return rep ? rep->csv.c_str() : nullptr;
}

extern "C" cansim_status cansim_sweep(const char* scenario, const double* grid, size_t n,
                                      uint64_t trials, uint64_t seed, const char* csv_path,
                                      const char* gnuplot_path) {
    if (!scenario || !csv_path) return fail(CANSIM_ERR_INVALID, "null argument");
    if (trials == 0) return fail(CANSIM_ERR_INVALID, "trials must be positive");

    std::vector<double> ps;
    if (grid && n > 0) {
        for (size_t i = 0; i < n; ++i) {
            if (!(grid[i] >= 0.0 && grid[i] <= 1.0))
                return fail(CANSIM_ERR_INVALID, "grid values must lie in [0,1]");
            ps.push_back(grid[i]);
        }
    } else {
        ps = cansim::default_grid();
    }

    static const char* kNames[] = {"run-of-11", "flag-interruption", "passive-in-data",
                                   "end-to-end-stealthy"};
    std::vector<std::string> wanted;
    if (std::string(scenario) == "all") {
        wanted.assign(kNames, kNames + 4);
    } else {
        bool known = false;
        for (const char* k : kNames) known = known || std::string(scenario) == k;
        if (!known) return fail(CANSIM_ERR_INVALID, std::string("unknown scenario ") + scenario);
        wanted.push_back(scenario);
    }

    std::vector<cansim::SweepResult> rows;
    for (const std::string& name : wanted) {
        auto part = cansim::monte_carlo(name, ps, trials, seed);
        rows.insert(rows.end(), part.begin(), part.end());
    }
    if (!cansim::write_sweep_csv(csv_path, rows))
        return fail(CANSIM_ERR_IO, std::string("cannot write ") + csv_path);
    if (gnuplot_path && !cansim::write_sweep_gnuplot(gnuplot_path, rows))
        return fail(CANSIM_ERR_IO, std::string("cannot write ") + gnuplot_path);
    return CANSIM_OK;
}

extern "C" cansim_status cansim_blindsync_demo(double utilization, uint64_t trials,
                                               uint64_t seed, cansim_blindsync_stats* out) {
    if (!out) return fail(CANSIM_ERR_INVALID, "null output");
    if (!(utilization >= 0.0 && utilization < 1.0))
        return fail(CANSIM_ERR_INVALID, "utilization must lie in [0,1)");
    if (trials == 0) return fail(CANSIM_ERR_INVALID, "trials must be positive");
    cansim::BlindSyncDemoResult r = cansim::blindsync_demo(utilization, trials, seed);
    out->utilization = r.utilization;
    out->trials = r.trials;
    out->synced_rate = r.synced_rate;
    out->unsynced_rate = r.unsynced_rate;
    out->idle_fraction = r.idle_fraction;
    return CANSIM_OK;
}

extern "C" cansim_status cansim_train_baseline(const cansim_scenario* scn,
                                               const char* baseline_path) {
    if (!scn || !baseline_path) return fail(CANSIM_ERR_INVALID, "null argument");
    std::string err;
    if (!cansim::train_scenario_baseline(scn->cfg, baseline_path, &err))
        return fail(classify(err), err);
    return CANSIM_OK;
}
