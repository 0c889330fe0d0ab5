#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdmp/common.hpp"
#include "pdmp/constants.hpp"
#include "pdmp/kernel.hpp"
#include "pdmp/pdsde.hpp"

namespace pdmp::io {

using nlohmann::json;

// Shortest-round-trip decimal form; keeps text outputs replayable.
inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open output file: " + path.string());
    return out;
}

inline constexpr const char* kChainCsvSchema = "pdmp.chain.csv/1";
inline constexpr const char* kChainJsonlSchema = "pdmp.chain.jsonl/1";
inline constexpr const char* kPathCsvSchema = "pdmp.path.csv/1";
inline constexpr const char* kSdeCsvSchema = "pdmp.sde.csv/1";
inline constexpr const char* kReportSchema = "pdmp.report/1";

// chain ensembles: one row per post-jump state
inline void write_chains_csv(const std::filesystem::path& path, const std::vector<ChainPath>& chains) {
    auto out = open_out(path);
    out << "# schema=" << kChainCsvSchema << "\n";
    out << "chain,n,tau,i";
    const std::size_t dim = chains.empty() ? 1 : chains.front().states.front().y.size();
    for (std::size_t k = 0; k < dim; ++k) out << ",y" << k;
    out << "\n";
    for (std::size_t c = 0; c < chains.size(); ++c) {
        const ChainPath& p = chains[c];
        for (std::size_t n = 0; n < p.states.size(); ++n) {
            out << c << "," << n << "," << num(p.times[n]) << "," << p.states[n].regime;
            for (double v : p.states[n].y) out << "," << num(v);
            out << "\n";
        }
    }
}

inline void write_chains_jsonl(const std::filesystem::path& path, const std::vector<ChainPath>& chains) {
    auto out = open_out(path);
    out << json{{"schema", kChainJsonlSchema}}.dump() << "\n";
    for (std::size_t c = 0; c < chains.size(); ++c) {
        const ChainPath& p = chains[c];
        for (std::size_t n = 0; n < p.states.size(); ++n) {
            out << json{{"chain", c},
                        {"n", n},
                        {"tau", p.times[n]},
                        {"i", p.states[n].regime},
                        {"y", p.states[n].y}}
                       .dump()
                << "\n";
        }
    }
}

// continuous trajectory: grid rows interleaved with exact jump rows
inline void write_path_csv(const std::filesystem::path& path, const PdmpPath& traj) {
    auto out = open_out(path);
    out << "# schema=" << kPathCsvSchema << "\n";
    out << "kind,t,i,y0,theta,wait\n";
    std::size_t j = 0;
    for (std::size_t g = 0; g <= traj.grid.size(); ++g) {
        const double upto = g < traj.grid.size() ? traj.grid[g].t : 1e300;
        while (j < traj.jumps.size() && traj.jump_times[j] <= upto) {
            const JumpEvent& ev = traj.jumps[j];
            out << "jump," << num(traj.jump_times[j]) << "," << ev.post_jump.regime << ","
                << num(ev.post_jump.y[0]) << "," << num(ev.theta) << "," << num(ev.wait) << "\n";
            ++j;
        }
        if (g < traj.grid.size())
            out << "grid," << num(traj.grid[g].t) << "," << traj.grid[g].x.regime << ","
                << num(traj.grid[g].x.y[0]) << ",,\n";
    }
}

// jump-equation trajectory: adds the driving clock and time-change columns
inline void write_sde_csv(const std::filesystem::path& path, const PdsdeTrajectory& traj) {
    auto out = open_out(path);
    out << "# schema=" << kSdeCsvSchema << "\n";
    out << "kind,t,i,y0,theta,bar_tau,time_change\n";
    std::size_t j = 0;
    for (std::size_t g = 0; g <= traj.grid.size(); ++g) {
        const double upto = g < traj.grid.size() ? traj.grid[g].t : 1e300;
        while (j < traj.jumps.size() && traj.jumps[j].tau <= upto) {
            const PdsdeJump& ev = traj.jumps[j];
            out << "jump," << num(ev.tau) << "," << ev.regime_after << "," << num(ev.post[0]) << ","
                << num(ev.mark) << "," << num(ev.bar_tau) << "," << num(ev.time_change) << "\n";
            ++j;
        }
        if (g < traj.grid.size())
            out << "grid," << num(traj.grid[g].t) << "," << traj.grid[g].x.regime << ","
                << num(traj.grid[g].x.y[0]) << ",,,\n";
    }
}

inline json ledger_json(const ConstantsLedger& ledger) {
    return json{{"lambda_lo", ledger.lambda_lo},
                {"lambda_hi", ledger.lambda_hi},
                {"a", ledger.a},
                {"b", ledger.b},
                {"R", ledger.R},
                {"q", ledger.q},
                {"M_L", ledger.M_L},
                {"c_min", ledger.c_min},
                {"T", {ledger.T_lo, ledger.T_hi}},
                {"b4_delta", ledger.b4_delta},
                {"b5_l", ledger.b5_l},
                {"b5_nu", ledger.b5_nu},
                {"main_inequality_ok", ledger.main_inequality_ok},
                {"suprema_are_estimates", ledger.suprema_are_estimates},
                {"declared",
                 {{"L", ledger.declared.L},
                  {"alpha", ledger.declared.alpha},
                  {"L_q", ledger.declared.L_q},
                  {"L_lambda", ledger.declared.L_lambda},
                  {"L_pi", ledger.declared.L_pi},
                  {"L_p", ledger.declared.L_p},
                  {"delta_pi", ledger.declared.delta_pi},
                  {"delta_p", ledger.declared.delta_p},
                  {"y_star", ledger.declared.y_star}}}};
}

inline std::string hex64(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline void write_json(const std::filesystem::path& path, const json& j) {
    auto out = open_out(path);
    out << j.dump(2) << "\n";
}

}  // namespace pdmp::io
