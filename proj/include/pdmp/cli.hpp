#pragma once

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "pdmp/config.hpp"
#include "pdmp/constants.hpp"
#include "pdmp/coupling.hpp"
#include "pdmp/io.hpp"
#include "pdmp/kernel.hpp"
#include "pdmp/metric.hpp"
#include "pdmp/model.hpp"
#include "pdmp/pdsde.hpp"
#include "pdmp/stats.hpp"

namespace pdmp::cli {

using io::json;

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<unsigned> threads;
};

struct Session {
    Config config;
    std::uint64_t seed = 0;
    std::filesystem::path out_dir;
    unsigned threads = 1;
    std::string model_name;
};

inline Session resolve_session(const Config& cfg, const Overrides& ov) {
    Session s;
    s.config = cfg;
    if (ov.seed) {
        s.seed = *ov.seed;
    } else {
        if (!cfg.has("run", "seed")) throw ConfigError("config needs [run] seed (or pass --seed)");
        const long v = cfg.integer("run", "seed");
        if (v < 0) throw ConfigError("[run] seed must be nonnegative");
        s.seed = static_cast<std::uint64_t>(v);
    }
    s.out_dir = ov.out ? *ov.out : cfg.get_or("run", "out", "out");
    if (ov.threads) {
        s.threads = *ov.threads;
    } else {
        const long t = cfg.integer_or("run", "threads", 0);
        if (t < 0) throw ConfigError("[run] threads must be >= 0");
        s.threads = t > 0 ? static_cast<unsigned>(t) : default_thread_count();
    }
    s.model_name = cfg.get_or("model", "name", "lm1d");
    return s;
}

// Declared regularity constants of the built-in models, consumed by the
// constants / couple / ergodicity commands.
inline std::optional<DeclaredConstants> builtin_declared(const std::string& name) {
    if (name == "lm1d" || name == "lm1d_field" || name == "lm1d_pdsde") return lm1d_declared();
    if (name == "const1d") {
        DeclaredConstants d = lm1d_declared();
        d.L_lambda = 0.0;  // constant rate
        return d;
    }
    return std::nullopt;
}

struct ModelBundle {
    ModelSpec model;  // the jump-chain model (induced one for jump equations)
    std::optional<PdsdeSpec> sde;
    std::optional<DeclaredConstants> declared;
};

inline void apply_numerics(const Config& cfg, NumericOptions& n) {
    n.ode_step = cfg.number_or("numerics", "ode_step", n.ode_step);
    n.quad_step = cfg.number_or("numerics", "quad_step", n.quad_step);
    n.hazard_tol = cfg.number_or("numerics", "hazard_tol", n.hazard_tol);
    n.invert_tol = cfg.number_or("numerics", "invert_tol", n.invert_tol);
    n.proj_tol = cfg.number_or("numerics", "proj_tol", n.proj_tol);
    n.tail_eps = cfg.number_or("numerics", "tail_eps", n.tail_eps);
    for (double v : {n.ode_step, n.quad_step, n.hazard_tol, n.invert_tol, n.proj_tol, n.tail_eps})
        if (!(v > 0.0)) throw ConfigError("[numerics] entries must be positive");
}

inline ModelBundle resolve_model(const Session& s) {
    ModelBundle bundle;
    std::map<std::string, double> sde_params;
    for (const char* key : {"alpha", "L_sigma"})
        if (s.config.has("model", key)) sde_params[key] = s.config.number("model", key);
    if (auto sde = make_builtin_pdsde(s.model_name, sde_params)) {
        apply_numerics(s.config, sde->numerics);
        bundle.sde = *sde;
        bundle.model = induced_model(*sde);
    } else {
        std::map<std::string, double> params;
        if (s.config.has("model", "rate")) params["rate"] = s.config.number("model", "rate");
        auto m = make_builtin(s.model_name, params);
        if (!m) throw ConfigError("unknown model: " + s.model_name);
        apply_numerics(s.config, m->numerics);
        bundle.model = *m;
    }
    bundle.model.require_valid();
    bundle.declared = builtin_declared(s.model_name);
    return bundle;
}

inline json report_head(const char* command, const Session& s) {
    return json{{"schema", io::kReportSchema},
                {"command", command},
                {"config_hash", io::hex64(s.config.hash())},
                {"seed", s.seed},
                {"model", s.model_name},
                {"ledger", nullptr}};
}

inline StatePoint parse_state(const std::vector<double>& nums, std::size_t off, int dim) {
    StatePoint x;
    x.y.assign(nums.begin() + off, nums.begin() + off + dim);
    x.regime = static_cast<int>(nums[off + dim]);
    return x;
}

// "y.. i y.. i ; y.. i y.. i ; ..." -> list of state pairs
inline std::vector<std::pair<StatePoint, StatePoint>> parse_pairs(const std::string& text, int dim) {
    std::vector<std::pair<StatePoint, StatePoint>> pairs;
    std::istringstream groups(text);
    std::string group;
    while (std::getline(groups, group, ';')) {
        std::istringstream in(group);
        std::vector<double> nums;
        double v;
        while (in >> v) nums.push_back(v);
        if (nums.empty()) continue;
        if (nums.size() != static_cast<std::size_t>(2 * dim + 2))
            throw ConfigError("pair entry needs " + std::to_string(2 * dim + 2) + " numbers: " + group);
        pairs.push_back({parse_state(nums, 0, dim), parse_state(nums, dim + 1, dim)});
    }
    if (pairs.empty()) throw ConfigError("empty pair list");
    return pairs;
}

inline ConstantsLedger require_ledger(const Session& s, const ModelBundle& bundle) {
    if (!bundle.declared)
        throw ConfigError("no declared constants available for model " + s.model_name);
    return build_ledger(bundle.model, *bundle.declared);
}

// --- simulate ----------------------------------------------------------------

inline int cmd_simulate(const Session& s) {
    const ModelBundle bundle = resolve_model(s);
    const std::string kind = s.config.get_or("simulate", "kind", "chain");
    json report = report_head("simulate", s);
    json outputs = json::array();

    if (kind == "chain") {
        const long steps = s.config.integer_or("simulate", "steps", 100);
        const long chains = s.config.integer_or("simulate", "chains", 1);
        if (steps < 0 || chains < 1) throw ConfigError("[simulate] steps/chains out of range");
        std::vector<double> y0 = s.config.has("simulate", "y0") ? s.config.numbers("simulate", "y0")
                                                                : std::vector<double>(bundle.model.dim, 0.0);
        if (static_cast<int>(y0.size()) != bundle.model.dim) throw ConfigError("[simulate] y0 has wrong dimension");
        const int i0 = static_cast<int>(s.config.integer_or("simulate", "i0", 1));
        const StatePoint x0{y0, i0};
        if (!bundle.model.in_domain(x0.y)) throw ModelError("initial point outside the state set");

        std::vector<ChainPath> paths(chains);
        parallel_for(chains, s.threads, [&](std::size_t c) {
            paths[c] = run_chain(bundle.model, x0, static_cast<int>(steps), SeedSpec{s.seed, c});
        });
        const std::string format = s.config.get_or("simulate", "format", "csv");
        if (format == "csv") {
            io::write_chains_csv(s.out_dir / "chains.csv", paths);
            outputs.push_back((s.out_dir / "chains.csv").string());
        } else if (format == "jsonl") {
            io::write_chains_jsonl(s.out_dir / "chains.jsonl", paths);
            outputs.push_back((s.out_dir / "chains.jsonl").string());
        } else {
            throw ConfigError("[simulate] format must be csv or jsonl");
        }
    } else if (kind == "path") {
        const double horizon = s.config.number("simulate", "horizon");
        const double grid = s.config.number_or("simulate", "grid", horizon / 200.0);
        const std::vector<double> y0 = s.config.has("simulate", "y0")
                                           ? s.config.numbers("simulate", "y0")
                                           : std::vector<double>(bundle.model.dim, 0.0);
        const int i0 = static_cast<int>(s.config.integer_or("simulate", "i0", 1));
        const PdmpPath path =
            run_pdmp_path(bundle.model, StatePoint{y0, i0}, horizon, grid, SeedSpec{s.seed, 0});
        io::write_path_csv(s.out_dir / "path.csv", path);
        outputs.push_back((s.out_dir / "path.csv").string());
        report["jumps"] = path.jumps.size();
    } else if (kind == "sde") {
        if (!bundle.sde) throw ConfigError("model " + s.model_name + " is not a jump equation");
        // falsify the declared dissipativity before integrating
        Rng rng(s.seed, 0x64697373ull, 0);
        std::vector<std::pair<Vec, Vec>> probe;
        for (int k = 0; k < 64; ++k)
            probe.push_back({bundle.sde->domain_sampler(rng), bundle.sde->domain_sampler(rng)});
        for (int i = 1; i <= bundle.sde->regime_count; ++i) {
            const DissipativityReport r = check_dissipativity(*bundle.sde, probe, i);
            if (!r.pass)
                throw ModelError("dissipativity declaration fails in regime " + std::to_string(i) +
                                 " at " + r.witness);
        }
        const double horizon = s.config.number("simulate", "horizon");
        const double grid = s.config.number_or("simulate", "grid", horizon / 200.0);
        const long max_jumps = s.config.integer_or("simulate", "max_jumps", 0);
        const std::vector<double> y0 = s.config.has("simulate", "y0")
                                           ? s.config.numbers("simulate", "y0")
                                           : std::vector<double>(bundle.model.dim, 0.0);
        const int i0 = static_cast<int>(s.config.integer_or("simulate", "i0", 1));
        const PdsdeTrajectory traj =
            solve_pdsde(*bundle.sde, y0, i0, horizon, grid, SeedSpec{s.seed, 0}, max_jumps);
        io::write_sde_csv(s.out_dir / "sde.csv", traj);
        outputs.push_back((s.out_dir / "sde.csv").string());
        report["jumps"] = traj.jumps.size();
    } else {
        throw ConfigError("[simulate] kind must be chain, path or sde");
    }

    report["outputs"] = outputs;
    io::write_json(s.out_dir / "simulate_report.json", report);
    return 0;
}

// --- validate ----------------------------------------------------------------

inline int cmd_validate(const Session& s) {
    const ModelBundle bundle = resolve_model(s);
    const long samples = s.config.integer_or("validate", "samples", 1000);
    const ValidationReport r = validate_model(bundle.model, static_cast<int>(samples), s.seed);

    json report = report_head("validate", s);
    json checks = json::array();
    for (const auto& e : r.entries)
        checks.push_back({{"check", e.check},
                          {"worst", e.worst},
                          {"tol", e.tol},
                          {"pass", e.pass},
                          {"witness", e.witness}});
    bool passed = r.passed;

    if (bundle.sde) {
        Rng rng(s.seed, 0x64697373ull, 0);
        std::vector<std::pair<Vec, Vec>> probe;
        for (int k = 0; k < 128; ++k)
            probe.push_back({bundle.sde->domain_sampler(rng), bundle.sde->domain_sampler(rng)});
        for (int i = 1; i <= bundle.sde->regime_count; ++i) {
            const DissipativityReport d = check_dissipativity(*bundle.sde, probe, i);
            checks.push_back({{"check", "dissipativity_regime_" + std::to_string(i)},
                              {"worst", d.worst_slack},
                              {"tol", 1e-9},
                              {"pass", d.pass},
                              {"witness", d.witness}});
            passed = passed && d.pass;
        }
        const MappedConstants mapped = map_constants(*bundle.sde);
        checks.push_back({{"check", "mapped_main_inequality"},
                          {"worst", (1.0 + bundle.sde->L_sigma) * bundle.sde->intensity_hi +
                                        bundle.sde->alpha - bundle.sde->intensity_lo},
                          {"tol", 0.0},
                          {"pass", mapped.main_inequality_ok},
                          {"witness", ""}});
    }

    report["checks"] = checks;
    report["passed"] = passed;
    io::write_json(s.out_dir / "validate.json", report);
    std::cerr << "validate: " << (passed ? "all checks passed" : "FAILURES reported") << "\n";
    return 0;
}

// --- constants ----------------------------------------------------------------

inline int cmd_constants(const Session& s) {
    const ModelBundle bundle = resolve_model(s);
    const ConstantsLedger ledger = require_ledger(s, bundle);

    json report = report_head("constants", s);
    report["ledger"] = io::ledger_json(ledger);

    // spot checks of the declared constants
    std::vector<std::pair<Vec, Vec>> pairs;
    if (s.config.has("constants", "spotcheck_pairs")) {
        for (const auto& [a, b] : parse_pairs(s.config.get("constants", "spotcheck_pairs"), bundle.model.dim))
            pairs.push_back({a.y, b.y});
    } else {
        Rng rng(s.seed, 0x73706F74ull, 0);
        for (int k = 0; k < 8; ++k)
            pairs.push_back({bundle.model.domain_sampler(rng), bundle.model.domain_sampler(rng)});
    }
    std::vector<double> times{0.0, 0.25, 0.5, 1.0, 2.0, 4.0};
    if (s.config.has("constants", "spotcheck_times")) times = s.config.numbers("constants", "spotcheck_times");

    const SpotcheckReport sr = spotcheck_conditions(bundle.model, *bundle.declared, pairs, times);
    json checks = json::array();
    for (const auto& e : sr.entries)
        checks.push_back({{"condition", e.condition},
                          {"worst_ratio", e.worst_ratio},
                          {"violation", e.violation},
                          {"pass", e.pass},
                          {"witness", e.witness}});
    report["spotchecks"] = checks;
    report["spotchecks_passed"] = sr.passed;

    if (bundle.sde) {
        const MappedConstants mapped = map_constants(*bundle.sde);
        report["mapped"] = {{"L", mapped.declared.L},
                            {"alpha", mapped.declared.alpha},
                            {"L_q", mapped.declared.L_q},
                            {"L_p", mapped.declared.L_p},
                            {"delta_p", mapped.declared.delta_p},
                            {"main_inequality_ok", mapped.main_inequality_ok}};
    }

    io::write_json(s.out_dir / "constants.json", report);
    std::cerr << "constants: ledger written (main inequality "
              << (ledger.main_inequality_ok ? "holds" : "FAILS") << ")\n";
    return 0;
}

// --- couple -------------------------------------------------------------------

inline int cmd_couple(const Session& s) {
    const ModelBundle bundle = resolve_model(s);
    const ConstantsLedger ledger = require_ledger(s, bundle);
    const CouplingFrame frame = CouplingFrame::from_ledger(ledger);

    const auto pairs = parse_pairs(s.config.get("couple", "pairs"), bundle.model.dim);
    const long samples = s.config.integer_or("couple", "samples", 10000);
    if (samples < 1) throw ConfigError("[couple] samples must be >= 1");

    const auto contraction =
        estimate_contraction(bundle.model, frame, pairs, static_cast<int>(samples), SeedSpec{s.seed, 1}, s.threads);
    const auto masses =
        estimate_b4_b5(bundle.model, frame, pairs, static_cast<int>(samples), SeedSpec{s.seed, 2}, s.threads);

    json report = report_head("couple", s);
    report["ledger"] = io::ledger_json(ledger);
    bool all_pass = true;

    auto out_csv = io::open_out(s.out_dir / "couple.csv");
    out_csv << "# schema=pdmp.couple.csv/1\n";
    out_csv << "check,pair,estimate,se,bound,pass\n";
    json rows = json::array();
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const auto& c = contraction[p];
        const auto& mm = masses[p];
        const auto pair_label = std::to_string(p);
        if (!c.skipped) all_pass = all_pass && c.pass;
        all_pass = all_pass && mm.b4_pass && mm.b5_pass;
        rows.push_back({{"pair", p},
                        {"contraction", {{"estimate", c.estimate}, {"se", c.se}, {"bound", c.bound}, {"pass", c.pass}, {"skipped", c.skipped}, {"note", c.note}}},
                        {"coupled_mass", {{"estimate", mm.coupled_mass}, {"se", mm.coupled_se}, {"bound", mm.b5_bound}, {"pass", mm.b5_pass}}},
                        {"close_mass", {{"estimate", mm.close_mass}, {"se", mm.close_se}, {"bound", mm.b4_bound}, {"pass", mm.b4_pass}}}});
        out_csv << "contraction," << pair_label << "," << io::num(c.estimate) << "," << io::num(c.se)
                << "," << io::num(c.bound) << "," << (c.skipped ? "skipped" : (c.pass ? "1" : "0")) << "\n";
        out_csv << "coupled_mass," << pair_label << "," << io::num(mm.coupled_mass) << ","
                << io::num(mm.coupled_se) << "," << io::num(mm.b5_bound) << "," << (mm.b5_pass ? "1" : "0") << "\n";
        out_csv << "close_mass," << pair_label << "," << io::num(mm.close_mass) << ","
                << io::num(mm.close_se) << "," << io::num(mm.b4_bound) << "," << (mm.b4_pass ? "1" : "0") << "\n";
    }

    if (s.config.has("couple", "sigma_pairs")) {
        const auto sigma_pairs = parse_pairs(s.config.get("couple", "sigma_pairs"), bundle.model.dim);
        const double zeta = s.config.number_or("couple", "zeta", 0.9);
        const long ssamples = s.config.integer_or("couple", "sigma_samples", 2000);
        const long cap = s.config.integer_or("couple", "sigma_cap", 10000);
        const auto sigma = estimate_sigma_moment(bundle.model, frame, sigma_pairs, zeta,
                                                 static_cast<int>(ssamples), SeedSpec{s.seed, 3},
                                                 static_cast<int>(cap), s.threads);
        json sig = json::array();
        for (std::size_t p = 0; p < sigma.size(); ++p) {
            sig.push_back({{"pair", p},
                           {"zeta", zeta},
                           {"estimate", sigma[p].estimate},
                           {"se", sigma[p].se},
                           {"truncation_mass", sigma[p].truncation_mass}});
            out_csv << "sigma_moment," << p << "," << io::num(sigma[p].estimate) << ","
                    << io::num(sigma[p].se) << ",," << "1" << "\n";
        }
        report["sigma_moments"] = sig;
    }

    report["pairs"] = rows;
    report["all_pass"] = all_pass;
    io::write_json(s.out_dir / "couple.json", report);
    std::cerr << "couple: " << (all_pass ? "all empirical bounds hold" : "BOUND FAILURES reported") << "\n";
    return 0;
}

// --- ergodicity -----------------------------------------------------------------

inline int cmd_ergodicity(const Session& s) {
    const ModelBundle bundle = resolve_model(s);
    const long chains = s.config.integer_or("ergodicity", "chains", 2000);
    const long steps = s.config.integer_or("ergodicity", "steps", 30);
    if (chains < 10 || steps < 2) throw ConfigError("[ergodicity] chains/steps out of range");
    const auto init_a_nums = s.config.numbers("ergodicity", "init_a");
    const auto init_b_nums = s.config.numbers("ergodicity", "init_b");
    if (init_a_nums.size() != static_cast<std::size_t>(bundle.model.dim + 1) ||
        init_b_nums.size() != static_cast<std::size_t>(bundle.model.dim + 1))
        throw ConfigError("[ergodicity] init_a / init_b need d coordinates plus a regime");
    const StatePoint init_a = parse_state(init_a_nums, 0, bundle.model.dim);
    const StatePoint init_b = parse_state(init_b_nums, 0, bundle.model.dim);

    double metric_c = s.config.number_or("ergodicity", "metric_c", 0.0);
    json ledger_snapshot = nullptr;
    if (metric_c <= 0.0) {
        const ConstantsLedger ledger = require_ledger(s, bundle);
        metric_c = ledger.c_min;
        ledger_snapshot = io::ledger_json(ledger);
    }
    const HybridMetric metric{metric_c};
    FmOptions fm_opts;
    fm_opts.support_cap = static_cast<std::size_t>(s.config.integer_or("ergodicity", "support_cap", 600));

    // ensembles: signal pair (A from init_a, B from init_b) and floor pair
    // (two independent ensembles from init_a)
    auto ensemble = [&](std::uint64_t block, const StatePoint& init) {
        std::vector<ChainPath> paths(chains);
        parallel_for(chains, s.threads, [&](std::size_t c) {
            paths[c] = run_chain(bundle.model, init, static_cast<int>(steps),
                                 SeedSpec{s.seed, block * static_cast<std::uint64_t>(chains) + c});
        });
        return paths;
    };
    std::cerr << "ergodicity: running 4 ensembles of " << chains << " chains x " << steps << " steps\n";
    const auto ens_a = ensemble(0, init_a);
    const auto ens_b = ensemble(1, init_b);
    const auto floor_a = ensemble(2, init_a);
    const auto floor_b = ensemble(3, init_a);

    std::vector<double> dist(steps + 1), floor(steps + 1);
    parallel_for(static_cast<std::size_t>(steps + 1), s.threads, [&](std::size_t n) {
        dist[n] = fm_distance(empirical_from_chains(ens_a, n), empirical_from_chains(ens_b, n), metric, fm_opts).value;
        floor[n] = fm_distance(empirical_from_chains(floor_a, n), empirical_from_chains(floor_b, n), metric, fm_opts).value;
    });

    // fit the log-distance over the contiguous pre-floor range from step 1
    std::vector<double> xs, ys;
    for (long n = 1; n <= steps; ++n) {
        if (!(dist[n] > 2.0 * floor[n])) break;
        xs.push_back(static_cast<double>(n));
        ys.push_back(std::log(dist[n]));
    }
    const bool separated = xs.size() >= 3;
    stats::LineFit fit;
    double decay_ratio = 1.0;
    if (separated) {
        fit = stats::fit_line(xs, ys);
        decay_ratio = dist[static_cast<std::size_t>(xs.back())] / dist[1];
    } else {
        std::cerr << "ergodicity: warning: ensembles too small to separate decay from the noise floor\n";
    }

    auto csv = io::open_out(s.out_dir / "ergodicity.csv");
    csv << "# schema=pdmp.ergodicity.csv/1\n";
    csv << "n,distance,floor\n";
    for (long n = 0; n <= steps; ++n)
        csv << n << "," << io::num(dist[n]) << "," << io::num(floor[n]) << "\n";

    json report = report_head("ergodicity", s);
    report["ledger"] = ledger_snapshot;
    report["metric_c"] = metric_c;
    report["support_cap"] = fm_opts.support_cap;
    report["distances"] = dist;
    report["floors"] = floor;
    report["prefloor_steps"] = xs.size();
    report["insufficient_separation"] = !separated;
    if (separated) {
        report["slope"] = fit.slope;
        report["beta_hat"] = std::exp(fit.slope);
        report["r_squared"] = fit.r_squared;
        report["decay_ratio"] = decay_ratio;
        std::cerr << "ergodicity: beta_hat=" << std::exp(fit.slope) << " r2=" << fit.r_squared
                  << " over " << xs.size() << " pre-floor steps\n";
    }
    io::write_json(s.out_dir / "ergodicity.json", report);
    return 0;
}

// --- dispatcher -----------------------------------------------------------------

inline int dispatch(const std::string& command, const std::string& config_path, const Overrides& ov) {
    try {
        const Config cfg = Config::parse_file(config_path);
        const Session session = resolve_session(cfg, ov);
        if (command == "simulate") return cmd_simulate(session);
        if (command == "couple") return cmd_couple(session);
        if (command == "constants") return cmd_constants(session);
        if (command == "ergodicity") return cmd_ergodicity(session);
        if (command == "validate") return cmd_validate(session);
        throw ConfigError("unknown command: " + command);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace pdmp::cli
