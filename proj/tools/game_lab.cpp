// game_lab: experiment runner for the delayed inter-bank lending game.
//
// Usage:
//   game_lab <command> [flags]
//
// Commands:
//   validate   check a parameter file against the model constraints
//   riccati    solve the no-delay Riccati benchmark, emit "t,phi,gain"
//   kernels    solve the delayed kernel system, emit "t,E0,E1_at_0,liquidity"
//              plus a binary kernel dump for reuse
//   simulate   run closed-loop / no-delay / zero-control Monte Carlo paths,
//              emit the one-row run summary
//   systemic   closed-form vs Monte Carlo systemic-default probability
//   liquidity  lending-rate curves across a delay sweep ("tau,t,liquidity,summary")
//   fabsde     solve the open-loop forward-backward system (Picard), emit
//              residual history and per-time summary
//   nashgap    one-player deviation experiment against the equilibrium law
//
// Flags: --params FILE, --output DIR, --seed U64, --dt X, --n-paths L,
//        --threads I (env GAME_LAB_THREADS as fallback), --deterministic [0|1],
//        --tau-sweep a,b,c, --D X, --format csv|json, --set key=value (repeatable).
//
// Every run writes run_metadata.json into the output directory: the echoed
// effective configuration, the post-adjustment dt actually used, seed, wall
// time, and an FNV-1a checksum per artifact. Exit codes: 0 success,
// 1 validation error, 2 numerical failure, 3 I/O failure.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "gamelab/config_file.hpp"
#include "gamelab/csv.hpp"
#include "gamelab/errors.hpp"
#include "gamelab/fabsde.hpp"
#include "gamelab/kernels.hpp"
#include "gamelab/nashgap.hpp"
#include "gamelab/params.hpp"
#include "gamelab/riccati.hpp"
#include "gamelab/simulate.hpp"
#include "gamelab/study.hpp"
#include "gamelab/util.hpp"

namespace {

using namespace gamelab;

struct CliOptions {
    std::string command;
    std::string params_file;
    std::string output_dir = ".";
    std::uint64_t seed = 12345;
    bool seed_given = false;
    double dt = 0.0;  // 0 = use config / command default
    long n_paths = 0;
    int threads = 0;
    bool deterministic = true;
    std::string tau_sweep;
    double level = 0.0;
    bool level_given = false;
    std::string format = "csv";
    std::vector<std::string> overrides;
};

[[noreturn]] void usage_error(const std::string& msg) {
    std::cerr << "error: " << msg << "\n"
              << "usage: game_lab <validate|riccati|kernels|simulate|systemic|liquidity|fabsde|nashgap> "
                 "[--params FILE] [--output DIR] [--seed U64] [--dt X] [--n-paths L] [--threads I] "
                 "[--deterministic [0|1]] [--tau-sweep a,b,c] [--D X] [--format csv|json] [--set key=value]\n";
    std::exit(1);
}

bool parse_bool_token(const std::string& s, bool& out) {
    if (s == "0" || s == "false" || s == "off") { out = false; return true; }
    if (s == "1" || s == "true" || s == "on") { out = true; return true; }
    return false;
}

CliOptions parse_cli(int argc, char** argv) {
    CliOptions o;
    if (argc < 2) usage_error("missing command");
    o.command = argv[1];
    int i = 2;
    auto need_value = [&](const std::string& flag) -> std::string {
        if (i + 1 >= argc) usage_error(flag + " requires a value");
        return argv[++i];
    };
    auto numeric = [](const std::string& flag, const std::string& s, auto convert) {
        try {
            std::size_t pos = 0;
            auto v = convert(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            usage_error(flag + " got a malformed value: " + s);
        }
    };
    for (; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--params") o.params_file = need_value(a);
        else if (a == "--output") o.output_dir = need_value(a);
        else if (a == "--seed") {
            o.seed = numeric(a, need_value(a), [](const std::string& s, std::size_t* p) { return std::stoull(s, p); });
            o.seed_given = true;
        } else if (a == "--dt")
            o.dt = numeric(a, need_value(a), [](const std::string& s, std::size_t* p) { return std::stod(s, p); });
        else if (a == "--n-paths")
            o.n_paths = numeric(a, need_value(a), [](const std::string& s, std::size_t* p) { return std::stol(s, p); });
        else if (a == "--threads")
            o.threads = numeric(a, need_value(a), [](const std::string& s, std::size_t* p) { return std::stoi(s, p); });
        else if (a == "--tau-sweep")
            o.tau_sweep = need_value(a);
        else if (a == "--D") {
            o.level = numeric(a, need_value(a), [](const std::string& s, std::size_t* p) { return std::stod(s, p); });
            o.level_given = true;
        } else if (a == "--format")
            o.format = need_value(a);
        else if (a == "--set")
            o.overrides.push_back(need_value(a));
        else if (a == "--deterministic") {
            bool v = true;
            if (i + 1 < argc && parse_bool_token(argv[i + 1], v)) ++i;
            o.deterministic = v;
        } else {
            usage_error("unknown flag: " + a);
        }
    }
    if (o.format != "csv" && o.format != "json") usage_error("--format must be csv or json");
    return o;
}

std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 8);
    for (char ch : s) {
        switch (ch) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default: out += ch;
        }
    }
    return out;
}

struct RunContext {
    CliOptions opt;
    ConfigMap cfg;
    double dt_requested = 0.0;
    double dt_adjusted = 0.0;
    std::vector<std::pair<std::string, std::string>> artifacts;  // file name -> content checksum
    std::vector<std::string> notes;

    // Writes one artifact in the selected format and records its checksum.
    void emit(const std::string& stem, const Table& table) {
        const bool json = opt.format == "json";
        const std::string name = stem + (json ? ".json" : ".csv");
        const std::string content = json ? table.to_json() : table.to_csv();
        const auto path = std::filesystem::path(opt.output_dir) / name;
        write_text_file(path.string(), content);
        artifacts.emplace_back(name, hex64(fnv1a64(content)));
    }

    void record_file(const std::string& name, const std::string& content) {
        artifacts.emplace_back(name, hex64(fnv1a64(content)));
    }
};

long default_paths(const RunContext& ctx, long fallback) {
    if (ctx.opt.n_paths > 0) return ctx.opt.n_paths;
    if (ctx.cfg.has("n_paths")) return parse_int(ctx.cfg.get("n_paths"), "n_paths");
    return fallback;
}

double default_dt(const RunContext& ctx, double fallback) {
    if (ctx.opt.dt > 0.0) return ctx.opt.dt;
    if (ctx.cfg.has("dt")) return parse_double(ctx.cfg.get("dt"), "dt");
    return fallback;
}

std::uint64_t default_seed(const RunContext& ctx) {
    if (ctx.opt.seed_given) return ctx.opt.seed;
    if (ctx.cfg.has("seed")) return static_cast<std::uint64_t>(parse_int(ctx.cfg.get("seed"), "seed"));
    return ctx.opt.seed;
}

int resolve_threads(const CliOptions& o) {
    if (o.threads > 0) return o.threads;
    if (const char* env = std::getenv("GAME_LAB_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    return 0;  // auto
}

void cmd_validate(RunContext& ctx, const GameParams& p) {
    require_valid(p);
    std::cout << "parameters OK: N=" << p.n_players << " T=" << format_double(p.horizon)
              << " tau=" << format_double(p.delay) << " q=" << format_double(p.q)
              << " epsilon=" << format_double(p.epsilon) << " c=" << format_double(p.c)
              << " sigma=" << format_double(p.sigma) << "\n";
}

void cmd_riccati(RunContext& ctx, const GameParams& p) {
    const double dt = default_dt(ctx, 1e-3);
    ctx.dt_requested = dt;
    const auto sol = solve_riccati(p, dt);
    ctx.dt_adjusted = sol.t_grid.size() > 1 ? sol.t_grid[1] - sol.t_grid[0] : dt;
    ctx.emit("riccati", riccati_table(sol));
}

void cmd_kernels(RunContext& ctx, const GameParams& p) {
    const double dt = default_dt(ctx, 1e-2);
    ctx.dt_requested = dt;
    const auto K = solve_kernels(p, dt);
    ctx.dt_adjusted = K.dt;
    ctx.emit("kernels", kernels_table(K));
    const auto bin_path = std::filesystem::path(ctx.opt.output_dir) / "kernels.bin";
    dump_kernels(K, bin_path.string());
    ctx.record_file("kernels.bin", read_text_file(bin_path.string()));
}

void cmd_simulate(RunContext& ctx, const GameParams& p) {
    const double dt = default_dt(ctx, 1e-2);
    const long n_paths = default_paths(ctx, 1000);
    const std::uint64_t seed = default_seed(ctx);
    ctx.dt_requested = dt;

    SimOptions base;
    base.threads = resolve_threads(ctx.opt);
    base.deterministic = ctx.opt.deterministic;
    base.store_trajectories = ctx.cfg.get("dump_paths", "0") == "1";

    std::string law_name = ctx.cfg.get("law", "closed");
    // Zero delay makes the repayment cancel the loan within the same instant,
    // so lending has no effect on reserves: run the zero-control dynamics.
    if (has_default_measure(p) && p.delay == 0.0) law_name = "zero";
    PathBundle b;
    if (law_name == "closed") {
        const auto K = solve_kernels(p, dt);
        const auto law = feedback_law(K);
        b = simulate_closed_loop(p, law, law.dt, n_paths, seed, base);
    } else if (law_name == "nodelay") {
        const auto sol = solve_riccati(p, dt);
        b = simulate_nodelay(p, sol, dt, n_paths, seed, base);
    } else if (law_name == "zero") {
        b = simulate_zero_control(p, dt, n_paths, seed, base);
    } else {
        fail(ErrorCode::bad_config, "law must be closed, nodelay, or zero");
    }
    ctx.dt_adjusted = b.dt;

    double mean_j = 0.0;
    for (int i = 0; i < p.n_players; ++i) mean_j += realized_cost(b, i).mean;
    mean_j /= p.n_players;

    std::string prob_cell, se_cell;
    double level = 0.0;
    bool have_level = ctx.opt.level_given;
    if (have_level) level = ctx.opt.level;
    else if (ctx.cfg.has("D")) { level = parse_double(ctx.cfg.get("D"), "D"); have_level = true; }
    if (have_level) {
        const auto est = systemic_prob_mc_xbar(p, level, b.dt, n_paths, seed, base.threads);
        prob_cell = format_double(est.p);
        se_cell = format_double(est.se);
    }

    Table t;
    t.header({"tau", "dt", "n_paths", "seed", "mean_J_per_player", "systemic_prob", "se"});
    t.push_row({format_double(p.delay), format_double(b.dt), format_int(n_paths),
                format_int(static_cast<long long>(seed)), format_double(mean_j), prob_cell, se_cell});
    ctx.emit("simulate", t);

    if (b.has_trajectories) {
        Table paths;
        paths.header({"path", "t", "player", "x", "alpha"});
        for (long path = 0; path < b.n_paths; ++path)
            for (int k = 0; k <= b.n_steps; ++k)
                for (int i = 0; i < p.n_players; ++i)
                    paths.push_row({format_int(path), format_double(k * b.dt), format_int(i),
                                    format_double(b.X[b.traj_index(path, k, i)]),
                                    format_double(b.alpha[b.traj_index(path, k, i)])});
        ctx.emit("paths", paths);
    }
}

void cmd_systemic(RunContext& ctx, const GameParams& p) {
    if (!ctx.opt.level_given && !ctx.cfg.has("D"))
        fail(ErrorCode::bad_level, "systemic requires a default level via --D or config key D");
    const double level = ctx.opt.level_given ? ctx.opt.level : parse_double(ctx.cfg.get("D"), "D");
    const double dt = default_dt(ctx, 1e-3);
    const long n_paths = default_paths(ctx, 100000);
    const std::uint64_t seed = default_seed(ctx);
    const int threads = resolve_threads(ctx.opt);
    ctx.dt_requested = dt;
    const int M = steps_for(p.horizon, dt);
    ctx.dt_adjusted = p.horizon / M;

    const double exact = systemic_prob_closed_form(p, level);
    const auto plain = systemic_prob_mc_xbar(p, level, dt, n_paths, seed, threads, 1, false);
    const auto bridge = systemic_prob_mc_xbar(p, level, dt, n_paths, seed, threads, 1, true);

    Table t;
    t.header({"method", "estimate", "std_error", "n_paths"});
    t.push_row({"closed_form", format_double(exact), "", ""});
    t.push_row({"mc_plain", format_double(plain.p), format_double(plain.se), format_int(plain.n)});
    t.push_row({"mc_bridge", format_double(bridge.p), format_double(bridge.se), format_int(bridge.n)});
    ctx.emit("systemic", t);
}

void cmd_liquidity(RunContext& ctx, const GameParams& p) {
    std::string sweep = ctx.opt.tau_sweep;
    if (sweep.empty()) sweep = ctx.cfg.get("tau_sweep", "0.5,1,2,4");
    const auto taus = parse_double_list(sweep, "tau-sweep");
    const double dt = default_dt(ctx, 1e-2);
    ctx.dt_requested = dt;
    ctx.dt_adjusted = dt;  // per-tau grids may differ; each row carries its own t
    ctx.emit("liquidity", liquidity_study(p, taus, dt));
}

void cmd_fabsde(RunContext& ctx, const GameParams& p) {
    FabsdeConfig cfg;
    cfg.dt = default_dt(ctx, cfg.dt);
    cfg.n_paths = default_paths(ctx, cfg.n_paths);
    cfg.threads = resolve_threads(ctx.opt);
    if (ctx.cfg.has("n_picard")) cfg.n_picard = static_cast<int>(parse_int(ctx.cfg.get("n_picard"), "n_picard"));
    if (ctx.cfg.has("picard_tol")) cfg.picard_tol = parse_double(ctx.cfg.get("picard_tol"), "picard_tol");
    if (ctx.cfg.has("homotopy_steps"))
        cfg.homotopy_steps = static_cast<int>(parse_int(ctx.cfg.get("homotopy_steps"), "homotopy_steps"));
    if (ctx.cfg.has("damping")) cfg.damping = parse_double(ctx.cfg.get("damping"), "damping");
    ctx.dt_requested = cfg.dt;
    const auto sol = solve_fabsde(p, cfg, default_seed(ctx));
    ctx.dt_adjusted = sol.dt;
    ctx.emit("fabsde_residuals", fabsde_residual_table(sol));
    ctx.emit("fabsde_summary", fabsde_summary_table(sol));
}

void cmd_nashgap(RunContext& ctx, const GameParams& p) {
    const double dt = default_dt(ctx, 2.5e-3);
    const long n_paths = default_paths(ctx, 10000);
    ctx.dt_requested = dt;
    const auto K = solve_kernels(p, dt);
    ctx.dt_adjusted = K.dt;

    DeviationSpec dev;
    dev.kind = ctx.cfg.get("deviation_kind", "constant_shift");
    dev.magnitude = ctx.cfg.has("deviation_magnitude")
                        ? parse_double(ctx.cfg.get("deviation_magnitude"), "deviation_magnitude")
                        : 0.2;
    dev.player = ctx.cfg.has("deviation_player")
                     ? static_cast<int>(parse_int(ctx.cfg.get("deviation_player"), "deviation_player"))
                     : 0;
    if (ctx.cfg.has("deviation_table")) dev.table = parse_double_list(ctx.cfg.get("deviation_table"), "deviation_table");

    const auto r = nash_gap(p, K, dev, K.dt, n_paths, default_seed(ctx), resolve_threads(ctx.opt));
    ctx.emit("nashgap", nashgap_table({{dev, r}}));
}

void write_metadata(RunContext& ctx, double wall_seconds) {
    std::string j = "{\n  \"schema_version\": 1,\n";
    j += "  \"command\": \"" + json_escape(ctx.opt.command) + "\",\n";
    j += "  \"params_file\": \"" + json_escape(ctx.opt.params_file) + "\",\n";
    j += "  \"format\": \"" + ctx.opt.format + "\",\n";
    j += "  \"seed\": " + format_int(static_cast<long long>(default_seed(ctx))) + ",\n";
    j += "  \"threads\": " + format_int(resolve_threads(ctx.opt)) + ",\n";
    j += "  \"deterministic\": " + std::string(ctx.opt.deterministic ? "true" : "false") + ",\n";
    j += "  \"dt_requested\": " + (ctx.dt_requested > 0 ? format_double(ctx.dt_requested) : std::string("null")) + ",\n";
    j += "  \"dt_adjusted\": " + (ctx.dt_adjusted > 0 ? format_double(ctx.dt_adjusted) : std::string("null")) + ",\n";
    j += "  \"wall_time_seconds\": " + format_double(wall_seconds) + ",\n";
    j += "  \"config\": {";
    bool first = true;
    for (const auto& [k, v] : ctx.cfg.entries) {
        if (!first) j += ",";
        j += "\n    \"" + json_escape(k) + "\": \"" + json_escape(v) + "\"";
        first = false;
    }
    j += first ? "},\n" : "\n  },\n";
    j += "  \"notes\": [";
    first = true;
    for (const auto& n : ctx.notes) {
        if (!first) j += ", ";
        j += "\"" + json_escape(n) + "\"";
        first = false;
    }
    j += "],\n  \"artifacts\": [";
    first = true;
    for (const auto& [name, sum] : ctx.artifacts) {
        if (!first) j += ",";
        j += "\n    {\"file\": \"" + json_escape(name) + "\", \"fnv1a64\": \"" + sum + "\"}";
        first = false;
    }
    j += first ? "]\n}\n" : "\n  ]\n}\n";
    const auto path = std::filesystem::path(ctx.opt.output_dir) / "run_metadata.json";
    write_text_file(path.string(), j);
}

int run(int argc, char** argv) {
    RunContext ctx;
    ctx.opt = parse_cli(argc, argv);

    static const std::vector<std::string> commands = {"validate", "riccati",   "kernels", "simulate",
                                                      "systemic", "liquidity", "fabsde",  "nashgap"};
    bool known = false;
    for (const auto& c : commands) known |= (c == ctx.opt.command);
    if (!known) usage_error("unknown command: " + ctx.opt.command);

    if (!ctx.opt.params_file.empty()) ctx.cfg = load_config_file(ctx.opt.params_file);
    for (const auto& kv : ctx.opt.overrides) apply_override(ctx.cfg, kv);

    std::error_code ec;
    std::filesystem::create_directories(ctx.opt.output_dir, ec);
    if (ec) fail(ErrorCode::io_error, "cannot create output directory: " + ctx.opt.output_dir);

    const GameParams p = params_from_config(ctx.cfg);
    require_valid(p);

    const auto t0 = std::chrono::steady_clock::now();
    if (ctx.opt.command == "validate") cmd_validate(ctx, p);
    else if (ctx.opt.command == "riccati") cmd_riccati(ctx, p);
    else if (ctx.opt.command == "kernels") cmd_kernels(ctx, p);
    else if (ctx.opt.command == "simulate") cmd_simulate(ctx, p);
    else if (ctx.opt.command == "systemic") cmd_systemic(ctx, p);
    else if (ctx.opt.command == "liquidity") cmd_liquidity(ctx, p);
    else if (ctx.opt.command == "fabsde") cmd_fabsde(ctx, p);
    else if (ctx.opt.command == "nashgap") cmd_nashgap(ctx, p);
    const auto t1 = std::chrono::steady_clock::now();

    write_metadata(ctx, std::chrono::duration<double>(t1 - t0).count());
    for (const auto& [name, sum] : ctx.artifacts) std::cout << name << "  fnv1a64=" << sum << "\n";
    return 0;
}

}  // anonymous namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const gamelab::Error& e) {
        std::cerr << "error [" << gamelab::error_code_name(e.code()) << "]: " << e.what() << "\n";
        switch (gamelab::error_kind(e.code())) {
            case gamelab::ErrorKind::validation: return 1;
            case gamelab::ErrorKind::numerical: return 2;
            case gamelab::ErrorKind::io: return 3;
        }
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
