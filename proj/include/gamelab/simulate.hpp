#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "gamelab/costs.hpp"
#include "gamelab/errors.hpp"
#include "gamelab/kernels.hpp"
#include "gamelab/parallel.hpp"
#include "gamelab/params.hpp"
#include "gamelab/riccati.hpp"
#include "gamelab/rng.hpp"
#include "gamelab/util.hpp"

namespace gamelab {

// Monte Carlo engine: Euler-Maruyama simulation of the N-bank system under
// (a) the closed-loop delayed feedback law, (b) the no-delay benchmark law,
// (c) zero control. Paths are driven by the counter RNG, so results are
// bitwise reproducible for any thread count.

struct SimOptions {
    double dt = 1e-3;
    long n_paths = 1000;
    std::uint64_t seed = 1;
    int threads = 0;               // 0 = GAME_LAB_THREADS or hardware
    bool store_trajectories = false;
    // Number of fine RNG substeps per dt. Runs at dt with substeps R and at
    // dt/R with substeps 1 share the same Brownian paths (nested refinement).
    int substeps = 1;
    bool deterministic = true;     // recorded; reductions are always ordered
    double unstable_threshold = 1e9;
};

struct SystemicRiskQuery {
    double level = 0.0;  // default level D <= 0: event is min_t (Xbar_t - Xbar_0) <= D
};

struct ProbEstimate {
    double p = 0.0;
    double se = 0.0;  // binomial standard error
    long n = 0;
};

struct CostStats {
    double mean = 0.0;
    double se = 0.0;
};

struct PathBundle {
    GameParams params;
    double dt = 0.0;
    long n_paths = 0;
    std::uint64_t seed = 0;
    int n_steps = 0;
    int substeps = 1;

    std::vector<double> costs;     // n_paths x N, path-major
    std::vector<double> min_drop;  // per path: min over grid nodes of Xbar_t - Xbar_0
    std::vector<double> xbar_mean; // ensemble mean of Xbar per time node

    double max_clearing_abs = 0.0;  // max over paths/steps of |sum_i alpha^i|
    double max_clearing_rel = 0.0;  // same, relative to max_i |alpha^i| at that step

    bool has_trajectories = false;  // X/alpha/dW populated (path, time, player)
    std::vector<double> X, alpha, dW;

    double cost(long path, int player) const {
        return costs[static_cast<std::size_t>(path) * params.n_players + static_cast<std::size_t>(player)];
    }
    std::size_t traj_index(long path, int k, int player) const {
        return (static_cast<std::size_t>(path) * (static_cast<std::size_t>(n_steps) + 1) +
                static_cast<std::size_t>(k)) *
                   static_cast<std::size_t>(params.n_players) +
               static_cast<std::size_t>(player);
    }
    std::vector<double> state_at(long path, int k) const {
        std::vector<double> out(static_cast<std::size_t>(params.n_players));
        for (int i = 0; i < params.n_players; ++i) out[static_cast<std::size_t>(i)] = X[traj_index(path, k, i)];
        return out;
    }
    std::vector<double> alpha_at(long path, int k) const {
        std::vector<double> out(static_cast<std::size_t>(params.n_players));
        for (int i = 0; i < params.n_players; ++i) out[static_cast<std::size_t>(i)] = alpha[traj_index(path, k, i)];
        return out;
    }
};

namespace detail {

// Per-path control rule: fills alpha[i] for step k given spreads and the
// path's own control history (rows 0..k-1 already filled).
struct StepContext {
    int k = 0;
    const std::vector<double>* x = nullptr;        // current states
    double xbar = 0.0;
    const std::vector<double>* alpha_hist = nullptr;  // (n_steps+1) x N, rows < k valid
};

template <typename ControlRule>
PathBundle run_paths(const GameParams& p, double dt, int n_steps, int delay_steps, const SimOptions& opt,
                     ControlRule&& control_rule, bool delayed_drift) {
    require_valid(p);
    if (opt.n_paths <= 0) fail(ErrorCode::nonpositive, "n_paths must be positive");
    if (opt.substeps < 1) fail(ErrorCode::bad_config, "substeps must be >= 1");

    const int N = p.n_players;
    const std::vector<double> xi = effective_reserves(p);
    if (xi.size() != static_cast<std::size_t>(N)) fail(ErrorCode::bad_config, "initial_reserves length");

    PathBundle b;
    b.params = p;
    b.dt = dt;
    b.n_paths = opt.n_paths;
    b.seed = opt.seed;
    b.n_steps = n_steps;
    b.substeps = opt.substeps;
    b.costs.assign(static_cast<std::size_t>(opt.n_paths) * N, 0.0);
    b.min_drop.assign(static_cast<std::size_t>(opt.n_paths), 0.0);
    b.has_trajectories = opt.store_trajectories;
    if (b.has_trajectories) {
        const std::size_t sz = static_cast<std::size_t>(opt.n_paths) * (n_steps + 1) * N;
        b.X.assign(sz, 0.0);
        b.alpha.assign(sz, 0.0);
        b.dW.assign(sz, 0.0);
    }

    const long block = 64;
    const long n_blocks = (opt.n_paths + block - 1) / block;
    std::vector<std::vector<double>> xbar_sum_blocks(static_cast<std::size_t>(n_blocks));
    std::vector<double> clear_abs_blocks(static_cast<std::size_t>(n_blocks), 0.0);
    std::vector<double> clear_rel_blocks(static_cast<std::size_t>(n_blocks), 0.0);

    const CounterRng rng(opt.seed);
    const double sqdt = std::sqrt(dt);

    parallel_blocks(opt.n_paths, block, opt.threads, [&](long blk, long begin, long end) {
        std::vector<double> x(static_cast<std::size_t>(N));
        std::vector<double> ahist((static_cast<std::size_t>(n_steps) + 1) * N, 0.0);
        std::vector<double> a(static_cast<std::size_t>(N));
        std::vector<double>& xbar_sum = xbar_sum_blocks[static_cast<std::size_t>(blk)];
        xbar_sum.assign(static_cast<std::size_t>(n_steps) + 1, 0.0);
        double blk_abs = 0.0, blk_rel = 0.0;

        for (long path = begin; path < end; ++path) {
            std::copy(xi.begin(), xi.end(), x.begin());
            double* J = &b.costs[static_cast<std::size_t>(path) * N];
            std::fill(J, J + N, 0.0);
            const double xbar0 = mean(x);
            double drop_min = 0.0;

            for (int k = 0; k <= n_steps; ++k) {
                const double xbar = mean(x);
                xbar_sum[static_cast<std::size_t>(k)] += xbar;
                if (k > 0) drop_min = std::min(drop_min, xbar - xbar0);

                StepContext ctx{k, &x, xbar, &ahist};
                control_rule(ctx, a);
                double* arow = &ahist[static_cast<std::size_t>(k) * N];
                std::copy(a.begin(), a.end(), arow);

                // clearing diagnostics
                double asum = 0.0, amax = 0.0;
                for (int i = 0; i < N; ++i) {
                    asum += a[static_cast<std::size_t>(i)];
                    amax = std::max(amax, std::abs(a[static_cast<std::size_t>(i)]));
                }
                blk_abs = std::max(blk_abs, std::abs(asum));
                if (amax > 0.0) blk_rel = std::max(blk_rel, std::abs(asum) / amax);

                // trapezoid-rule running cost
                const double w = (k == 0 || k == n_steps) ? 0.5 * dt : dt;
                for (int i = 0; i < N; ++i) {
                    const double s = xbar - x[static_cast<std::size_t>(i)];
                    J[i] += w * running_cost_fast(p, s, a[static_cast<std::size_t>(i)]);
                }

                if (b.has_trajectories) {
                    for (int i = 0; i < N; ++i) {
                        b.X[b.traj_index(path, k, i)] = x[static_cast<std::size_t>(i)];
                        b.alpha[b.traj_index(path, k, i)] = a[static_cast<std::size_t>(i)];
                    }
                }

                if (k == n_steps) break;

                const std::uint64_t fine = static_cast<std::uint64_t>(k) * opt.substeps;
                for (int i = 0; i < N; ++i) {
                    double drift = a[static_cast<std::size_t>(i)];
                    if (delayed_drift) {
                        const double a_del =
                            (k >= delay_steps) ? ahist[static_cast<std::size_t>(k - delay_steps) * N + i] : 0.0;
                        drift -= a_del;
                    }
                    const double dw =
                        p.sigma * sqdt *
                        rng.normal_aggregated(static_cast<std::uint64_t>(path), fine, opt.substeps,
                                              static_cast<std::uint32_t>(i));
                    if (b.has_trajectories) b.dW[b.traj_index(path, k, i)] = dw;
                    x[static_cast<std::size_t>(i)] += drift * dt + dw;
                    if (!(std::abs(x[static_cast<std::size_t>(i)]) < opt.unstable_threshold))
                        fail(ErrorCode::unstable, "state exceeded the stability threshold (mis-scaled configuration?)");
                }
            }

            // terminal cost
            const double xbarT = mean(x);
            for (int i = 0; i < N; ++i)
                J[i] += terminal_cost_fast(p, xbarT - x[static_cast<std::size_t>(i)]);
            b.min_drop[static_cast<std::size_t>(path)] = drop_min;
        }
        clear_abs_blocks[static_cast<std::size_t>(blk)] = blk_abs;
        clear_rel_blocks[static_cast<std::size_t>(blk)] = blk_rel;
    });

    // ordered block reduction keeps results independent of thread count
    b.xbar_mean.assign(static_cast<std::size_t>(n_steps) + 1, 0.0);
    for (long blk = 0; blk < n_blocks; ++blk) {
        for (int k = 0; k <= n_steps; ++k)
            b.xbar_mean[static_cast<std::size_t>(k)] += xbar_sum_blocks[static_cast<std::size_t>(blk)][static_cast<std::size_t>(k)];
        b.max_clearing_abs = std::max(b.max_clearing_abs, clear_abs_blocks[static_cast<std::size_t>(blk)]);
        b.max_clearing_rel = std::max(b.max_clearing_rel, clear_rel_blocks[static_cast<std::size_t>(blk)]);
    }
    for (double& v : b.xbar_mean) v /= static_cast<double>(opt.n_paths);
    return b;
}

}  // namespace detail

// Equilibrium simulation under the closed-loop delayed feedback law:
//   alpha^i_t = phi(t)(Xbar - X^i) - sum_{l=1..m} psi(t, l dt) alpha^i_{t-l dt} dt
// (abar = 0 holds structurally: controls are built from spreads), with state
//   X^i_{t+dt} = X^i_t + (alpha^i_t - alpha^i_{t-tau}) dt + sigma sqrt(dt) eta.
inline PathBundle simulate_closed_loop(const GameParams& p, const FeedbackLaw& law, double dt, long n_paths,
                                       std::uint64_t seed, const SimOptions& base = {}) {
    if (std::abs(law.dt - dt) > 1e-12 * std::max(1.0, dt))
        fail(ErrorCode::grid_mismatch, "simulation dt must equal the law's grid step");
    SimOptions opt = base;
    opt.dt = dt;
    opt.n_paths = n_paths;
    opt.seed = seed;

    const int N = p.n_players;
    const int m = law.n_lags;
    const std::size_t width = static_cast<std::size_t>(m) + 1;

    auto rule = [&law, N, m, dt, width](const detail::StepContext& ctx, std::vector<double>& a) {
        const int k = ctx.k;
        const double phi = law.phi[static_cast<std::size_t>(k)];
        const double* psi = &law.psi[static_cast<std::size_t>(k) * width];
        const int lmax = std::min(k, m);
        const std::vector<double>& hist = *ctx.alpha_hist;
        for (int i = 0; i < N; ++i) {
            double memsum = 0.0;
            for (int l = 1; l <= lmax; ++l)
                memsum += psi[l] * hist[static_cast<std::size_t>(k - l) * N + i];
            a[static_cast<std::size_t>(i)] =
                phi * (ctx.xbar - (*ctx.x)[static_cast<std::size_t>(i)]) - dt * memsum;
        }
    };
    return detail::run_paths(p, dt, law.n_steps, m, opt, rule, /*delayed_drift=*/true);
}

// No-delay benchmark: alpha^i_t = [q + (1-1/N) phi(t)](Xbar - X^i), plain drift.
inline PathBundle simulate_nodelay(const GameParams& p, const RiccatiSolution& sol, double dt, long n_paths,
                                   std::uint64_t seed, const SimOptions& base = {}) {
    SimOptions opt = base;
    opt.dt = dt;
    opt.n_paths = n_paths;
    opt.seed = seed;
    const int M = steps_for(p.horizon, dt);
    const double dt_adj = p.horizon / M;
    opt.dt = dt_adj;

    const int N = p.n_players;
    std::vector<double> gain(static_cast<std::size_t>(M) + 1);
    for (int k = 0; k <= M; ++k) gain[static_cast<std::size_t>(k)] = nodelay_feedback_gain(sol, dt_adj * k);

    auto rule = [&gain, N](const detail::StepContext& ctx, std::vector<double>& a) {
        const double g = gain[static_cast<std::size_t>(ctx.k)];
        for (int i = 0; i < N; ++i)
            a[static_cast<std::size_t>(i)] = g * (ctx.xbar - (*ctx.x)[static_cast<std::size_t>(i)]);
    };
    return detail::run_paths(p, dt_adj, M, 0, opt, rule, /*delayed_drift=*/false);
}

// Zero control (also the tau = 0 degenerate game, whose repayment measure is
// the zero measure: the drift vanishes and states are independent Brownian
// motions).
inline PathBundle simulate_zero_control(const GameParams& p, double dt, long n_paths, std::uint64_t seed,
                                        const SimOptions& base = {}) {
    SimOptions opt = base;
    opt.dt = dt;
    opt.n_paths = n_paths;
    opt.seed = seed;
    const int M = steps_for(p.horizon, dt);
    opt.dt = p.horizon / M;
    const int N = p.n_players;
    auto rule = [N](const detail::StepContext&, std::vector<double>& a) {
        std::fill(a.begin(), a.end(), 0.0);
    };
    return detail::run_paths(p, opt.dt, M, 0, opt, rule, /*delayed_drift=*/false);
}

// Ensemble statistics of one bank's realized cost.
inline CostStats realized_cost(const PathBundle& b, int player) {
    const int N = b.params.n_players;
    if (player < 0 || player >= N) fail(ErrorCode::out_of_range, "player index out of range");
    std::vector<double> v(static_cast<std::size_t>(b.n_paths));
    for (long path = 0; path < b.n_paths; ++path) v[static_cast<std::size_t>(path)] = b.cost(path, player);
    return CostStats{mean(v), standard_error(v)};
}

// Fraction of paths whose discrete minimum of Xbar_t - Xbar_0 is <= level.
inline ProbEstimate estimate_systemic_prob(const PathBundle& b, const SystemicRiskQuery& query) {
    if (query.level > 0.0) fail(ErrorCode::bad_level, "default level must be <= 0");
    long hits = 0;
    for (double d : b.min_drop)
        if (d <= query.level) ++hits;
    ProbEstimate e;
    e.n = b.n_paths;
    e.p = static_cast<double>(hits) / static_cast<double>(b.n_paths);
    e.se = std::sqrt(std::max(0.0, e.p * (1.0 - e.p) / static_cast<double>(b.n_paths)));
    return e;
}

// Direct Monte Carlo for the systemic event on the mean reserve process,
// which is control-free: Xbar_t - Xbar_0 = (sigma/sqrt(N)) B_t. With
// `bridge` false this uses the discrete-grid minimum (biased by O(sqrt(dt))
// toward fewer hits); with `bridge` true each step adds the exact conditional
// hitting probability of the Brownian bridge between grid nodes, removing the
// discrete-monitoring bias entirely.
inline ProbEstimate systemic_prob_mc_xbar(const GameParams& p, double level, double dt, long n_paths,
                                          std::uint64_t seed, int threads = 0, int substeps = 1,
                                          bool bridge = false) {
    require_valid(p);
    if (level > 0.0) fail(ErrorCode::bad_level, "default level must be <= 0");
    if (n_paths <= 0) fail(ErrorCode::nonpositive, "n_paths must be positive");
    if (substeps < 1) fail(ErrorCode::bad_config, "substeps must be >= 1");

    const int M = steps_for(p.horizon, dt);
    const double h = p.horizon / M;
    const double s = p.sigma / std::sqrt(static_cast<double>(p.n_players));
    const double sq = s * std::sqrt(h);
    const CounterRng rng(seed, /*stream=*/1);

    const long block = 256;
    const long n_blocks = (n_paths + block - 1) / block;
    std::vector<double> sums(static_cast<std::size_t>(n_blocks), 0.0);

    parallel_blocks(n_paths, block, threads, [&](long blk, long begin, long end) {
        double acc = 0.0;
        for (long path = begin; path < end; ++path) {
            double x = 0.0;
            bool hit = (0.0 <= level);
            double survive = 1.0;
            for (int k = 0; k < M && !hit; ++k) {
                const double xn =
                    x + sq * rng.normal_aggregated(static_cast<std::uint64_t>(path),
                                                   static_cast<std::uint64_t>(k) * substeps, substeps, 0);
                if (xn <= level) {
                    hit = true;
                } else if (bridge) {
                    // P(bridge between x and xn dips to level) = exp(-2 (x-l)(xn-l) / (s^2 h))
                    survive *= 1.0 - std::exp(-2.0 * (x - level) * (xn - level) / (s * s * h));
                }
                x = xn;
            }
            acc += hit ? 1.0 : (bridge ? 1.0 - survive : 0.0);
        }
        sums[static_cast<std::size_t>(blk)] = acc;
    });

    double total = 0.0;
    for (double v : sums) total += v;
    ProbEstimate e;
    e.n = n_paths;
    e.p = total / static_cast<double>(n_paths);
    e.se = std::sqrt(std::max(0.0, e.p * (1.0 - e.p) / static_cast<double>(n_paths)));
    return e;
}

}  // namespace gamelab
