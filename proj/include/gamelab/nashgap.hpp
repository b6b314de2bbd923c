#pragma once

// Numerical verification that the closed-loop delayed feedback law is a Nash
// equilibrium: one player deviates while the rest keep the equilibrium
// strategy, and the realized cost excess over the value function is compared
// against the exact square-integral identity
//   J^i(deviation) - V^i(0) = E  1/2 integral_0^T ( a^i_t - B^i_t )^2 dt,
// where B^i is the equilibrium bracket evaluated along the DEVIATED
// trajectory:
//   B^i_t = phi(t) (Xbar_t - X^i_t) + sum_l psi(t, l dt) (abar - a^i)_{t - l dt} dt.
// At the equilibrium (abar = 0, a^i = B^i) the bracket reduces to the
// simulated feedback law and the identity collapses to J = V.
//
// Both members of each common-random-number pair (deviated run, equilibrium
// run) are driven by the same Brownian increments inside the same path loop,
// which makes the per-path difference J_dev - J_eq - predicted nearly
// deterministic; the harness reports the variance-reduction factor against
// hypothetical independent baselines (the independent variance is the sum of
// the marginal variances).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "gamelab/costs.hpp"
#include "gamelab/csv.hpp"
#include "gamelab/errors.hpp"
#include "gamelab/kernels.hpp"
#include "gamelab/parallel.hpp"
#include "gamelab/params.hpp"
#include "gamelab/rng.hpp"
#include "gamelab/util.hpp"

namespace gamelab {

struct DeviationSpec {
    int player = 0;
    std::string kind = "constant_shift";  // constant_shift | scaled_feedback | custom_table
    double magnitude = 0.0;
    std::vector<double> table;  // explicit control path for custom_table (one entry per grid node)
};

struct NashGapResult {
    double gap = 0.0;           // mean J_dev - V^i(0)
    double gap_se = 0.0;
    double predicted = 0.0;     // mean of the per-path square-integral
    double predicted_se = 0.0;
    double ratio = 0.0;         // gap / predicted (NaN when predicted is 0)
    double combined_se = 0.0;   // SE of (J_dev - predicted) per path
    double v0 = 0.0;            // value function of the deviating player at t = 0
    double mean_j_eq = 0.0;     // CRN equilibrium baseline
    double eq_se = 0.0;
    double crn_var = 0.0;       // Var(J_dev - J_eq - predicted), the CRN pairing
    double indep_var = 0.0;     // Var(J_dev - predicted) + Var(J_eq): independent baseline
    long n_paths = 0;
};

namespace detail {

inline void validate_deviation(const GameParams& p, const DeviationSpec& dev, int n_steps) {
    if (dev.player < 0 || dev.player >= p.n_players)
        fail(ErrorCode::bad_deviation, "deviating player index out of range");
    if (!std::isfinite(dev.magnitude)) fail(ErrorCode::bad_deviation, "deviation magnitude must be finite");
    if (dev.kind == "custom_table") {
        if (dev.table.size() != static_cast<std::size_t>(n_steps) + 1)
            fail(ErrorCode::bad_deviation, "custom_table must cover every grid node of [0, T]");
        for (double v : dev.table)
            if (!std::isfinite(v)) fail(ErrorCode::bad_deviation, "custom_table entries must be finite");
    } else if (dev.kind != "constant_shift" && dev.kind != "scaled_feedback") {
        fail(ErrorCode::bad_deviation, "unknown deviation kind: " + dev.kind);
    }
}

}  // namespace detail

inline NashGapResult nash_gap(const GameParams& p, const EKernels& K, const DeviationSpec& dev, double dt,
                              long n_paths, std::uint64_t seed, int threads = 0) {
    require_valid(p);
    if (std::abs(K.dt - dt) > 1e-12 * std::max(1.0, dt))
        fail(ErrorCode::grid_mismatch, "simulation dt must equal the kernel grid step");
    if (n_paths <= 0) fail(ErrorCode::nonpositive, "n_paths must be positive");
    const auto law = feedback_law(K);
    const int M = law.n_steps;
    const int m = law.n_lags;
    detail::validate_deviation(p, dev, M);

    const int N = p.n_players;
    const int di = dev.player;
    const auto xi = effective_reserves(p);
    const double sq = p.sigma * std::sqrt(dt);
    const CounterRng rng(seed, /*stream=*/3);

    std::vector<double> j_dev(static_cast<std::size_t>(n_paths));
    std::vector<double> j_eq(static_cast<std::size_t>(n_paths));
    std::vector<double> pred(static_cast<std::size_t>(n_paths));

    const std::size_t width = static_cast<std::size_t>(m) + 1;
    const long block = 32;

    parallel_blocks(n_paths, block, threads, [&](long, long begin, long end) {
        // two coupled systems share the Brownian draws: index 0 = deviated run,
        // index 1 = equilibrium run
        std::vector<double> x[2], ahist[2], mhist[2], a[2], bracket;
        for (int s = 0; s < 2; ++s) {
            x[s].resize(static_cast<std::size_t>(N));
            ahist[s].assign(width * static_cast<std::size_t>(N), 0.0);  // ring of control rows
            mhist[s].assign(width * static_cast<std::size_t>(N), 0.0);  // ring of (abar - a^j) rows
            a[s].resize(static_cast<std::size_t>(N));
        }
        bracket.resize(static_cast<std::size_t>(N));
        std::vector<double> z(static_cast<std::size_t>(N));

        for (long path = begin; path < end; ++path) {
            for (int s = 0; s < 2; ++s) {
                std::copy(xi.begin(), xi.end(), x[s].begin());
                std::fill(mhist[s].begin(), mhist[s].end(), 0.0);
            }
            double cost_dev = 0.0, cost_eq = 0.0, pred_acc = 0.0;

            for (int k = 0; k <= M; ++k) {
                const double w = (k == 0 || k == M) ? 0.5 * dt : dt;
                const double phi = law.phi[static_cast<std::size_t>(k)];
                const double* psi = &law.psi[static_cast<std::size_t>(k) * width];
                const int lmax = std::min(k, m);

                for (int s = 0; s < 2; ++s) {
                    double xbar = 0.0;
                    for (int i = 0; i < N; ++i) xbar += x[s][static_cast<std::size_t>(i)];
                    xbar /= N;

                    for (int i = 0; i < N; ++i) {
                        double mem = 0.0;
                        for (int l = 1; l <= lmax; ++l)
                            mem += psi[l] * mhist[s][static_cast<std::size_t>((k - l) % static_cast<int>(width)) *
                                                         static_cast<std::size_t>(N) +
                                                     static_cast<std::size_t>(i)];
                        bracket[static_cast<std::size_t>(i)] =
                            phi * (xbar - x[s][static_cast<std::size_t>(i)]) + dt * mem;
                    }
                    double abar = 0.0;
                    for (int i = 0; i < N; ++i) {
                        double ai = bracket[static_cast<std::size_t>(i)];
                        if (s == 0 && i == di) {
                            if (dev.kind == "constant_shift")
                                ai += dev.magnitude;
                            else if (dev.kind == "scaled_feedback")
                                ai *= dev.magnitude;
                            else
                                ai = dev.table[static_cast<std::size_t>(k)];
                        }
                        a[s][static_cast<std::size_t>(i)] = ai;
                        abar += ai;
                    }
                    abar /= N;

                    // store control and memory rows for this step
                    double* arow =
                        &ahist[s][static_cast<std::size_t>(k % static_cast<int>(width)) * static_cast<std::size_t>(N)];
                    double* mrow =
                        &mhist[s][static_cast<std::size_t>(k % static_cast<int>(width)) * static_cast<std::size_t>(N)];
                    for (int i = 0; i < N; ++i) {
                        arow[i] = a[s][static_cast<std::size_t>(i)];
                        mrow[i] = abar - a[s][static_cast<std::size_t>(i)];
                    }

                    const double spread_i = xbar - x[s][static_cast<std::size_t>(di)];
                    const double ai = a[s][static_cast<std::size_t>(di)];
                    const double fcost = running_cost_fast(p, spread_i, ai);
                    if (s == 0) {
                        cost_dev += w * fcost;
                        const double d = ai - bracket[static_cast<std::size_t>(di)];
                        pred_acc += 0.5 * w * d * d;
                    } else {
                        cost_eq += w * fcost;
                    }
                    if (k == M) {
                        const double g = terminal_cost_fast(p, spread_i);
                        if (s == 0)
                            cost_dev += g;
                        else
                            cost_eq += g;
                    }
                }
                if (k == M) break;

                for (int i = 0; i < N; ++i)
                    z[static_cast<std::size_t>(i)] =
                        rng.normal(static_cast<std::uint64_t>(path), static_cast<std::uint64_t>(k), i);
                for (int s = 0; s < 2; ++s)
                    for (int i = 0; i < N; ++i) {
                        double drift = a[s][static_cast<std::size_t>(i)];
                        if (k >= m)
                            drift -= ahist[s][static_cast<std::size_t>((k - m) % static_cast<int>(width)) *
                                                  static_cast<std::size_t>(N) +
                                              static_cast<std::size_t>(i)];
                        x[s][static_cast<std::size_t>(i)] += drift * dt + sq * z[static_cast<std::size_t>(i)];
                        if (!(std::abs(x[s][static_cast<std::size_t>(i)]) < 1e9))
                            fail(ErrorCode::unstable, "simulated state exceeded the stability threshold");
                    }
            }
            j_dev[static_cast<std::size_t>(path)] = cost_dev;
            j_eq[static_cast<std::size_t>(path)] = cost_eq;
            pred[static_cast<std::size_t>(path)] = pred_acc;
        }
    });

    const auto v = value_function(K, 0, xi, {});
    NashGapResult r;
    r.n_paths = n_paths;
    r.v0 = v[static_cast<std::size_t>(di)];
    r.gap = mean(j_dev) - r.v0;
    r.gap_se = standard_error(j_dev);
    r.predicted = mean(pred);
    r.predicted_se = standard_error(pred);
    r.ratio = r.predicted != 0.0 ? r.gap / r.predicted : std::numeric_limits<double>::quiet_NaN();
    r.mean_j_eq = mean(j_eq);
    r.eq_se = standard_error(j_eq);

    std::vector<double> diff(static_cast<std::size_t>(n_paths)), crn(static_cast<std::size_t>(n_paths));
    for (long i = 0; i < n_paths; ++i) {
        diff[static_cast<std::size_t>(i)] = j_dev[static_cast<std::size_t>(i)] - pred[static_cast<std::size_t>(i)];
        crn[static_cast<std::size_t>(i)] = j_dev[static_cast<std::size_t>(i)] - j_eq[static_cast<std::size_t>(i)] -
                                           pred[static_cast<std::size_t>(i)];
    }
    r.combined_se = standard_error(diff);
    r.crn_var = variance(crn);
    r.indep_var = variance(diff) + variance(j_eq);
    return r;
}

// CSV row contract: "deviation_kind,magnitude,gap,gap_se,predicted,predicted_se,ratio".
inline Table nashgap_table(const std::vector<std::pair<DeviationSpec, NashGapResult>>& results) {
    Table t;
    t.header({"deviation_kind", "magnitude", "gap", "gap_se", "predicted", "predicted_se", "ratio"});
    for (const auto& [dev, r] : results)
        t.push_row({dev.kind, format_double(dev.magnitude), format_double(r.gap), format_double(r.gap_se),
                    format_double(r.predicted), format_double(r.predicted_se),
                    std::isnan(r.ratio) ? std::string() : format_double(r.ratio)});
    return t;
}

}  // namespace gamelab
