#pragma once

// Open-loop equilibrium via the forward/anticipated-backward system, solved by
// Picard iteration with regression-based conditional expectations and optional
// homotopy continuation in lambda.
//
// Centered reduction. With Xc^i = X^i - Xbar the mean reserve decouples
// (Xbar is a scaled Brownian average) and the diagonal adjoint satisfies
//   -dY^ii = lambda A1 (q a^i + eps Xc^i) dt - Z dW,   Y^ii_T = lambda c A1 Xc^i_T,
//   Y^ii identically 0 on (T, T + tau],
// with the open-loop optimizer a^i_t = q (Xbar - X^i) - Ytilde^i_t, where
// Ytilde_t = E[ sum_l w_l Y_{t+s_l} | F_t ] is the anticipated combination
// over the repayment measure's atoms.
//
// The LQ structure keeps the simulated Y exactly proportional to the centered
// state at every node, so the least-squares conditional expectations collapse
// to scalar coefficient recursions driven by measured state-transfer ratios
//   rho_{l,k} = <Xc_{k+L_l} Xc_k> / <Xc_k^2>     (pooled over paths and banks).
// Each Picard pass (1) simulates forward under the frozen control coefficients
// while measuring the transfer ratios, (2) rebuilds the backward coefficients
// eta_k from the terminal condition, (3) reassembles the anticipated
// coefficient etat_k and relaxes toward it. Convergence is declared on the
// relative L2 change of the control coefficient, weighted by the ensemble
// state second moments.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gamelab/csv.hpp"
#include "gamelab/errors.hpp"
#include "gamelab/parallel.hpp"
#include "gamelab/params.hpp"
#include "gamelab/rng.hpp"
#include "gamelab/util.hpp"

namespace gamelab {

struct FabsdeConfig {
    double dt = 5e-3;
    long n_paths = 50000;        // regression ensemble size
    int n_picard = 30;           // max Picard iterations per homotopy stage
    double picard_tol = 1e-6;    // relative L2 tolerance on the control coefficient
    int homotopy_steps = 1;      // lambda increments in [0,1]; 1 = direct iteration
    double damping = 1.0;        // relaxation weight in (0,1]
    std::string basis = "centered";  // regression feature set
    int threads = 0;
    long store_paths = 256;      // sample paths kept for diagnostics
};

struct PicardRecord {
    int iteration = 0;
    double lambda = 1.0;
    double residual = 0.0;
};

struct FabsdeSolution {
    GameParams params;
    double dt = 0.0;
    int n_steps = 0;
    long n_paths = 0;
    std::uint64_t seed = 0;

    // repayment measure resolved onto the grid
    std::vector<int> lag_steps;       // atom lags in grid steps
    std::vector<double> lag_weights;  // matching weights

    // per-time coefficients: Y^ii_k = eta_k Xc^i_k, Ytilde^i_k = etat_k Xc^i_k,
    // control a^i_k = -(q + etat_k) Xc^i_k; eta is 0 beyond the horizon.
    std::vector<double> eta;
    std::vector<double> etat;
    std::vector<double> rho;       // (L+1) x (M+1), rho[l * (M+1) + k]; lag-0 row is 1
    std::vector<double> rho_step;  // M entries: one-step ratios <Xc_{k+1} Xc_k>/<Xc_k^2>
    std::vector<double> m2;        // ensemble second moment of centered states per time
    std::vector<double> gamma_off; // off-diagonal coefficients (empty until solved)

    std::vector<PicardRecord> residuals;
    bool converged = false;
    double clearing_sup = 0.0;  // sup over the ensemble of |sum_i a^i| / max_i |a^i|

    // diagnostics sample: centered states, controls, centered Brownian
    // increments per (path, time, player), path-major
    long sample_paths = 0;
    std::vector<double> xc, alpha, dwc;

    double rho_at(int atom, int k) const {
        return rho[static_cast<std::size_t>(atom) * (static_cast<std::size_t>(n_steps) + 1) +
                   static_cast<std::size_t>(k)];
    }
    std::size_t sample_index(long path, int k, int player) const {
        return (static_cast<std::size_t>(path) * (static_cast<std::size_t>(n_steps) + 1) +
                static_cast<std::size_t>(k)) *
                   static_cast<std::size_t>(params.n_players) +
               static_cast<std::size_t>(player);
    }
    // Y^ii along a stored sample path; zero after the horizon by construction.
    double ydiag(long path, int k, int player) const {
        if (k > n_steps) return 0.0;
        return eta[static_cast<std::size_t>(k)] * xc[sample_index(path, k, player)];
    }
    double ytilde(long path, int k, int player) const {
        return etat[static_cast<std::size_t>(k)] * xc[sample_index(path, k, player)];
    }
    double control(long path, int k, int player) const { return alpha[sample_index(path, k, player)]; }
    // off-diagonal adjoint along a sample path (requires solve_offdiagonal)
    double yoff(long path, int k, int player) const {
        return gamma_off[static_cast<std::size_t>(k)] * xc[sample_index(path, k, player)];
    }
    // martingale integrand: Z^{i,i,k}_t = eta_t sigma (delta_{ik} - 1/N)
    double z_diag(int k, int i, int shock) const {
        const double pattern = (i == shock ? 1.0 : 0.0) - 1.0 / params.n_players;
        return eta[static_cast<std::size_t>(k)] * params.sigma * pattern;
    }
};

namespace detail {

struct FabsdeGrid {
    int n_steps = 0;
    std::vector<int> lag_steps;
    std::vector<double> lag_weights;
    int ring_depth = 2;  // lookback depth needed by the forward recursion
};

inline FabsdeGrid fabsde_grid(const GameParams& p, double dt_req) {
    FabsdeGrid g;
    g.n_steps = steps_for(p.horizon, dt_req);
    const double dt = p.horizon / g.n_steps;
    int max_active = 1;  // always look back one step for the transfer ratios
    for (const auto& atom : effective_measure(p)) {
        const double raw = atom.lag / dt;
        const int steps = static_cast<int>(std::llround(raw));
        if (std::abs(raw - steps) > 1e-9 * std::max(1.0, raw))
            fail(ErrorCode::grid_mismatch, "repayment lag " + format_double(atom.lag) +
                                               " is not a multiple of the time step");
        g.lag_steps.push_back(steps);
        g.lag_weights.push_back(atom.weight);
        if (steps <= g.n_steps) max_active = std::max(max_active, steps);
    }
    if (g.lag_steps.empty()) fail(ErrorCode::tau_zero, "repayment measure is empty (no delay)");
    g.ring_depth = max_active + 1;
    return g;
}

inline void validate_fabsde_config(const FabsdeConfig& cfg) {
    if (!(cfg.dt > 0.0)) fail(ErrorCode::nonpositive, "dt must be positive");
    if (cfg.n_paths < 2) fail(ErrorCode::bad_config, "n_paths must be at least 2");
    if (cfg.n_picard < 1) fail(ErrorCode::bad_config, "n_picard must be at least 1");
    if (!(cfg.picard_tol > 0.0)) fail(ErrorCode::bad_config, "picard_tol must be positive");
    if (cfg.homotopy_steps < 1) fail(ErrorCode::bad_config, "homotopy_steps must be at least 1");
    if (!(cfg.damping > 0.0) || cfg.damping > 1.0) fail(ErrorCode::bad_config, "damping must be in (0,1]");
    if (cfg.basis != "centered") fail(ErrorCode::bad_config, "unknown regression basis: " + cfg.basis);
    if (cfg.store_paths < 0) fail(ErrorCode::bad_config, "store_paths must be nonnegative");
}

// Pooled sums from one forward simulation under frozen control coefficients.
struct ForwardStats {
    std::vector<double> num;    // (L+1) x (M+1): sum of Xc_{k+L_l} Xc_k over (path, bank)
    std::vector<double> num1;   // M entries: sum of Xc_{k+1} Xc_k
    std::vector<double> den;    // (M+1): sum of Xc_k^2
    double clearing_sup = 0.0;  // relative clearing violation across the ensemble
};

inline ForwardStats fabsde_forward(const GameParams& p, const FabsdeGrid& g, const std::vector<double>& ctrl,
                                   long n_paths, std::uint64_t seed, int threads, FabsdeSolution* sample_sink) {
    const int N = p.n_players;
    const int M = g.n_steps;
    const double dt = p.horizon / M;
    const double sq = p.sigma * std::sqrt(dt);
    const int n_atoms = static_cast<int>(g.lag_steps.size());
    const int depth = g.ring_depth;
    const auto xi = effective_reserves(p);
    const double xbar0 = mean(xi);
    const CounterRng rng(seed, /*stream=*/2);

    const std::size_t rows = static_cast<std::size_t>(M) + 1;
    const long block = 64;
    const long n_blocks = (n_paths + block - 1) / block;

    struct BlockAcc {
        std::vector<double> num, num1, den;
        double clearing = 0.0;
    };
    std::vector<BlockAcc> acc(static_cast<std::size_t>(n_blocks));

    parallel_blocks(n_paths, block, threads, [&](long blk, long begin, long end) {
        BlockAcc a;
        a.num.assign(static_cast<std::size_t>(n_atoms) * rows, 0.0);
        a.num1.assign(static_cast<std::size_t>(M), 0.0);
        a.den.assign(rows, 0.0);

        std::vector<double> xc(static_cast<std::size_t>(N));
        std::vector<double> z(static_cast<std::size_t>(N));
        // rings hold the last `depth` slices of controls and centered states
        std::vector<double> aring(static_cast<std::size_t>(depth) * N, 0.0);
        std::vector<double> xring(static_cast<std::size_t>(depth) * N, 0.0);

        for (long path = begin; path < end; ++path) {
            for (int i = 0; i < N; ++i)
                xc[static_cast<std::size_t>(i)] = xi[static_cast<std::size_t>(i)] - xbar0;
            std::fill(aring.begin(), aring.end(), 0.0);

            for (int k = 0; k <= M; ++k) {
                double* arow = &aring[static_cast<std::size_t>(k % depth) * N];
                double* xrow = &xring[static_cast<std::size_t>(k % depth) * N];
                const double u = ctrl[static_cast<std::size_t>(k)];
                double asum = 0.0, amax = 0.0, ss = 0.0;
                for (int i = 0; i < N; ++i) {
                    const double xci = xc[static_cast<std::size_t>(i)];
                    const double ai = -u * xci;
                    arow[i] = ai;
                    xrow[i] = xci;
                    asum += ai;
                    amax = std::max(amax, std::abs(ai));
                    ss += xci * xci;
                }
                if (amax > 0.0) a.clearing = std::max(a.clearing, std::abs(asum) / amax);
                a.den[static_cast<std::size_t>(k)] += ss;
                if (k >= 1) {
                    const double* prev = &xring[static_cast<std::size_t>((k - 1) % depth) * N];
                    double cross = 0.0;
                    for (int i = 0; i < N; ++i) cross += xc[static_cast<std::size_t>(i)] * prev[i];
                    a.num1[static_cast<std::size_t>(k) - 1] += cross;
                }
                for (int l = 0; l < n_atoms; ++l) {
                    const int lag = g.lag_steps[static_cast<std::size_t>(l)];
                    if (lag == 0 || lag > k) continue;
                    const double* past = &xring[static_cast<std::size_t>((k - lag) % depth) * N];
                    double cross = 0.0;
                    for (int i = 0; i < N; ++i) cross += xc[static_cast<std::size_t>(i)] * past[i];
                    a.num[static_cast<std::size_t>(l) * rows + static_cast<std::size_t>(k - lag)] += cross;
                }

                if (sample_sink && path < sample_sink->sample_paths)
                    for (int i = 0; i < N; ++i) {
                        sample_sink->xc[sample_sink->sample_index(path, k, i)] = xc[static_cast<std::size_t>(i)];
                        sample_sink->alpha[sample_sink->sample_index(path, k, i)] = arow[i];
                    }
                if (k == M) break;

                double zbar = 0.0;
                for (int i = 0; i < N; ++i) {
                    z[static_cast<std::size_t>(i)] =
                        rng.normal(static_cast<std::uint64_t>(path), static_cast<std::uint64_t>(k), i);
                    zbar += z[static_cast<std::size_t>(i)];
                }
                zbar /= N;
                for (int i = 0; i < N; ++i) {
                    double drift = 0.0;
                    for (int l = 0; l < n_atoms; ++l) {
                        const int lag = g.lag_steps[static_cast<std::size_t>(l)];
                        if (lag > k) continue;
                        drift += g.lag_weights[static_cast<std::size_t>(l)] *
                                 aring[static_cast<std::size_t>((k - lag) % depth) * N + i];
                    }
                    const double dwci = sq * (z[static_cast<std::size_t>(i)] - zbar);
                    if (sample_sink && path < sample_sink->sample_paths)
                        sample_sink->dwc[sample_sink->sample_index(path, k, i)] = dwci;
                    xc[static_cast<std::size_t>(i)] += drift * dt + dwci;
                    if (!(std::abs(xc[static_cast<std::size_t>(i)]) < 1e9))
                        fail(ErrorCode::blowup, "forward state exceeded the stability threshold");
                }
            }
        }
        acc[static_cast<std::size_t>(blk)] = std::move(a);
    });

    ForwardStats st;
    st.num.assign(static_cast<std::size_t>(n_atoms) * rows, 0.0);
    st.num1.assign(static_cast<std::size_t>(M), 0.0);
    st.den.assign(rows, 0.0);
    for (const auto& a : acc) {
        for (std::size_t i = 0; i < st.num.size(); ++i) st.num[i] += a.num[i];
        for (std::size_t i = 0; i < st.num1.size(); ++i) st.num1[i] += a.num1[i];
        for (std::size_t i = 0; i < st.den.size(); ++i) st.den[i] += a.den[i];
        st.clearing_sup = std::max(st.clearing_sup, a.clearing);
    }
    return st;
}

// Ratio with the 0/0 -> 0 convention: a degenerate (deterministic symmetric)
// ensemble has Xc = 0 where the true adjoint values are 0 as well, so the zero
// limit reproduces them. A vanishing feature moment with a non-vanishing cross
// moment cannot arise from the simulated dynamics and is reported as singular.
inline double safe_ratio(double num, double den) {
    if (den > 0.0) return num / den;
    if (num != 0.0)
        fail(ErrorCode::regression_singular, "feature second moment vanishes with a nonzero cross moment");
    return 0.0;
}

struct Ratios {
    std::vector<double> rho;       // (L+1) x (M+1) atom-lag transfer ratios
    std::vector<double> rho_step;  // M one-step ratios
};

inline Ratios transfer_ratios(const FabsdeGrid& g, const ForwardStats& st) {
    const std::size_t rows = st.den.size();
    const int n_atoms = static_cast<int>(g.lag_steps.size());
    Ratios r;
    r.rho.assign(static_cast<std::size_t>(n_atoms) * rows, 0.0);
    r.rho_step.assign(st.num1.size(), 0.0);
    for (int l = 0; l < n_atoms; ++l)
        for (std::size_t k = 0; k < rows; ++k) {
            const std::size_t at = static_cast<std::size_t>(l) * rows + k;
            r.rho[at] = g.lag_steps[static_cast<std::size_t>(l)] == 0 ? 1.0 : safe_ratio(st.num[at], st.den[k]);
        }
    for (std::size_t k = 0; k < st.num1.size(); ++k) r.rho_step[k] = safe_ratio(st.num1[k], st.den[k]);
    return r;
}

// Backward coefficient sweep at homotopy level lambda. One conditional-
// expectation Euler step reads Y_k = E[Y_{k+1}|F_k] + dt * driver_k with
// driver = lambda A1 (q a^i + eps Xc^i) and a^i = -u_k Xc^i the control the
// forward pass actually used, so in coefficients
//   eta_k = rho_step_k eta_{k+1} + dt lambda A1 (eps - q u_k).
inline std::vector<double> backward_eta(const GameParams& p, const FabsdeGrid& g, const Ratios& r,
                                        const std::vector<double>& ctrl, double lambda, double dt) {
    const int M = g.n_steps;
    const double a1 = coupling_a1(p);
    std::vector<double> eta(static_cast<std::size_t>(M) + 1);
    eta[static_cast<std::size_t>(M)] = lambda * p.c * a1;
    for (int k = M - 1; k >= 0; --k)
        eta[static_cast<std::size_t>(k)] =
            r.rho_step[static_cast<std::size_t>(k)] * eta[static_cast<std::size_t>(k) + 1] +
            dt * lambda * a1 * (p.epsilon - p.q * ctrl[static_cast<std::size_t>(k)]);
    return eta;
}

// Anticipated combination etat_k = sum_l w_l rho_{l,k} eta_{k+L_l}, with
// eta = 0 beyond the horizon (states after T carry no adjoint).
inline std::vector<double> assemble_etat(const FabsdeGrid& g, const std::vector<double>& rho,
                                         const std::vector<double>& eta) {
    const int M = g.n_steps;
    const std::size_t rows = static_cast<std::size_t>(M) + 1;
    std::vector<double> etat(rows, 0.0);
    for (int k = 0; k <= M; ++k) {
        double s = 0.0;
        for (std::size_t l = 0; l < g.lag_steps.size(); ++l) {
            const int j = k + g.lag_steps[l];
            if (j > M) continue;
            s += g.lag_weights[l] * rho[l * rows + static_cast<std::size_t>(k)] * eta[static_cast<std::size_t>(j)];
        }
        etat[static_cast<std::size_t>(k)] = s;
    }
    return etat;
}

// Relative L2 distance between control-coefficient profiles, weighted by the
// ensemble second moments (an empirical ||Y' - Y|| / ||Y||).
inline double coefficient_residual(const std::vector<double>& u_new, const std::vector<double>& u_old,
                                   const std::vector<double>& m2, double dt) {
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < u_new.size(); ++k) {
        const double d = u_new[k] - u_old[k];
        num += d * d * m2[k] * dt;
        den += u_new[k] * u_new[k] * m2[k] * dt;
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

}  // namespace detail

// Picard / homotopy driver. The work state is the control-coefficient profile
// u_k = q + etat_k (the simulated control is a^i = -u_k Xc^i). After the last
// stage converges, one extra forward pass under the converged coefficients
// refreshes the stored transfer ratios, moments, and diagnostics sample so
// that all stored fields describe one consistent simulation.
inline FabsdeSolution solve_fabsde(const GameParams& p, const FabsdeConfig& cfg, std::uint64_t seed) {
    require_valid(p);
    detail::validate_fabsde_config(cfg);
    const auto g = detail::fabsde_grid(p, cfg.dt);
    const int M = g.n_steps;
    const double dt = p.horizon / M;
    const std::size_t rows = static_cast<std::size_t>(M) + 1;

    FabsdeSolution sol;
    sol.params = p;
    sol.dt = dt;
    sol.n_steps = M;
    sol.n_paths = cfg.n_paths;
    sol.seed = seed;
    sol.lag_steps = g.lag_steps;
    sol.lag_weights = g.lag_weights;

    std::vector<double> eta(rows, 0.0), etat(rows, 0.0);
    std::vector<double> ctrl(rows, p.q);  // lambda = 0 limit: myopic lending only

    for (int stage = 1; stage <= cfg.homotopy_steps; ++stage) {
        const double lambda = static_cast<double>(stage) / cfg.homotopy_steps;
        double damping = cfg.damping;
        double last_res = -1.0;
        bool stage_ok = false;

        for (int iter = 1; iter <= cfg.n_picard && !stage_ok; ++iter) {
            const auto st = detail::fabsde_forward(p, g, ctrl, cfg.n_paths, seed, cfg.threads, nullptr);
            const auto r = detail::transfer_ratios(g, st);
            const auto eta_new = detail::backward_eta(p, g, r, ctrl, lambda, dt);
            const auto etat_new = detail::assemble_etat(g, r.rho, eta_new);

            std::vector<double> u_new(rows);
            for (std::size_t k = 0; k < rows; ++k) u_new[k] = p.q + etat_new[k];
            const double res = detail::coefficient_residual(u_new, ctrl, st.den, dt);
            sol.residuals.push_back(PicardRecord{iter, lambda, res});

            if (last_res >= 0.0 && res > last_res) damping = std::max(0.5 * damping, 1.0 / 64.0);
            last_res = res;

            for (std::size_t k = 0; k < rows; ++k) {
                eta[k] = damping * eta_new[k] + (1.0 - damping) * eta[k];
                etat[k] = damping * etat_new[k] + (1.0 - damping) * etat[k];
                ctrl[k] = p.q + etat[k];
            }
            if (res <= cfg.picard_tol) stage_ok = true;
        }
        if (stage == cfg.homotopy_steps && !stage_ok) {
            std::string hist;
            for (const auto& rec : sol.residuals)
                hist += " " + format_double(rec.residual);
            fail(ErrorCode::no_convergence, "picard residual above tolerance; history:" + hist);
        }
    }

    // consistency pass: simulate once more under the converged coefficients
    sol.sample_paths = std::min<long>(cfg.store_paths, cfg.n_paths);
    const std::size_t sample_len =
        static_cast<std::size_t>(sol.sample_paths) * rows * static_cast<std::size_t>(p.n_players);
    sol.xc.assign(sample_len, 0.0);
    sol.alpha.assign(sample_len, 0.0);
    sol.dwc.assign(sample_len, 0.0);
    const auto st = detail::fabsde_forward(p, g, ctrl, cfg.n_paths, seed, cfg.threads, &sol);
    const auto r = detail::transfer_ratios(g, st);
    sol.rho = r.rho;
    sol.rho_step = r.rho_step;
    sol.m2.assign(rows, 0.0);
    const double samples = static_cast<double>(cfg.n_paths) * p.n_players;
    for (std::size_t k = 0; k < rows; ++k) sol.m2[k] = st.den[k] / samples;
    sol.clearing_sup = st.clearing_sup;
    sol.eta = eta;
    sol.etat = detail::assemble_etat(g, r.rho, eta);
    sol.converged = true;
    return sol;
}

// Open-loop controls along the stored sample paths, per (path, time, player).
inline std::vector<double> openloop_controls(const FabsdeSolution& sol) {
    if (!sol.converged) fail(ErrorCode::not_converged, "solution did not converge");
    return sol.alpha;
}

// Off-diagonal adjoint Y^{i,j} (j != i) with the forward states frozen: the
// linear advanced backward equation has driver -(lambda/N)(q a^i + eps Xc^i)
// and terminal -(c/N) Xc^i_T, so its proportional coefficient obeys
//   gamma_k = rho_step_k gamma_{k+1} - (dt/N) (eps - q u_k),  gamma_M = -c/N.
// Algebraically gamma = -eta / (N - 1): the recursion is the diagonal one
// scaled by -1/(N A1). Solved independently here so tests can verify that.
inline std::vector<double> solve_offdiagonal(FabsdeSolution& sol, const GameParams& p, const FabsdeConfig& cfg) {
    (void)cfg;
    if (!sol.converged) fail(ErrorCode::not_converged, "solution did not converge");
    const int M = sol.n_steps;
    std::vector<double> gamma(static_cast<std::size_t>(M) + 1);
    gamma[static_cast<std::size_t>(M)] = -p.c / p.n_players;
    for (int k = M - 1; k >= 0; --k) {
        const double u = p.q + sol.etat[static_cast<std::size_t>(k)];
        gamma[static_cast<std::size_t>(k)] =
            sol.rho_step[static_cast<std::size_t>(k)] * gamma[static_cast<std::size_t>(k) + 1] -
            sol.dt / p.n_players * (p.epsilon - p.q * u);
    }
    sol.gamma_off = gamma;
    return gamma;
}

// Deterministic algebra check: reassembling the anticipated coefficient from
// the stored eta and transfer ratios must reproduce the stored etat.
inline double anticipation_residual(const FabsdeSolution& sol) {
    detail::FabsdeGrid g;
    g.n_steps = sol.n_steps;
    g.lag_steps = sol.lag_steps;
    g.lag_weights = sol.lag_weights;
    const auto re = detail::assemble_etat(g, sol.rho, sol.eta);
    double sup = 0.0;
    for (std::size_t k = 0; k < re.size(); ++k) sup = std::max(sup, std::abs(re[k] - sol.etat[k]));
    return sup;
}

// Clearing-house diagnostics on the stored sample: sup over (path, time) of
// |mean_i Y^ii| (should vanish structurally under the centered reduction).
inline double ybar_sup(const FabsdeSolution& sol) {
    double sup = 0.0;
    for (long path = 0; path < sol.sample_paths; ++path)
        for (int k = 0; k <= sol.n_steps; ++k) {
            double s = 0.0;
            for (int i = 0; i < sol.params.n_players; ++i) s += sol.ydiag(path, k, i);
            sup = std::max(sup, std::abs(s / sol.params.n_players));
        }
    return sup;
}

struct MartingaleCheck {
    double mean = 0.0;
    double se = 0.0;
    long n = 0;
};

// Pooled martingale residual on the stored sample: increments
//   Y_{k+1} - Y_k + driver_k dt - Z_k . dW_k
// should have mean 0 within Monte Carlo error. Z . dW collapses to
// eta_k sigma dWc^i under the proportional integrand.
inline MartingaleCheck martingale_check(const FabsdeSolution& sol) {
    const auto& p = sol.params;
    const double a1 = coupling_a1(p);
    std::vector<double> incr;
    incr.reserve(static_cast<std::size_t>(sol.sample_paths) * sol.n_steps * p.n_players);
    for (long path = 0; path < sol.sample_paths; ++path)
        for (int k = 0; k < sol.n_steps; ++k)
            for (int i = 0; i < p.n_players; ++i) {
                const double driver =
                    a1 * (p.q * sol.control(path, k, i) + p.epsilon * sol.xc[sol.sample_index(path, k, i)]);
                const double zdw = sol.eta[static_cast<std::size_t>(k)] * sol.dwc[sol.sample_index(path, k, i)];
                incr.push_back(sol.ydiag(path, k + 1, i) - sol.ydiag(path, k, i) + driver * sol.dt - zdw);
            }
    MartingaleCheck out;
    out.n = static_cast<long>(incr.size());
    out.mean = mean(incr);
    out.se = standard_error(incr);
    return out;
}

// CSV: per-iteration residual history.
inline Table fabsde_residual_table(const FabsdeSolution& sol) {
    Table t;
    t.header({"iter", "lambda", "residual"});
    for (const auto& r : sol.residuals)
        t.push_row({format_int(r.iteration), format_double(r.lambda), format_double(r.residual)});
    return t;
}

// CSV: per-time summary over the stored sample paths.
inline Table fabsde_summary_table(const FabsdeSolution& sol) {
    Table t;
    t.header({"t", "mean_Ydiag", "mean_control", "clearing_residual"});
    const long P = sol.sample_paths;
    const int N = sol.params.n_players;
    for (int k = 0; k <= sol.n_steps; ++k) {
        double ysum = 0.0, asum = 0.0, clr = 0.0;
        for (long path = 0; path < P; ++path) {
            double ys = 0.0, as = 0.0, amax = 0.0;
            for (int i = 0; i < N; ++i) {
                ys += sol.ydiag(path, k, i);
                const double ai = sol.control(path, k, i);
                as += ai;
                amax = std::max(amax, std::abs(ai));
            }
            ysum += ys / N;
            asum += as / N;
            if (amax > 0.0) clr = std::max(clr, std::abs(as) / amax);
        }
        const double denom = std::max<long>(P, 1);
        t.push_row({format_double(sol.dt * k), format_double(ysum / denom), format_double(asum / denom),
                   format_double(clr)});
    }
    return t;
}

}  // namespace gamelab
