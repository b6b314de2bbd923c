#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "gamelab/csv.hpp"
#include "gamelab/errors.hpp"
#include "gamelab/params.hpp"
#include "gamelab/util.hpp"

namespace gamelab {

// Closed-loop equilibrium structure for the delayed game (repayment measure
// delta_0 - delta_tau, tau > 0). The equilibrium value of bank i is
//
//   V^i(t, x, past) = E0(t) S^2 + 2 S Int E1(t, s-t) m_s ds
//                     + IntInt E2(t, s-t, r-t) m_s m_r ds dr + E3(t),
//
// with S = xbar - x^i and m_s = (abar_s - alpha^i_s) on s in [t - tau, t).
// The kernels solve a transport system backward from the horizon:
//
//   E0'(t) + eps/2 = 2 A2 K(t)^2 + 2 q K(t) + q^2/2,     K = E1(t,0) + E0(t)
//   (d_t - d_s) E1(t,s)    = (2 A2 K + q) P(t,s),        P = E2(t,s,0) + E1(t,s)
//   (d_t - d_s - d_r) E2   = 2 A2 P(t,s) P(t,r)
//   E3'(t) = -A1 sigma^2 E0(t)
//
// with E0(T) = c/2, E1(T,.) = 0, E2(T,.,.) = 0, E3(T) = 0, A1 = 1 - 1/N,
// A2 = 1 - 1/N^2, and the refill (boundary) identities for t < T:
//
//   E1(t, -tau)    = -E0(t)
//   E2(t, s, -tau) = -E1(t, s)      (E2 symmetric in its lag arguments)
//
// Discretization: joint step dt with M = T/dt and m = tau/dt integers; lags
// are indexed ascending, s_a = -tau + a dt (a = m is lag zero). The transport
// steps move data one lag index per time step (exact characteristic tracking),
// sources are evaluated at the upwind node (first order), and E0 uses a Heun
// predictor-corrector. Memory integrals are discretized with the left rule
// over [t - tau, t): sum over lags l = 1..m with weight dt.
struct EKernels {
    GameParams params;
    double dt = 0.0;
    int n_steps = 0;  // M
    int n_lags = 0;   // m
    std::vector<double> t_grid;   // size M+1, ascending
    std::vector<double> s_grid;   // size m+1, ascending from -tau to 0
    std::vector<double> e0, e3;   // size M+1
    std::vector<double> e1;       // (M+1) x (m+1), row k / lag-position a
    std::vector<double> e2_at0;   // (M+1) x (m+1): E2(t_k, s_a, 0)
    bool has_full_e2 = false;
    std::vector<double> e2;       // packed symmetric slices, (M+1) x tri, tri = (m+1)(m+2)/2

    std::size_t row(int k) const { return static_cast<std::size_t>(k) * static_cast<std::size_t>(n_lags + 1); }
    static std::size_t tri_index(int hi, int lo) {
        return static_cast<std::size_t>(hi) * (static_cast<std::size_t>(hi) + 1) / 2 + static_cast<std::size_t>(lo);
    }
    std::size_t tri_size() const {
        return static_cast<std::size_t>(n_lags + 1) * static_cast<std::size_t>(n_lags + 2) / 2;
    }

    double e1_at(int k, int a) const { return e1[row(k) + static_cast<std::size_t>(a)]; }
    double e2_at0_at(int k, int a) const { return e2_at0[row(k) + static_cast<std::size_t>(a)]; }
    double e1_lag0(int k) const { return e1_at(k, n_lags); }

    // Symmetric accessor into the full pair tensor.
    double e2_at(int k, int a, int b) const {
        const int hi = a > b ? a : b;
        const int lo = a > b ? b : a;
        return e2[static_cast<std::size_t>(k) * tri_size() + tri_index(hi, lo)];
    }

    double gain_k(int k) const { return e0[static_cast<std::size_t>(k)] + e1_lag0(k); }  // K(t_k)
};

struct KernelOptions {
    // Full pair tensor storage: -1 auto (keep when it fits in ~160 MB), 0 off, 1 on.
    int keep_full_e2 = -1;
};

namespace detail {

// Finds a joint grid: m lag steps over tau and M time steps over T with the
// same dt <= dt_req (up to rounding). Throws GRID_MISMATCH when tau and T do
// not share a commensurate step near the request.
inline void kernel_grid(const GameParams& p, double dt_req, int* out_m, int* out_M, double* out_dt) {
    if (!(dt_req > 0.0)) fail(ErrorCode::nonpositive, "dt must be positive");
    const int m0 = steps_for(p.delay, dt_req);
    const int cap = m0 * 8 + 1024;
    for (int m = m0; m <= cap; ++m) {
        const double dt = p.delay / m;
        const double Mreal = p.horizon / dt;
        const double Mround = std::round(Mreal);
        if (Mround >= 1.0 && std::abs(Mreal - Mround) <= 1e-9 * std::max(1.0, Mreal)) {
            *out_m = m;
            *out_M = static_cast<int>(Mround);
            *out_dt = dt;
            return;
        }
    }
    fail(ErrorCode::grid_mismatch, "no common step for horizon and delay near requested dt; pick dt dividing both");
}

inline double e0_rhs(const GameParams& p, double a2, double K) {
    return 2.0 * a2 * K * K + 2.0 * p.q * K + 0.5 * p.q * p.q - 0.5 * p.epsilon;
}

}  // namespace detail

inline EKernels solve_kernels(const GameParams& p, double dt_req, const KernelOptions& opt = {}) {
    require_valid(p);
    if (p.delay == 0.0) fail(ErrorCode::tau_zero, "delay kernels need tau > 0 (use the no-delay benchmark)");
    if (!has_default_measure(p))
        fail(ErrorCode::bad_delay, "structured kernels cover the two-point measure delta_0 - delta_tau");

    EKernels K;
    K.params = p;
    detail::kernel_grid(p, dt_req, &K.n_lags, &K.n_steps, &K.dt);
    const int M = K.n_steps;
    const int m = K.n_lags;
    const double dt = K.dt;

    K.t_grid.resize(static_cast<std::size_t>(M) + 1);
    for (int k = 0; k <= M; ++k) K.t_grid[static_cast<std::size_t>(k)] = dt * k;
    K.s_grid.resize(static_cast<std::size_t>(m) + 1);
    for (int a = 0; a <= m; ++a) K.s_grid[static_cast<std::size_t>(a)] = -p.delay + dt * a;

    const std::size_t width = static_cast<std::size_t>(m) + 1;
    const std::size_t tri = K.tri_size();
    if (opt.keep_full_e2 == 1) {
        K.has_full_e2 = true;
    } else if (opt.keep_full_e2 == -1) {
        K.has_full_e2 = (static_cast<std::size_t>(M + 1) * tri <= 20000000u);
    }

    K.e0.assign(static_cast<std::size_t>(M) + 1, 0.0);
    K.e3.assign(static_cast<std::size_t>(M) + 1, 0.0);
    K.e1.assign((static_cast<std::size_t>(M) + 1) * width, 0.0);
    K.e2_at0.assign((static_cast<std::size_t>(M) + 1) * width, 0.0);
    if (K.has_full_e2) K.e2.assign((static_cast<std::size_t>(M) + 1) * tri, 0.0);

    const double a1 = coupling_a1(p);
    const double a2 = coupling_a2(p);

    // Working slices (only two E2 triangles live at a time).
    std::vector<double> e1_old(width, 0.0), e1_new(width, 0.0);
    std::vector<double> e2_old(tri, 0.0), e2_new(tri, 0.0);
    std::vector<double> p_old(width, 0.0);

    // Terminal slice.
    K.e0[static_cast<std::size_t>(M)] = 0.5 * p.c;
    // e1 row M, e2 slice M, e3[M] already zero.

    auto persist = [&](int k, const std::vector<double>& e1s, const std::vector<double>& e2s) {
        std::memcpy(&K.e1[K.row(k)], e1s.data(), width * sizeof(double));
        for (int a = 0; a <= m; ++a)
            K.e2_at0[K.row(k) + static_cast<std::size_t>(a)] = e2s[EKernels::tri_index(m, a)];
        if (K.has_full_e2)
            std::memcpy(&K.e2[static_cast<std::size_t>(k) * tri], e2s.data(), tri * sizeof(double));
    };
    persist(M, e1_old, e2_old);

    for (int k = M - 1; k >= 0; --k) {
        const double e0_old = K.e0[static_cast<std::size_t>(k) + 1];
        const double K_old = e0_old + e1_old[width - 1];
        const double g_old = 2.0 * a2 * K_old + p.q;

        for (int a = 0; a <= m; ++a)
            p_old[static_cast<std::size_t>(a)] = e2_old[EKernels::tri_index(m, a)] + e1_old[static_cast<std::size_t>(a)];

        // E1 transport along (1,-1) characteristics, upwind source.
        for (int a = 1; a <= m; ++a)
            e1_new[static_cast<std::size_t>(a)] =
                e1_old[static_cast<std::size_t>(a) - 1] - dt * g_old * p_old[static_cast<std::size_t>(a) - 1];

        // E0 Heun step (E1 at lag zero on the new slice is already known).
        const double f1 = detail::e0_rhs(p, a2, K_old);
        const double e0_pred = e0_old - dt * f1;
        const double f2 = detail::e0_rhs(p, a2, e0_pred + e1_new[width - 1]);
        const double e0_new = e0_old - 0.5 * dt * (f1 + f2);
        K.e0[static_cast<std::size_t>(k)] = e0_new;
        if (!std::isfinite(e0_new) || std::abs(e0_new) > 1e8) fail(ErrorCode::blowup, "kernel sweep blew up");

        // Refill at the deepest lag.
        e1_new[0] = -e0_new;

        // E2 transport along (1,-1,-1), then refill the boundary row.
        for (int hi = 1; hi <= m; ++hi) {
            const double ph = p_old[static_cast<std::size_t>(hi) - 1];
            const std::size_t dst = EKernels::tri_index(hi, 0);
            const std::size_t src = EKernels::tri_index(hi - 1, 0);
            for (int lo = 1; lo <= hi; ++lo)
                e2_new[dst + static_cast<std::size_t>(lo)] =
                    e2_old[src + static_cast<std::size_t>(lo) - 1] -
                    dt * 2.0 * a2 * ph * p_old[static_cast<std::size_t>(lo) - 1];
        }
        for (int b = 0; b <= m; ++b)
            e2_new[EKernels::tri_index(b, 0)] = -e1_new[static_cast<std::size_t>(b)];

        // E3 by backward trapezoid of A1 sigma^2 E0.
        K.e3[static_cast<std::size_t>(k)] = K.e3[static_cast<std::size_t>(k) + 1] +
                                            0.5 * dt * a1 * p.sigma * p.sigma * (e0_new + e0_old);

        persist(k, e1_new, e2_new);
        e1_old.swap(e1_new);
        e2_old.swap(e2_new);
    }
    return K;
}

// ---- derived quantities ----

// Instantaneous lending gain ("liquidity rate") 2 E1(t,0) + 2 E0(t) + q at a
// grid node.
inline double liquidity_rate_at(const EKernels& K, int k) {
    if (k < 0 || k > K.n_steps) fail(ErrorCode::out_of_range, "step index outside grid");
    return 2.0 * K.e1_lag0(k) + 2.0 * K.e0[static_cast<std::size_t>(k)] + K.params.q;
}

// Linear interpolation of the liquidity rate on [0, T].
inline double liquidity_rate(const EKernels& K, double t) {
    const double T = K.params.horizon;
    const double tol = 1e-12 * std::max(1.0, T);
    if (t < -tol || t > T + tol) fail(ErrorCode::out_of_range, "time outside [0, horizon]");
    if (t < 0.0) t = 0.0;
    if (t > T) t = T;
    const double pos = t / K.dt;
    int k = static_cast<int>(pos);
    if (k >= K.n_steps) k = K.n_steps - 1;
    const double frac = pos - k;
    return liquidity_rate_at(K, k) * (1.0 - frac) + liquidity_rate_at(K, k + 1) * frac;
}

// Equilibrium feedback law: alpha^j_t = phi(t) (Xbar_t - X^j_t)
//                                      + sum_{l=1..m} psi(t, l dt) (abar - alpha^j)_{t - l dt} dt.
// phi(t) = 2 A1 (E1(t,0) + E0(t)) + q and psi(t, l dt) = 2 A1 (E2(t, -l dt, 0) + E1(t, -l dt)).
struct FeedbackLaw {
    double dt = 0.0;
    int n_steps = 0;  // M
    int n_lags = 0;   // m
    std::vector<double> t_grid;
    std::vector<double> phi;  // size M+1
    std::vector<double> psi;  // (M+1) x (m+1); psi[k*(m+1)+l] is the kernel at lag l*dt

    double psi_at(int k, int l) const {
        return psi[static_cast<std::size_t>(k) * static_cast<std::size_t>(n_lags + 1) + static_cast<std::size_t>(l)];
    }
};

inline FeedbackLaw feedback_law(const EKernels& K) {
    FeedbackLaw law;
    law.dt = K.dt;
    law.n_steps = K.n_steps;
    law.n_lags = K.n_lags;
    law.t_grid = K.t_grid;
    const double two_a1 = 2.0 * coupling_a1(K.params);
    const std::size_t width = static_cast<std::size_t>(K.n_lags) + 1;
    law.phi.resize(static_cast<std::size_t>(K.n_steps) + 1);
    law.psi.resize((static_cast<std::size_t>(K.n_steps) + 1) * width);
    for (int k = 0; k <= K.n_steps; ++k) {
        law.phi[static_cast<std::size_t>(k)] = two_a1 * K.gain_k(k) + K.params.q;
        for (int l = 0; l <= K.n_lags; ++l) {
            const int a = K.n_lags - l;  // lag l*dt sits at ascending position m - l
            law.psi[static_cast<std::size_t>(k) * width + static_cast<std::size_t>(l)] =
                two_a1 * (K.e2_at0_at(k, a) + K.e1_at(k, a));
        }
    }
    return law;
}

// ---- value function ----

// Control history on consecutive grid steps; row r holds all banks' controls
// at step first_step + r. An empty table is shorthand for identically zero.
struct ControlHistory {
    int first_step = 0;
    std::vector<std::vector<double>> alpha;
};

// Equilibrium values of all banks at grid step k, given the state and the
// control history over [t_k - tau, t_k). Memory integrals use the trapezoid
// rule on lag nodes, with the (unknown) integrand at lag zero taken as 0:
// weight dt/2 at lag tau, dt at interior lags, so
//   w_l = dt      for l = 1..m-1,
//   w_m = dt / 2.
inline std::vector<double> value_function(const EKernels& K, int step_k, const std::vector<double>& x,
                                          const ControlHistory& hist) {
    const int N = K.params.n_players;
    if (step_k < 0 || step_k > K.n_steps) fail(ErrorCode::out_of_range, "step index outside grid");
    if (x.size() != static_cast<std::size_t>(N)) fail(ErrorCode::bad_config, "state vector has wrong length");

    const int m = K.n_lags;
    // Per lag l = 1..m: cross-sectional mean control and each bank's control.
    std::vector<double> abar_lag(static_cast<std::size_t>(m) + 1, 0.0);
    std::vector<double> a_lag((static_cast<std::size_t>(m) + 1) * static_cast<std::size_t>(N), 0.0);
    bool any_nonzero = false;
    if (!hist.alpha.empty()) {
        const int lo_needed = std::max(0, step_k - m);
        if (hist.first_step > lo_needed || hist.first_step + static_cast<int>(hist.alpha.size()) < step_k)
            fail(ErrorCode::history_length, "control history must cover [max(0, t - tau), t)");
        for (int l = 1; l <= m; ++l) {
            const int s = step_k - l;
            if (s < 0) break;
            const auto& row = hist.alpha[static_cast<std::size_t>(s - hist.first_step)];
            if (row.size() != static_cast<std::size_t>(N))
                fail(ErrorCode::history_length, "history rows need one control per bank");
            abar_lag[static_cast<std::size_t>(l)] = mean(row);
            for (int i = 0; i < N; ++i) {
                const double a = row[static_cast<std::size_t>(i)];
                a_lag[static_cast<std::size_t>(l) * N + static_cast<std::size_t>(i)] = a;
                if (a != 0.0) any_nonzero = true;
            }
        }
    }

    const double xbar = mean(x);
    const std::size_t ku = static_cast<std::size_t>(step_k);
    std::vector<double> values(static_cast<std::size_t>(N), 0.0);
    std::vector<double> mem(static_cast<std::size_t>(m) + 1, 0.0);
    auto weight = [&](int l) { return (l == m) ? 0.5 * K.dt : K.dt; };

    for (int i = 0; i < N; ++i) {
        const double spread = xbar - x[static_cast<std::size_t>(i)];
        double v = K.e0[ku] * spread * spread + K.e3[ku];
        if (any_nonzero) {
            bool own_nonzero = false;
            for (int l = 1; l <= m; ++l) {
                const double d = abar_lag[static_cast<std::size_t>(l)] -
                                 a_lag[static_cast<std::size_t>(l) * N + static_cast<std::size_t>(i)];
                mem[static_cast<std::size_t>(l)] = d;
                if (d != 0.0) own_nonzero = true;
            }
            if (own_nonzero) {
                double i1 = 0.0;
                for (int l = 1; l <= m; ++l)
                    i1 += weight(l) * K.e1_at(step_k, m - l) * mem[static_cast<std::size_t>(l)];
                v += 2.0 * spread * i1;

                if (!K.has_full_e2)
                    fail(ErrorCode::bad_config, "value with nonzero history needs the full pair tensor (keep_full_e2)");
                double i2 = 0.0;
                for (int l1 = 1; l1 <= m; ++l1) {
                    const double m1 = mem[static_cast<std::size_t>(l1)];
                    if (m1 == 0.0) continue;
                    for (int l2 = 1; l2 <= m; ++l2) {
                        const double m2 = mem[static_cast<std::size_t>(l2)];
                        if (m2 == 0.0) continue;
                        i2 += weight(l1) * weight(l2) * K.e2_at(step_k, m - l1, m - l2) * m1 * m2;
                    }
                }
                v += i2;
            }
        }
        values[static_cast<std::size_t>(i)] = v;
    }
    return values;
}

// ---- diagnostics ----

struct KernelDefect {
    double e0_sup = 0.0;
    double e1_sup = 0.0;
    double e2_sup = 0.0;
};

// Truncation defect of the stored solution measured with centered differences
// along the transport characteristics (independent of the sweep's own upwind
// stencil; expected O(dt) for this scheme).
inline KernelDefect pde_defect(const EKernels& K) {
    KernelDefect d;
    const GameParams& p = K.params;
    const double a2 = coupling_a2(p);
    const int M = K.n_steps;
    const int m = K.n_lags;
    const double inv2dt = 1.0 / (2.0 * K.dt);

    for (int k = 1; k <= M - 1; ++k) {
        const double Kk = K.gain_k(k);
        const double g = 2.0 * a2 * Kk + p.q;

        const double d0 = (K.e0[static_cast<std::size_t>(k) + 1] - K.e0[static_cast<std::size_t>(k) - 1]) * inv2dt -
                          detail::e0_rhs(p, a2, Kk);
        d.e0_sup = std::max(d.e0_sup, std::abs(d0));

        for (int a = 1; a <= m - 1; ++a) {
            const double pv = K.e2_at0_at(k, a) + K.e1_at(k, a);
            const double d1 = (K.e1_at(k + 1, a - 1) - K.e1_at(k - 1, a + 1)) * inv2dt - g * pv;
            d.e1_sup = std::max(d.e1_sup, std::abs(d1));
        }

        if (K.has_full_e2) {
            for (int hi = 1; hi <= m - 1; ++hi) {
                const double ph = K.e2_at0_at(k, hi) + K.e1_at(k, hi);
                for (int lo = 1; lo <= hi; ++lo) {
                    const double pl = K.e2_at0_at(k, lo) + K.e1_at(k, lo);
                    const double d2 =
                        (K.e2_at(k + 1, hi - 1, lo - 1) - K.e2_at(k - 1, hi + 1, lo + 1)) * inv2dt -
                        2.0 * a2 * ph * pl;
                    d.e2_sup = std::max(d.e2_sup, std::abs(d2));
                }
            }
        }
    }
    return d;
}

// Largest violation of the refill identities E1(t,-tau) = -E0(t) and
// E2(t,s,-tau) = -E1(t,s) over t < T (they are imposed exactly, so this
// should be zero up to representation).
inline double refill_residual(const EKernels& K) {
    double r = 0.0;
    for (int k = 0; k < K.n_steps; ++k) {
        r = std::max(r, std::abs(K.e1_at(k, 0) + K.e0[static_cast<std::size_t>(k)]));
        r = std::max(r, std::abs(K.e2_at0_at(k, 0) + K.e1_lag0(k)));
        if (K.has_full_e2)
            for (int b = 0; b <= K.n_lags; ++b)
                r = std::max(r, std::abs(K.e2_at(k, b, 0) + K.e1_at(k, b)));
    }
    return r;
}

// Re-runs the backward sweep with E0 and the source gain K(t) frozen to the
// stored solution. A consistent sweep reproduces E1/E2/E3 exactly.
inline EKernels resweep_frozen(const EKernels& src) {
    EKernels K = src;  // copy grids/params/E0; recompute the rest
    const GameParams& p = src.params;
    const int M = src.n_steps;
    const int m = src.n_lags;
    const double dt = src.dt;
    const double a1 = coupling_a1(p);
    const double a2 = coupling_a2(p);
    const std::size_t width = static_cast<std::size_t>(m) + 1;
    const std::size_t tri = src.tri_size();

    std::fill(K.e1.begin(), K.e1.end(), 0.0);
    std::fill(K.e2_at0.begin(), K.e2_at0.end(), 0.0);
    std::fill(K.e3.begin(), K.e3.end(), 0.0);
    if (K.has_full_e2) std::fill(K.e2.begin(), K.e2.end(), 0.0);

    std::vector<double> e1_old(width, 0.0), e1_new(width, 0.0);
    std::vector<double> e2_old(tri, 0.0), e2_new(tri, 0.0);
    std::vector<double> p_old(width, 0.0);

    auto persist = [&](int k, const std::vector<double>& e1s, const std::vector<double>& e2s) {
        std::memcpy(&K.e1[K.row(k)], e1s.data(), width * sizeof(double));
        for (int a = 0; a <= m; ++a)
            K.e2_at0[K.row(k) + static_cast<std::size_t>(a)] = e2s[EKernels::tri_index(m, a)];
        if (K.has_full_e2)
            std::memcpy(&K.e2[static_cast<std::size_t>(k) * tri], e2s.data(), tri * sizeof(double));
    };
    persist(M, e1_old, e2_old);

    for (int k = M - 1; k >= 0; --k) {
        const double e0_old = src.e0[static_cast<std::size_t>(k) + 1];
        const double K_old = e0_old + e1_old[width - 1];
        const double g_old = 2.0 * a2 * K_old + p.q;
        for (int a = 0; a <= m; ++a)
            p_old[static_cast<std::size_t>(a)] = e2_old[EKernels::tri_index(m, a)] + e1_old[static_cast<std::size_t>(a)];
        for (int a = 1; a <= m; ++a)
            e1_new[static_cast<std::size_t>(a)] =
                e1_old[static_cast<std::size_t>(a) - 1] - dt * g_old * p_old[static_cast<std::size_t>(a) - 1];
        e1_new[0] = -src.e0[static_cast<std::size_t>(k)];
        for (int hi = 1; hi <= m; ++hi) {
            const double ph = p_old[static_cast<std::size_t>(hi) - 1];
            const std::size_t dst = EKernels::tri_index(hi, 0);
            const std::size_t srcx = EKernels::tri_index(hi - 1, 0);
            for (int lo = 1; lo <= hi; ++lo)
                e2_new[dst + static_cast<std::size_t>(lo)] =
                    e2_old[srcx + static_cast<std::size_t>(lo) - 1] -
                    dt * 2.0 * a2 * ph * p_old[static_cast<std::size_t>(lo) - 1];
        }
        for (int b = 0; b <= m; ++b)
            e2_new[EKernels::tri_index(b, 0)] = -e1_new[static_cast<std::size_t>(b)];
        K.e3[static_cast<std::size_t>(k)] =
            K.e3[static_cast<std::size_t>(k) + 1] +
            0.5 * dt * a1 * p.sigma * p.sigma * (src.e0[static_cast<std::size_t>(k)] + e0_old);
        persist(k, e1_new, e2_new);
        e1_old.swap(e1_new);
        e2_old.swap(e2_new);
    }
    return K;
}

// ---- serialization ----

// Binary layout: magic "EKTN", u32 version (1 = without full pair tensor,
// 2 = with), u32 M, u32 m, f64 dt, then E0, E3, E1, E2(.,.,0) and, for
// version 2, the packed pair tensor.
inline void dump_kernels(const EKernels& K, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::io_error, "cannot open for writing: " + path);
    const char magic[4] = {'E', 'K', 'T', 'N'};
    const std::uint32_t version = K.has_full_e2 ? 2u : 1u;
    const std::uint32_t M = static_cast<std::uint32_t>(K.n_steps);
    const std::uint32_t m = static_cast<std::uint32_t>(K.n_lags);
    out.write(magic, 4);
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&M), 4);
    out.write(reinterpret_cast<const char*>(&m), 4);
    out.write(reinterpret_cast<const char*>(&K.dt), 8);
    auto put = [&out](const std::vector<double>& v) {
        out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    };
    put(K.e0);
    put(K.e3);
    put(K.e1);
    put(K.e2_at0);
    if (K.has_full_e2) put(K.e2);
    if (!out) fail(ErrorCode::io_error, "write failed: " + path);
}

inline EKernels load_kernels(const GameParams& p, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io_error, "cannot open for reading: " + path);
    char magic[4];
    std::uint32_t version = 0, M = 0, m = 0;
    double dt = 0.0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&version), 4);
    in.read(reinterpret_cast<char*>(&M), 4);
    in.read(reinterpret_cast<char*>(&m), 4);
    in.read(reinterpret_cast<char*>(&dt), 8);
    if (!in || std::memcmp(magic, "EKTN", 4) != 0 || (version != 1 && version != 2))
        fail(ErrorCode::io_error, "not a kernel dump: " + path);
    if (std::abs(M * dt - p.horizon) > 1e-9 * std::max(1.0, p.horizon) ||
        std::abs(m * dt - p.delay) > 1e-9 * std::max(1.0, p.delay))
        fail(ErrorCode::grid_mismatch, "kernel dump grid does not match the given horizon/delay");

    EKernels K;
    K.params = p;
    K.dt = dt;
    K.n_steps = static_cast<int>(M);
    K.n_lags = static_cast<int>(m);
    K.t_grid.resize(M + 1);
    for (std::uint32_t k = 0; k <= M; ++k) K.t_grid[k] = dt * k;
    K.s_grid.resize(m + 1);
    for (std::uint32_t a = 0; a <= m; ++a) K.s_grid[a] = -p.delay + dt * a;
    const std::size_t width = m + 1;
    K.has_full_e2 = (version == 2);
    K.e0.resize(M + 1);
    K.e3.resize(M + 1);
    K.e1.resize((M + 1) * width);
    K.e2_at0.resize((M + 1) * width);
    auto get = [&in, &path](std::vector<double>& v) {
        in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
        if (!in) fail(ErrorCode::io_error, "truncated kernel dump: " + path);
    };
    get(K.e0);
    get(K.e3);
    get(K.e1);
    get(K.e2_at0);
    if (K.has_full_e2) {
        K.e2.resize((M + 1) * K.tri_size());
        get(K.e2);
    }
    return K;
}

inline Table kernels_table(const EKernels& K) {
    Table t;
    t.header({"t", "E0", "E1_at_0", "liquidity"});
    for (int k = 0; k <= K.n_steps; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        t.push_row({format_double(K.t_grid[ku]), format_double(K.e0[ku]), format_double(K.e1_lag0(k)),
                    format_double(liquidity_rate_at(K, k))});
    }
    return t;
}

}  // namespace gamelab
