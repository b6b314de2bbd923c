#pragma once

#include <cmath>
#include <vector>

#include "gamelab/csv.hpp"
#include "gamelab/errors.hpp"
#include "gamelab/params.hpp"
#include "gamelab/util.hpp"

namespace gamelab {

// Benchmark without repayment delay: the spread-feedback gain solves a scalar
// Riccati ODE backward from the terminal penalty,
//   phi'(t) = 2 q (1 - 1/(2N)) phi + (1 - 1/N) phi^2 - (eps - q^2),
//   phi(T)  = c,
// and the equilibrium control is alpha^i_t = [q + (1 - 1/N) phi(t)] (xbar - x^i).
struct RiccatiSolution {
    GameParams params;
    double dt = 0.0;  // adjusted step (= horizon / n_steps)
    int n_steps = 0;
    std::vector<double> t_grid;  // ascending, size n_steps + 1
    std::vector<double> phi;     // phi(t_k)
    // Set when solved exactly at the degenerate boundary eps == q^2 (accepted
    // here with a warning; the full game validation rejects it).
    bool boundary_epsilon_eq_q2 = false;
};

namespace detail {
inline void riccati_validate(const GameParams& p, bool* boundary) {
    if (p.n_players < 2) fail(ErrorCode::degenerate_game, "need at least two banks");
    if (!(p.sigma > 0.0)) fail(ErrorCode::nonpositive, "sigma must be positive");
    if (!(p.horizon > 0.0)) fail(ErrorCode::nonpositive, "horizon must be positive");
    if (!(p.epsilon > 0.0)) fail(ErrorCode::nonpositive, "epsilon must be positive");
    if (p.q < 0.0) fail(ErrorCode::nonpositive, "q must be nonnegative");
    if (p.c < 0.0) fail(ErrorCode::nonpositive, "c must be nonnegative");
    if (p.q * p.q > p.epsilon) fail(ErrorCode::convexity_violated, "need q^2 <= epsilon");
    *boundary = (p.q * p.q == p.epsilon);
}
}  // namespace detail

inline RiccatiSolution solve_riccati(const GameParams& p, double dt_req) {
    RiccatiSolution sol;
    sol.params = p;
    detail::riccati_validate(p, &sol.boundary_epsilon_eq_q2);

    const int M = steps_for(p.horizon, dt_req);
    const double dt = p.horizon / M;
    sol.dt = dt;
    sol.n_steps = M;
    sol.t_grid.resize(static_cast<std::size_t>(M) + 1);
    for (int k = 0; k <= M; ++k) sol.t_grid[static_cast<std::size_t>(k)] = dt * k;
    sol.phi.assign(static_cast<std::size_t>(M) + 1, 0.0);

    const double n = static_cast<double>(p.n_players);
    const double b = 2.0 * p.q * (1.0 - 1.0 / (2.0 * n));
    const double a = 1.0 - 1.0 / n;
    const double r = p.epsilon - p.q * p.q;
    auto f = [&](double y) { return b * y + a * y * y - r; };

    // Classic RK4, stepping backward from phi(T) = c.
    double y = p.c;
    sol.phi[static_cast<std::size_t>(M)] = y;
    const double h = -dt;
    for (int k = M; k >= 1; --k) {
        const double k1 = f(y);
        const double k2 = f(y + 0.5 * h * k1);
        const double k3 = f(y + 0.5 * h * k2);
        const double k4 = f(y + h * k3);
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!std::isfinite(y) || std::abs(y) > 1e8) fail(ErrorCode::blowup, "riccati solution blew up");
        sol.phi[static_cast<std::size_t>(k) - 1] = y;
    }
    return sol;
}

// Linear interpolation of phi on [0, T].
inline double riccati_phi(const RiccatiSolution& sol, double t) {
    const double T = sol.params.horizon;
    const double tol = 1e-12 * std::max(1.0, T);
    if (t < -tol || t > T + tol) fail(ErrorCode::out_of_range, "time outside [0, horizon]");
    if (t < 0.0) t = 0.0;
    if (t > T) t = T;
    const double pos = t / sol.dt;
    int k = static_cast<int>(pos);
    if (k >= sol.n_steps) k = sol.n_steps - 1;
    const double frac = pos - k;
    const auto ku = static_cast<std::size_t>(k);
    return sol.phi[ku] * (1.0 - frac) + sol.phi[ku + 1] * frac;
}

// Feedback gain multiplying the spread (xbar - x^i) in the no-delay game.
inline double nodelay_feedback_gain(const RiccatiSolution& sol, double t) {
    return sol.params.q + (1.0 - 1.0 / sol.params.n_players) * riccati_phi(sol, t);
}

// Probability that the mean reserve level ever drops to `level` (<= 0) below
// its start by the horizon. The mean is control-free: a Brownian motion with
// volatility sigma/sqrt(N), so the reflection principle gives the exact value
//   P = 2 Phi(level * sqrt(N) / (sigma * sqrt(T))).
inline double systemic_prob_closed_form(const GameParams& p, double level) {
    if (p.n_players < 1) fail(ErrorCode::degenerate_game, "need at least one bank");
    if (!(p.sigma > 0.0) || !(p.horizon > 0.0)) fail(ErrorCode::nonpositive, "sigma and horizon must be positive");
    if (level > 0.0) fail(ErrorCode::bad_level, "default level must be <= 0");
    const double z = level * std::sqrt(static_cast<double>(p.n_players)) / (p.sigma * std::sqrt(p.horizon));
    return 2.0 * normal_cdf(z);
}

inline Table riccati_table(const RiccatiSolution& sol) {
    Table t;
    t.header({"t", "phi", "gain"});
    const double a = 1.0 - 1.0 / sol.params.n_players;
    for (int k = 0; k <= sol.n_steps; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        t.push_row({format_double(sol.t_grid[ku]), format_double(sol.phi[ku]),
                    format_double(sol.params.q + a * sol.phi[ku])});
    }
    return t;
}

}  // namespace gamelab
