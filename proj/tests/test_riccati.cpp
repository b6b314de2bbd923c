#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "gamelab/riccati.hpp"

using namespace gamelab;

namespace {
GameParams bench(int n, double q, double eps, double c, double T) {
    GameParams p;
    p.n_players = n;
    p.sigma = 1.0;
    p.q = q;
    p.epsilon = eps;
    p.c = c;
    p.horizon = T;
    p.delay = 0.0;
    return p;
}

// Independent closed form for q = 0, c = 0:
//   phi(t) = sqrt(eps/a) * tanh(sqrt(a*eps) (T - t)),  a = 1 - 1/N.
double tanh_oracle(double eps, int n, double T, double t) {
    const double a = 1.0 - 1.0 / n;
    return std::sqrt(eps / a) * std::tanh(std::sqrt(a * eps) * (T - t));
}
}  // namespace

TEST_CASE("rk4 matches the tanh closed form everywhere on the grid") {
    const auto p = bench(2, 0.0, 1.0, 0.0, 1.0);
    const auto sol = solve_riccati(p, 1e-3);
    REQUIRE(sol.n_steps == 1000);
    double sup = 0.0;
    for (int k = 0; k <= sol.n_steps; ++k) {
        const double exact = tanh_oracle(1.0, 2, 1.0, sol.t_grid[static_cast<std::size_t>(k)]);
        sup = std::max(sup, std::abs(sol.phi[static_cast<std::size_t>(k)] - exact));
    }
    CHECK(sup <= 1e-8);
    // frozen value: phi(0) = sqrt(2) tanh(sqrt(0.5)) = 0.861057171580548...
    CHECK(sol.phi[0] == doctest::Approx(0.861057171580548).epsilon(1e-10));
}

TEST_CASE("terminal value and gain are exact") {
    const auto p = bench(4, 1.0, 2.0, 1.5, 2.0);
    const auto sol = solve_riccati(p, 1e-3);
    CHECK(sol.phi.back() == p.c);
    CHECK(nodelay_feedback_gain(sol, p.horizon) == p.q + (1.0 - 1.0 / p.n_players) * p.c);
}

TEST_CASE("grid refinement is converged below 1e-8 on a long horizon") {
    const auto p = bench(10, 1.0, 2.0, 1.0, 20.0);
    const auto coarse = solve_riccati(p, 2e-3);
    const auto fine = solve_riccati(p, 1e-3);
    double sup = 0.0;
    for (int k = 0; k <= coarse.n_steps; ++k)
        sup = std::max(sup, std::abs(coarse.phi[static_cast<std::size_t>(k)] -
                                     fine.phi[static_cast<std::size_t>(2 * k)]));
    CHECK(sup <= 1e-8);
}

TEST_CASE("solution reproduces the ode derivative at interior nodes") {
    const auto p = bench(3, 1.0, 2.0, 1.0, 1.0);
    const auto sol = solve_riccati(p, 5e-4);
    const double n = p.n_players;
    const double b = 2.0 * p.q * (1.0 - 1.0 / (2.0 * n));
    const double a = 1.0 - 1.0 / n;
    const double r = p.epsilon - p.q * p.q;
    double sup = 0.0;
    for (int k = 1; k < sol.n_steps; ++k) {
        const double y = sol.phi[static_cast<std::size_t>(k)];
        const double lhs = (sol.phi[static_cast<std::size_t>(k) + 1] - sol.phi[static_cast<std::size_t>(k) - 1]) /
                           (2.0 * sol.dt);
        sup = std::max(sup, std::abs(lhs - (b * y + a * y * y - r)));
    }
    CHECK(sup <= 1e-6);
}

TEST_CASE("phi stays in [0, steady state max] and grows with epsilon - q^2") {
    const double q = 1.0;
    std::vector<double> at0;
    for (double eps : {1.5, 2.0, 3.0}) {
        const auto p = bench(5, q, eps, 0.5, 2.0);
        const auto sol = solve_riccati(p, 1e-3);
        const double n = p.n_players;
        const double b = 2.0 * q * (1.0 - 1.0 / (2.0 * n));
        const double a = 1.0 - 1.0 / n;
        const double r = eps - q * q;
        const double steady = (-b + std::sqrt(b * b + 4.0 * a * r)) / (2.0 * a);
        const double hi = std::max(p.c, steady) * (1.0 + 1e-12);
        for (double v : sol.phi) {
            CHECK(v >= 0.0);
            CHECK(v <= hi);
        }
        at0.push_back(sol.phi[0]);
    }
    CHECK(at0[0] < at0[1]);
    CHECK(at0[1] < at0[2]);
}

TEST_CASE("interpolation agrees with grid nodes and rejects out-of-range times") {
    const auto p = bench(2, 0.0, 1.0, 0.5, 1.0);
    const auto sol = solve_riccati(p, 1e-2);
    CHECK(riccati_phi(sol, 0.0) == sol.phi[0]);
    CHECK(riccati_phi(sol, 0.5) == sol.phi[50]);
    const double mid = 0.5 * (sol.phi[10] + sol.phi[11]);
    CHECK(riccati_phi(sol, sol.t_grid[10] + 0.5 * sol.dt) == doctest::Approx(mid).epsilon(1e-12));
    CHECK_THROWS_AS(riccati_phi(sol, -0.1), Error);
    CHECK_THROWS_AS(riccati_phi(sol, 1.1), Error);
}

TEST_CASE("validation: epsilon below q^2 rejected, equality accepted with flag") {
    auto p = bench(3, 1.0, 0.5, 0.0, 1.0);  // eps < q^2
    CHECK_THROWS_AS(solve_riccati(p, 1e-3), Error);
    try {
        solve_riccati(p, 1e-3);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::convexity_violated);
    }

    p = bench(3, 1.0, 1.0, 0.5, 1.0);  // eps == q^2 exactly
    const auto sol = solve_riccati(p, 1e-3);
    CHECK(sol.boundary_epsilon_eq_q2);
    // the full-game validation rejects the same parameters
    CHECK(!validate_params(p).empty());
}

TEST_CASE("systemic closed form: exact at zero, matches tables, monotone") {
    auto p = bench(4, 0.0, 1.0, 0.0, 1.0);
    CHECK(systemic_prob_closed_form(p, 0.0) == 1.0);
    // 2 Phi(-0.6) from standard normal tables
    CHECK(systemic_prob_closed_form(p, -0.3) == doctest::Approx(0.5485062).epsilon(1e-6));
    CHECK(systemic_prob_closed_form(p, -0.3) > systemic_prob_closed_form(p, -0.5));
    auto p10 = bench(10, 0.0, 1.0, 0.0, 1.0);
    CHECK(systemic_prob_closed_form(p10, -0.3) < systemic_prob_closed_form(p, -0.3));
    CHECK_THROWS_AS(systemic_prob_closed_form(p, 0.1), Error);
}

TEST_CASE("csv table has the contract header and grid length") {
    const auto p = bench(2, 0.0, 1.0, 0.0, 1.0);
    const auto sol = solve_riccati(p, 0.1);
    const auto t = riccati_table(sol);
    REQUIRE(t.columns == std::vector<std::string>{"t", "phi", "gain"});
    CHECK(t.rows.size() == 11);
}
