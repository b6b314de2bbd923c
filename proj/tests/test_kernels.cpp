#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <vector>

#include "gamelab/kernels.hpp"
#include "gamelab/simulate.hpp"

using namespace gamelab;

namespace {
GameParams delayed(int n, double q, double eps, double c, double T, double tau, double sigma = 1.0) {
    GameParams p;
    p.n_players = n;
    p.sigma = sigma;
    p.q = q;
    p.epsilon = eps;
    p.c = c;
    p.horizon = T;
    p.delay = tau;
    return p;
}

// Backward RK4 oracle for the reduced lag-zero ODE that rules the tau >= T
// regime: dE0/dt + eps/2 = 2 A2 E0^2 + 2 q E0 + q^2/2, E0(T) = c/2.
std::vector<double> reduced_e0_oracle(const GameParams& p, int M) {
    const double dt = p.horizon / M;
    const double a2 = 1.0 - 1.0 / (static_cast<double>(p.n_players) * p.n_players);
    auto f = [&](double y) { return 2.0 * a2 * y * y + 2.0 * p.q * y + 0.5 * p.q * p.q - 0.5 * p.epsilon; };
    std::vector<double> e0(static_cast<std::size_t>(M) + 1);
    double y = 0.5 * p.c;
    e0[static_cast<std::size_t>(M)] = y;
    const double h = -dt;
    for (int k = M; k >= 1; --k) {
        const double k1 = f(y);
        const double k2 = f(y + 0.5 * h * k1);
        const double k3 = f(y + 0.5 * h * k2);
        const double k4 = f(y + h * k3);
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        e0[static_cast<std::size_t>(k) - 1] = y;
    }
    return e0;
}
}  // namespace

TEST_CASE("terminal slice carries (c/2, 0, 0, 0) exactly") {
    const auto p = delayed(5, 0.5, 1.5, 0.8, 1.0, 0.25);
    const auto K = solve_kernels(p, 0.05);
    const int M = K.n_steps;
    CHECK(K.e0[static_cast<std::size_t>(M)] == 0.5 * p.c);
    CHECK(K.e3[static_cast<std::size_t>(M)] == 0.0);
    for (int a = 0; a <= K.n_lags; ++a) {
        CHECK(K.e1_at(M, a) == 0.0);
        CHECK(K.e2_at0_at(M, a) == 0.0);
        if (K.has_full_e2)
            for (int b = 0; b <= a; ++b) CHECK(K.e2_at(M, a, b) == 0.0);
    }
}

TEST_CASE("refill identities hold exactly for every interior time") {
    const auto p = delayed(10, 1.0, 2.0, 0.0, 2.0, 0.5);
    const auto K = solve_kernels(p, 0.01);
    REQUIRE(K.has_full_e2);
    CHECK(refill_residual(K) <= 1e-12);
    // spot check the corner: E2(t, -tau, -tau) = -E1(t, -tau) = +E0(t)
    for (int k = 0; k < K.n_steps; k += 17)
        CHECK(K.e2_at(k, 0, 0) == doctest::Approx(K.e0[static_cast<std::size_t>(k)]).epsilon(1e-15));
}

TEST_CASE("pair kernel is symmetric bitwise and consistent with its lag-zero slice") {
    const auto p = delayed(4, 0.6, 1.2, 0.3, 1.0, 0.2);
    const auto K = solve_kernels(p, 0.02);
    REQUIRE(K.has_full_e2);
    for (int k = 0; k <= K.n_steps; k += 7)
        for (int a = 0; a <= K.n_lags; ++a) {
            for (int b = 0; b <= K.n_lags; ++b)
                CHECK(K.e2_at(k, a, b) == K.e2_at(k, b, a));
            CHECK(K.e2_at0_at(k, a) == K.e2_at(k, a, K.n_lags));
        }
}

TEST_CASE("interior pde defect is first order: halving dt halves the sup norm") {
    const auto p = delayed(10, 1.0, 2.0, 0.0, 2.0, 0.5);
    const auto coarse = solve_kernels(p, 0.01);
    const auto fine = solve_kernels(p, 0.005);
    const auto dc = pde_defect(coarse);
    const auto df = pde_defect(fine);
    CHECK(dc.e1_sup > 0.0);
    CHECK(dc.e1_sup / df.e1_sup >= 1.8);
    CHECK(dc.e0_sup / df.e0_sup >= 1.8);
    CHECK(dc.e2_sup / df.e2_sup >= 1.8);
}

TEST_CASE("e0 at time zero converges with order at least one") {
    const auto p = delayed(5, 0.5, 1.5, 0.4, 1.0, 0.25);
    const double a = solve_kernels(p, 0.02).e0[0];
    const double b = solve_kernels(p, 0.01).e0[0];
    const double c = solve_kernels(p, 0.005).e0[0];
    const double d1 = std::abs(a - b);
    const double d2 = std::abs(b - c);
    CHECK(d2 > 0.0);
    CHECK(d1 / d2 >= 1.8);  // consecutive refinements shrink the change ~2x
}

TEST_CASE("re-sweeping with frozen E0 and gain reproduces all kernels") {
    const auto p = delayed(6, 0.8, 1.6, 0.5, 1.0, 0.25);
    const auto K = solve_kernels(p, 0.01);
    const auto R = resweep_frozen(K);
    double sup = 0.0;
    for (std::size_t i = 0; i < K.e1.size(); ++i) sup = std::max(sup, std::abs(K.e1[i] - R.e1[i]));
    for (std::size_t i = 0; i < K.e2.size(); ++i) sup = std::max(sup, std::abs(K.e2[i] - R.e2[i]));
    for (std::size_t i = 0; i < K.e3.size(); ++i) sup = std::max(sup, std::abs(K.e3[i] - R.e3[i]));
    CHECK(sup <= 1e-10);
}

TEST_CASE("liquidity rate ends at c + q and interpolates linearly") {
    const auto p = delayed(5, 1.0, 2.0, 0.7, 1.0, 0.2);
    const auto K = solve_kernels(p, 0.01);
    CHECK(liquidity_rate(K, p.horizon) == p.c + p.q);
    CHECK(liquidity_rate_at(K, 0) == liquidity_rate(K, 0.0));
    const double mid = 0.5 * (liquidity_rate_at(K, 10) + liquidity_rate_at(K, 11));
    CHECK(liquidity_rate(K, K.t_grid[10] + 0.5 * K.dt) == doctest::Approx(mid).epsilon(1e-12));
    CHECK_THROWS_AS(liquidity_rate(K, -0.2), Error);
    CHECK_THROWS_AS(liquidity_rate(K, 1.2), Error);
}

TEST_CASE("feedback law: terminal gain exact, memory kernel vanishes at T") {
    const auto p = delayed(5, 0.5, 1.5, 0.8, 1.0, 0.25);
    const auto K = solve_kernels(p, 0.01);
    const auto law = feedback_law(K);
    CHECK(law.phi[static_cast<std::size_t>(law.n_steps)] ==
          (1.0 - 1.0 / p.n_players) * p.c + p.q);
    for (int l = 0; l <= law.n_lags; ++l) CHECK(law.psi_at(law.n_steps, l) == 0.0);
}

TEST_CASE("tau >= T: lag-zero kernel is identically zero and E0 solves the reduced ode") {
    const auto p = delayed(5, 0.5, 1.5, 0.6, 1.0, 1.25);
    const auto K = solve_kernels(p, 2e-3);
    for (int k = 0; k <= K.n_steps; ++k) CHECK(K.e1_lag0(k) == 0.0);

    const auto oracle = reduced_e0_oracle(p, K.n_steps);
    double sup = 0.0;
    for (int k = 0; k <= K.n_steps; ++k)
        sup = std::max(sup, std::abs(K.e0[static_cast<std::size_t>(k)] - oracle[static_cast<std::size_t>(k)]));
    CHECK(sup <= 1e-4);

    // liquidity reduces to 2 E0 + q, and the reachable memory kernel is zero
    for (int k = 0; k <= K.n_steps; ++k)
        CHECK(liquidity_rate_at(K, k) == 2.0 * K.e0[static_cast<std::size_t>(k)] + p.q);
    const auto law = feedback_law(K);
    double reachable_psi = 0.0;
    for (int k = 0; k <= law.n_steps; ++k)
        for (int l = 1; l <= std::min(k, law.n_lags); ++l)
            reachable_psi = std::max(reachable_psi, std::abs(law.psi_at(k, l)));
    CHECK(reachable_psi == 0.0);
}

TEST_CASE("value function: terminal slice equals the terminal cost") {
    const auto p = delayed(4, 0.5, 1.5, 0.9, 1.0, 0.25);
    const auto K = solve_kernels(p, 0.05);
    const std::vector<double> x = {0.4, -0.1, 0.3, -0.6};
    const auto v = value_function(K, K.n_steps, x, {});
    REQUIRE(v.size() == 4);
    for (int i = 0; i < 4; ++i) CHECK(v[static_cast<std::size_t>(i)] == doctest::Approx(terminal_cost(p, i, x)).epsilon(1e-14));
}

TEST_CASE("value function: symmetric state and zero history give E3(t)") {
    const auto p = delayed(3, 0.5, 1.5, 0.4, 1.0, 0.2, 0.7);
    const auto K = solve_kernels(p, 0.02);
    const std::vector<double> x = {0.9, 0.9, 0.9};
    for (int k : {0, 13, K.n_steps}) {
        const auto v = value_function(K, k, x, {});
        for (double vi : v) CHECK(vi == doctest::Approx(K.e3[static_cast<std::size_t>(k)]).epsilon(1e-14));
    }
}

TEST_CASE("value function: translation invariance and empty-history start") {
    const auto p = delayed(4, 0.5, 1.5, 0.3, 1.0, 0.25);
    const auto K = solve_kernels(p, 0.025);
    const std::vector<double> x = {0.5, 0.0, -0.25, 0.75};
    std::vector<double> shifted = x;
    for (auto& v : shifted) v += 3.0;
    CHECK(value_function(K, 0, x, {}) == value_function(K, 0, shifted, {}));
    const auto v = value_function(K, 0, x, {});
    const double xbar = mean(x);
    for (int i = 0; i < 4; ++i) {
        const double s = xbar - x[static_cast<std::size_t>(i)];
        CHECK(v[static_cast<std::size_t>(i)] == K.e0[0] * s * s + K.e3[0]);
    }
}

TEST_CASE("value function enforces history coverage") {
    const auto p = delayed(3, 0.5, 1.5, 0.3, 1.0, 0.2);
    const auto K = solve_kernels(p, 0.02);  // m = 10
    const std::vector<double> x = {0.1, 0.0, -0.1};
    ControlHistory h;
    h.first_step = 18;  // step 20 needs coverage from step 10
    h.alpha.assign(2, std::vector<double>(3, 0.1));
    CHECK_THROWS_AS(value_function(K, 20, x, h), Error);
    try {
        value_function(K, 20, x, h);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::history_length);
    }
    h.first_step = 10;
    h.alpha.assign(10, std::vector<double>(3, 0.1));
    CHECK_NOTHROW(value_function(K, 20, x, h));
}

TEST_CASE("value function is a martingale along equilibrium paths (tower check)") {
    auto p = delayed(3, 0.3, 1.0, 0.2, 0.5, 0.1, 0.5);
    p.initial_reserves = {0.4, 0.0, -0.4};
    const double dt = 0.01;
    const auto K = solve_kernels(p, dt);
    REQUIRE(K.has_full_e2);
    const auto law = feedback_law(K);

    SimOptions opt;
    opt.store_trajectories = true;
    const long n_paths = 4000;
    const auto bundle = simulate_closed_loop(p, law, dt, n_paths, 99, opt);

    const int k0 = 25;
    const int m = K.n_lags;
    std::vector<double> incr(static_cast<std::size_t>(n_paths));
    for (long pa = 0; pa < n_paths; ++pa) {
        auto history = [&](int upto) {
            ControlHistory h;
            h.first_step = upto - m;
            for (int j = upto - m; j < upto; ++j) h.alpha.push_back(bundle.alpha_at(pa, j));
            return h;
        };
        const auto x0 = bundle.state_at(pa, k0);
        const auto x1 = bundle.state_at(pa, k0 + 1);
        const auto a0 = bundle.alpha_at(pa, k0);
        const auto a1 = bundle.alpha_at(pa, k0 + 1);
        const double v0 = value_function(K, k0, x0, history(k0))[0];
        const double v1 = value_function(K, k0 + 1, x1, history(k0 + 1))[0];
        const double f0 = running_cost(p, 0, x0, a0[0]);
        const double f1 = running_cost(p, 0, x1, a1[0]);
        incr[static_cast<std::size_t>(pa)] = v1 - v0 + 0.5 * dt * (f0 + f1);
    }
    const double bias = mean(incr);
    const double se = standard_error(incr);
    CHECK(std::abs(bias) <= 3.0 * se + 10.0 * dt * dt);
}

TEST_CASE("grid handling: adjusted dt divides both horizons, mismatch rejected") {
    auto p = delayed(3, 0.5, 1.5, 0.2, 1.0 / 3.0, 0.1);
    const auto K = solve_kernels(p, 0.01);
    CHECK(K.n_lags * K.dt == doctest::Approx(p.delay).epsilon(1e-12));
    CHECK(K.n_steps * K.dt == doctest::Approx(p.horizon).epsilon(1e-12));
    CHECK(K.dt <= 0.01 + 1e-15);

    p.horizon = 0.1 * 3.141592653589793;  // no commensurate step with tau = 0.1
    CHECK_THROWS_AS(solve_kernels(p, 0.01), Error);
    try {
        solve_kernels(p, 0.01);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::grid_mismatch);
    }
}

TEST_CASE("tau = 0 and non-canonical measures are rejected") {
    auto p = delayed(3, 0.5, 1.5, 0.2, 1.0, 0.0);
    CHECK_THROWS_AS(solve_kernels(p, 0.01), Error);
    try {
        solve_kernels(p, 0.01);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::tau_zero);
    }
    p.delay = 0.2;
    p.delay_measure = {{0.0, 1.0}, {0.1, -0.5}, {0.2, -0.5}};
    CHECK_THROWS_AS(solve_kernels(p, 0.01), Error);
}

TEST_CASE("binary dump/load round-trips bitwise and validates the grid") {
    const auto p = delayed(4, 0.5, 1.5, 0.3, 1.0, 0.25);
    const auto K = solve_kernels(p, 0.025);
    const std::string path = "kernels_test_dump.bin";
    dump_kernels(K, path);
    const auto L = load_kernels(p, path);
    CHECK(L.e0 == K.e0);
    CHECK(L.e1 == K.e1);
    CHECK(L.e2_at0 == K.e2_at0);
    CHECK(L.e3 == K.e3);
    CHECK(L.has_full_e2 == K.has_full_e2);
    if (K.has_full_e2) CHECK(L.e2 == K.e2);

    auto wrong = p;
    wrong.delay = 0.5;
    CHECK_THROWS_AS(load_kernels(wrong, path), Error);
    CHECK_THROWS_AS(load_kernels(p, "does_not_exist.bin"), Error);
    std::remove(path.c_str());
}

TEST_CASE("csv table has the contract header") {
    const auto p = delayed(3, 0.5, 1.5, 0.2, 1.0, 0.25);
    const auto K = solve_kernels(p, 0.05);
    const auto t = kernels_table(K);
    REQUIRE(t.columns == std::vector<std::string>{"t", "E0", "E1_at_0", "liquidity"});
    CHECK(t.rows.size() == static_cast<std::size_t>(K.n_steps) + 1);
}

TEST_CASE("liquidity at time zero increases with the delay (small sweep)") {
    std::vector<double> liq0;
    for (double tau : {0.25, 0.5, 1.0}) {
        const auto p = delayed(10, 1.0, 2.0, 0.0, 2.0, tau);
        const auto K = solve_kernels(p, 0.01);
        liq0.push_back(liquidity_rate_at(K, 0));
    }
    CHECK(liq0[0] < liq0[1]);
    CHECK(liq0[1] < liq0[2]);
}
