#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "gamelab/config_file.hpp"
#include "gamelab/costs.hpp"
#include "gamelab/csv.hpp"
#include "gamelab/errors.hpp"
#include "gamelab/parallel.hpp"
#include "gamelab/params.hpp"
#include "gamelab/rng.hpp"
#include "gamelab/util.hpp"

using namespace gamelab;

namespace {
GameParams valid_params() {
    GameParams p;
    p.n_players = 5;
    p.sigma = 0.5;
    p.q = 0.5;
    p.epsilon = 1.5;
    p.c = 0.5;
    p.horizon = 1.0;
    p.delay = 0.25;
    return p;
}

bool has_violation(const std::vector<std::string>& v, ErrorCode c) {
    const std::string prefix = std::string(error_code_name(c)) + ":";
    for (const auto& s : v)
        if (s.rfind(prefix, 0) == 0) return true;
    return false;
}
}  // namespace

// ---- parameter validation ----

TEST_CASE("valid parameters produce no violations") {
    CHECK(validate_params(valid_params()).empty());
    CHECK_NOTHROW(require_valid(valid_params()));
}

TEST_CASE("each invariant violation is reported with its identifier") {
    auto p = valid_params();
    p.n_players = 1;
    CHECK(has_violation(validate_params(p), ErrorCode::degenerate_game));

    p = valid_params();
    p.sigma = 0.0;
    CHECK(has_violation(validate_params(p), ErrorCode::nonpositive));

    p = valid_params();
    p.epsilon = -1.0;
    CHECK(has_violation(validate_params(p), ErrorCode::nonpositive));

    p = valid_params();
    p.horizon = 0.0;
    CHECK(has_violation(validate_params(p), ErrorCode::nonpositive));

    p = valid_params();
    p.delay = -0.1;
    CHECK(has_violation(validate_params(p), ErrorCode::bad_delay));

    // q^2 >= epsilon: convex running cost fails
    p = valid_params();
    p.q = 2.0;
    p.epsilon = 1.0;
    CHECK(has_violation(validate_params(p), ErrorCode::convexity_violated));

    // q^2 < epsilon but the N-player existence condition fails:
    // q^2 (1 - 1/(2N))^2 > epsilon (1 - 1/N) at N=2, q=1, eps=1.05
    p = valid_params();
    p.n_players = 2;
    p.q = 1.0;
    p.epsilon = 1.05;
    auto v = validate_params(p);
    CHECK(!has_violation(v, ErrorCode::convexity_violated));
    CHECK(has_violation(v, ErrorCode::condition_31_violated));

    p = valid_params();
    p.initial_reserves = {1.0, 2.0};  // wrong length for N=5
    CHECK(has_violation(validate_params(p), ErrorCode::bad_config));

    p = valid_params();
    p.delay_measure = {{0.0, 1.0}, {0.5, -1.0}};  // lag beyond delay=0.25
    CHECK(has_violation(validate_params(p), ErrorCode::bad_delay));
}

TEST_CASE("require_valid throws a typed error") {
    auto p = valid_params();
    p.q = 2.0;
    p.epsilon = 1.0;
    CHECK_THROWS_AS(require_valid(p), Error);
    try {
        require_valid(p);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::convexity_violated);
        CHECK(e.kind() == ErrorKind::validation);
    }
}

TEST_CASE("defaults: reserves are zeros, measure is two-point") {
    auto p = valid_params();
    auto xi = effective_reserves(p);
    REQUIRE(xi.size() == 5);
    for (double v : xi) CHECK(v == 0.0);

    auto th = effective_measure(p);
    REQUIRE(th.size() == 2);
    CHECK(th[0].lag == 0.0);
    CHECK(th[0].weight == 1.0);
    CHECK(th[1].lag == p.delay);
    CHECK(th[1].weight == -1.0);
    CHECK(has_default_measure(p));

    p.delay = 0.0;
    CHECK(effective_measure(p).empty());
}

// ---- costs ----

TEST_CASE("running and terminal costs match their formulas") {
    auto p = valid_params();
    const std::vector<double> x = {1.0, 0.5, 0.0, -0.5, -1.0};
    const double xbar = 0.0;
    const double alpha = 0.3;
    for (int i = 0; i < 5; ++i) {
        const double s = xbar - x[static_cast<std::size_t>(i)];
        const double expected = 0.5 * alpha * alpha - p.q * alpha * s + 0.5 * p.epsilon * s * s;
        CHECK(running_cost(p, i, x, alpha) == doctest::Approx(expected).epsilon(1e-15));
        CHECK(running_cost_fast(p, s, alpha) == running_cost(p, i, x, alpha));
        CHECK(terminal_cost(p, i, x) == doctest::Approx(0.5 * p.c * s * s).epsilon(1e-15));
    }
    CHECK_THROWS_AS(running_cost(p, 7, x, 0.0), Error);
}

// ---- config parsing ----

TEST_CASE("config text parses keys, comments, lists, and measures") {
    const std::string text =
        "# game\n"
        "n_players = 5\n"
        "sigma= 0.5  # noise\n"
        "q =0.5\n"
        "epsilon = 1.5\n"
        "c = 0.5\n"
        "horizon = 1\n"
        "delay = 0.25\n"
        "initial_reserves = 1, 0.5, 0, -0.5, -1\n"
        "delay_measure = 0:1, 0.25:-1\n";
    auto cfg = parse_config_text(text);
    auto p = params_from_config(cfg);
    CHECK(p.n_players == 5);
    CHECK(p.sigma == 0.5);
    CHECK(p.q == 0.5);
    CHECK(p.epsilon == 1.5);
    CHECK(p.c == 0.5);
    CHECK(p.horizon == 1.0);
    CHECK(p.delay == 0.25);
    REQUIRE(p.initial_reserves.size() == 5);
    CHECK(p.initial_reserves[0] == 1.0);
    CHECK(p.initial_reserves[4] == -1.0);
    REQUIRE(p.delay_measure.size() == 2);
    CHECK(p.delay_measure[1].weight == -1.0);
    CHECK(validate_params(p).empty());
}

TEST_CASE("config overrides follow last-wins and reject malformed input") {
    auto cfg = parse_config_text("sigma = 1\n");
    apply_override(cfg, "sigma=2.5");
    CHECK(parse_double(cfg.get("sigma"), "sigma") == 2.5);
    CHECK_THROWS_AS(apply_override(cfg, "no_equals_sign"), Error);
    CHECK_THROWS_AS(parse_config_text("just a line\n"), Error);
    CHECK_THROWS_AS(parse_double("abc", "k"), Error);
    CHECK_THROWS_AS(parse_int("1.5", "k"), Error);
    try {
        parse_config_text("oops\n");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::bad_config);
    }
}

// ---- utilities ----

TEST_CASE("formatting round-trips doubles exactly") {
    for (double v : {0.0, 1.0, -1.0, 0.1, 1e-17, 3.141592653589793, -2.5e300}) {
        CHECK(std::stod(format_double(v)) == v);
    }
    CHECK(format_int(-42) == "-42");
}

TEST_CASE("fnv1a64 matches known vectors") {
    CHECK(fnv1a64(std::string("")) == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64(std::string("a")) == 0xaf63dc4c8601ec8cULL);
    CHECK(hex64(0xcbf29ce484222325ULL) == "cbf29ce484222325");
}

TEST_CASE("normal cdf and basic statistics") {
    CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-9));
    CHECK(normal_cdf(-1e9) == doctest::Approx(0.0));

    std::vector<double> v = {1.0, 2.0, 3.0, 4.0};
    CHECK(mean(v) == 2.5);
    CHECK(variance(v) == doctest::Approx(5.0 / 3.0).epsilon(1e-15));
    CHECK(standard_error(v) == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)).epsilon(1e-15));
}

TEST_CASE("steps_for rounds the step down via a larger count") {
    CHECK(steps_for(1.0, 1e-3) == 1000);
    CHECK(steps_for(1.0, 3e-4) == 3334);
    CHECK(steps_for(2.0, 0.01) == 200);
    CHECK_THROWS_AS(steps_for(1.0, 0.0), Error);
}

// ---- counter RNG ----

TEST_CASE("rng is a pure function of its indices") {
    CounterRng r(12345);
    const double a = r.normal(7, 13, 2);
    CHECK(r.normal(7, 13, 2) == a);
    CHECK(r.normal(8, 13, 2) != a);
    CHECK(r.normal(7, 14, 2) != a);
    CHECK(r.normal(7, 13, 3) != a);
    CounterRng r2(12346);
    CHECK(r2.normal(7, 13, 2) != a);
    CounterRng rs(12345, 1);
    CHECK(rs.normal(7, 13, 2) != a);
}

TEST_CASE("rng normals have the right first two moments") {
    CounterRng r(987654321);
    const long n = 200000;
    double s = 0.0, s2 = 0.0;
    for (long i = 0; i < n; ++i) {
        const double z = r.normal(static_cast<std::uint64_t>(i), 0, 0);
        s += z;
        s2 += z * z;
    }
    const double m = s / n;
    const double var = s2 / n - m * m;
    CHECK(std::abs(m) < 3.0 / std::sqrt(static_cast<double>(n)));          // 3 SE of 0
    CHECK(std::abs(var - 1.0) < 3.0 * std::sqrt(2.0 / static_cast<double>(n)));  // 3 SE of 1
}

TEST_CASE("substep aggregation nests Brownian increments across dt levels") {
    CounterRng r(42);
    const double dt_coarse = 0.01;
    const double dt_fine = 0.005;
    // one coarse step spanning two fine steps
    const double coarse = std::sqrt(dt_coarse) * r.normal_aggregated(3, 10, 2, 1);
    const double fine = std::sqrt(dt_fine) * r.normal(3, 10, 1) + std::sqrt(dt_fine) * r.normal(3, 11, 1);
    CHECK(coarse == doctest::Approx(fine).epsilon(1e-14));
}

// ---- deterministic parallelism ----

TEST_CASE("parallel block execution is bitwise independent of thread count") {
    const long n = 10007;
    auto run = [n](int threads) {
        std::vector<double> out(static_cast<std::size_t>(n), 0.0);
        CounterRng r(5);
        parallel_blocks(n, 64, threads, [&](long, long begin, long end) {
            for (long i = begin; i < end; ++i)
                out[static_cast<std::size_t>(i)] = r.normal(static_cast<std::uint64_t>(i), 0, 0);
        });
        return out;
    };
    const auto a = run(1);
    const auto b = run(4);
    const auto c = run(13);
    CHECK(a == b);
    CHECK(a == c);
}

TEST_CASE("parallel blocks propagate worker exceptions") {
    CHECK_THROWS_AS(parallel_blocks(100, 10, 4,
                                    [](long, long begin, long) {
                                        if (begin >= 50) fail(ErrorCode::unstable, "boom");
                                    }),
                    Error);
}

// ---- table serialization ----

TEST_CASE("tables serialize to byte-stable csv and json") {
    Table t;
    t.header({"a", "b"});
    t.push_row({format_double(1.5), format_double(-0.25)});
    CHECK(t.to_csv() == "a,b\n1.5,-0.25\n");
    CHECK(t.to_json() == "{\"schema_version\":1,\"columns\":[\"a\",\"b\"],\"rows\":[[\"1.5\",\"-0.25\"]]}\n");
    CHECK_THROWS_AS(t.push_row({"only-one"}), Error);
}
