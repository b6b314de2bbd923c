#pragma once

// Liquidity-versus-delay experiment: solve the kernel system once per delay
// value and emit the lending rate 2 E1(t,0) + 2 E0(t) + q on the time grid in
// long format. A zero delay means the repayment cancels the loan instantly,
// so no liquidity is provided at all; that case is recorded as a sentinel row
// with an empty rate field. The summary column annotates each delay's t = 0
// row with the direction of change relative to the previous delay in the
// sweep, which is the quantity the monotonicity claim is about.

#include <string>
#include <vector>

#include "gamelab/csv.hpp"
#include "gamelab/errors.hpp"
#include "gamelab/kernels.hpp"
#include "gamelab/params.hpp"
#include "gamelab/util.hpp"

namespace gamelab {

inline Table liquidity_study(const GameParams& base, const std::vector<double>& taus, double dt) {
    if (taus.empty()) fail(ErrorCode::bad_config, "tau sweep must contain at least one value");
    Table t;
    t.header({"tau", "t", "liquidity", "summary"});

    bool have_prev = false;
    double prev_at0 = 0.0;
    for (double tau : taus) {
        if (!(tau >= 0.0)) fail(ErrorCode::bad_delay, "delay values must be nonnegative");
        if (tau == 0.0) {
            // instant repayment: lending has no effect, no liquidity is provided
            t.push_row({format_double(0.0), format_double(0.0), "", "no-lending"});
            continue;
        }
        GameParams p = base;
        p.delay = tau;
        p.delay_measure.clear();
        const auto K = solve_kernels(p, dt);
        for (int k = 0; k <= K.n_steps; ++k) {
            const double time = K.t_grid[static_cast<std::size_t>(k)];
            const double rate = liquidity_rate_at(K, k);
            std::string summary;
            if (k == 0) {
                if (have_prev)
                    summary = rate > prev_at0 ? "increasing" : (rate < prev_at0 ? "decreasing" : "equal");
                prev_at0 = rate;
                have_prev = true;
            }
            t.push_row({format_double(tau), format_double(time), format_double(rate), summary});
        }
    }
    return t;
}

}  // namespace gamelab
