#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "gamelab/errors.hpp"

namespace gamelab {

// One atom of the finite signed measure that weights past controls in the
// state drift: weight * delta_{lag}.
struct DelayAtom {
    double lag = 0.0;
    double weight = 0.0;
};

// Static description of the N-bank lending game.
//
// State of bank i:  dX^i_t = <alpha^i, theta>_t dt + sigma dW^i_t,
// where theta defaults to delta_0 - delta_tau (borrow now, repay after tau).
// Running cost:     f_i = 1/2 a^2 - q a (xbar - x^i) + eps/2 (xbar - x^i)^2
// Terminal cost:    g_i = c/2 (xbar - x^i)^2
struct GameParams {
    int n_players = 2;
    double sigma = 1.0;    // idiosyncratic noise level
    double q = 0.0;        // incentive weight on the borrowing/lending signal
    double epsilon = 1.0;  // running penalty on the reserve spread
    double c = 0.0;        // terminal penalty on the reserve spread
    double horizon = 1.0;  // T
    double delay = 0.0;    // tau (repayment delay)

    // Initial reserve levels, size n_players. Empty means all zeros.
    std::vector<double> initial_reserves;

    // Atoms of theta. Empty means the default {(0,+1),(delay,-1)}
    // (collapsing to the zero measure when delay == 0).
    std::vector<DelayAtom> delay_measure;
};

inline double coupling_a1(const GameParams& p) { return 1.0 - 1.0 / p.n_players; }
inline double coupling_a2(const GameParams& p) { return 1.0 - 1.0 / (static_cast<double>(p.n_players) * p.n_players); }

inline std::vector<double> effective_reserves(const GameParams& p) {
    if (!p.initial_reserves.empty()) return p.initial_reserves;
    return std::vector<double>(static_cast<std::size_t>(p.n_players), 0.0);
}

inline std::vector<DelayAtom> effective_measure(const GameParams& p) {
    if (!p.delay_measure.empty()) return p.delay_measure;
    if (p.delay == 0.0) return {};
    return {DelayAtom{0.0, 1.0}, DelayAtom{p.delay, -1.0}};
}

// True when the measure is the canonical two-point delta_0 - delta_tau
// (the regime with closed-form feedback structure).
inline bool has_default_measure(const GameParams& p) {
    if (p.delay_measure.empty()) return true;
    if (p.delay == 0.0) return false;
    if (p.delay_measure.size() != 2) return false;
    const auto& a = p.delay_measure[0];
    const auto& b = p.delay_measure[1];
    const double tol = 1e-12 * std::max(1.0, p.delay);
    return std::abs(a.lag) <= tol && std::abs(a.weight - 1.0) <= 1e-12 &&
           std::abs(b.lag - p.delay) <= tol && std::abs(b.weight + 1.0) <= 1e-12;
}

// Returns the list of violated model invariants (empty means valid).
// Each entry starts with a stable identifier followed by a human message.
inline std::vector<std::string> validate_params(const GameParams& p) {
    std::vector<std::string> out;
    auto add = [&out](ErrorCode c, const std::string& msg) {
        out.push_back(std::string(error_code_name(c)) + ": " + msg);
    };

    if (p.n_players < 2) add(ErrorCode::degenerate_game, "need at least two banks, got " + std::to_string(p.n_players));
    if (!(p.sigma > 0.0) || !std::isfinite(p.sigma)) add(ErrorCode::nonpositive, "sigma must be positive");
    if (!(p.epsilon > 0.0) || !std::isfinite(p.epsilon)) add(ErrorCode::nonpositive, "epsilon must be positive");
    if (!(p.horizon > 0.0) || !std::isfinite(p.horizon)) add(ErrorCode::nonpositive, "horizon must be positive");
    if (p.q < 0.0 || !std::isfinite(p.q)) add(ErrorCode::nonpositive, "q must be nonnegative");
    if (p.c < 0.0 || !std::isfinite(p.c)) add(ErrorCode::nonpositive, "c must be nonnegative");
    if (p.delay < 0.0 || !std::isfinite(p.delay)) add(ErrorCode::bad_delay, "delay must be nonnegative");

    if (std::isfinite(p.q) && std::isfinite(p.epsilon) && p.epsilon > 0.0 && !(p.q * p.q < p.epsilon))
        add(ErrorCode::convexity_violated, "need q^2 < epsilon for a convex running cost");

    if (p.n_players >= 2 && std::isfinite(p.q) && std::isfinite(p.epsilon) && p.epsilon > 0.0) {
        const double n = static_cast<double>(p.n_players);
        const double lhs = p.q * p.q * (1.0 - 1.0 / (2.0 * n)) * (1.0 - 1.0 / (2.0 * n));
        const double rhs = p.epsilon * (1.0 - 1.0 / n);
        if (lhs > rhs) add(ErrorCode::condition_31_violated, "need q^2 (1 - 1/(2N))^2 <= epsilon (1 - 1/N)");
    }

    if (!p.initial_reserves.empty() && p.initial_reserves.size() != static_cast<std::size_t>(p.n_players))
        add(ErrorCode::bad_config, "initial_reserves must be empty or have one entry per bank");
    for (double x : p.initial_reserves)
        if (!std::isfinite(x)) add(ErrorCode::bad_config, "initial_reserves entries must be finite");

    for (const auto& atom : p.delay_measure) {
        if (!std::isfinite(atom.lag) || !std::isfinite(atom.weight)) {
            add(ErrorCode::bad_delay, "delay measure atoms must be finite");
            break;
        }
        if (atom.lag < 0.0 || atom.lag > p.delay + 1e-12 * std::max(1.0, p.delay)) {
            add(ErrorCode::bad_delay, "delay measure atoms must have lags in [0, delay]");
            break;
        }
    }

    return out;
}

// Throws on the first violated invariant.
inline void require_valid(const GameParams& p) {
    auto v = validate_params(p);
    if (v.empty()) return;
    const std::string& first = v.front();
    const auto pos = first.find(": ");
    const std::string name = first.substr(0, pos);
    for (ErrorCode c : {ErrorCode::nonpositive, ErrorCode::degenerate_game, ErrorCode::convexity_violated,
                        ErrorCode::condition_31_violated, ErrorCode::bad_delay, ErrorCode::bad_config}) {
        if (name == error_code_name(c)) throw Error(c, first.substr(pos + 2));
    }
    throw Error(ErrorCode::bad_config, first);
}

}  // namespace gamelab
