#pragma once

#include <vector>

#include "gamelab/errors.hpp"
#include "gamelab/params.hpp"
#include "gamelab/util.hpp"

namespace gamelab {

// Running cost of bank i given the full state vector and its own control.
inline double running_cost(const GameParams& p, int player, const std::vector<double>& x, double alpha) {
    if (player < 0 || player >= p.n_players) fail(ErrorCode::out_of_range, "player index out of range");
    if (x.size() != static_cast<std::size_t>(p.n_players)) fail(ErrorCode::bad_config, "state vector has wrong length");
    const double spread = mean(x) - x[static_cast<std::size_t>(player)];
    return 0.5 * alpha * alpha - p.q * alpha * spread + 0.5 * p.epsilon * spread * spread;
}

// Same, with the cross-sectional mean already known (hot path).
inline double running_cost_fast(const GameParams& p, double spread, double alpha) {
    return 0.5 * alpha * alpha - p.q * alpha * spread + 0.5 * p.epsilon * spread * spread;
}

// Terminal cost of bank i.
inline double terminal_cost(const GameParams& p, int player, const std::vector<double>& x) {
    if (player < 0 || player >= p.n_players) fail(ErrorCode::out_of_range, "player index out of range");
    if (x.size() != static_cast<std::size_t>(p.n_players)) fail(ErrorCode::bad_config, "state vector has wrong length");
    const double spread = mean(x) - x[static_cast<std::size_t>(player)];
    return 0.5 * p.c * spread * spread;
}

inline double terminal_cost_fast(const GameParams& p, double spread) {
    return 0.5 * p.c * spread * spread;
}

}  // namespace gamelab
