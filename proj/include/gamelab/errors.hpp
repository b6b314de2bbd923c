#pragma once

#include <stdexcept>
#include <string>

namespace gamelab {

// Stable failure identifiers. The CLI maps them to process exit codes:
// validation -> 1, numerical -> 2, io -> 3.
enum class ErrorCode {
    // validation
    nonpositive,
    degenerate_game,
    convexity_violated,
    condition_31_violated,
    bad_delay,
    bad_level,
    bad_config,
    bad_deviation,
    out_of_range,
    grid_mismatch,
    tau_zero,
    history_length,
    not_converged,
    // numerical
    blowup,
    unstable,
    no_convergence,
    regression_singular,
    // io
    io_error,
};

enum class ErrorKind { validation, numerical, io };

inline const char* error_code_name(ErrorCode c) {
    switch (c) {
        case ErrorCode::nonpositive:           return "NONPOSITIVE";
        case ErrorCode::degenerate_game:       return "DEGENERATE_GAME";
        case ErrorCode::convexity_violated:    return "CONVEXITY_VIOLATED";
        case ErrorCode::condition_31_violated: return "CONDITION_31_VIOLATED";
        case ErrorCode::bad_delay:             return "BAD_DELAY";
        case ErrorCode::bad_level:             return "BAD_LEVEL";
        case ErrorCode::bad_config:            return "BAD_CONFIG";
        case ErrorCode::bad_deviation:         return "BAD_DEVIATION";
        case ErrorCode::out_of_range:          return "OUT_OF_RANGE";
        case ErrorCode::grid_mismatch:         return "GRID_MISMATCH";
        case ErrorCode::tau_zero:              return "TAU_ZERO";
        case ErrorCode::history_length:        return "HISTORY_LENGTH";
        case ErrorCode::not_converged:         return "NOT_CONVERGED";
        case ErrorCode::blowup:                return "BLOWUP";
        case ErrorCode::unstable:              return "UNSTABLE";
        case ErrorCode::no_convergence:        return "NO_CONVERGENCE";
        case ErrorCode::regression_singular:   return "REGRESSION_SINGULAR";
        case ErrorCode::io_error:              return "IO_ERROR";
    }
    return "UNKNOWN";
}

inline ErrorKind error_kind(ErrorCode c) {
    switch (c) {
        case ErrorCode::blowup:
        case ErrorCode::unstable:
        case ErrorCode::no_convergence:
        case ErrorCode::regression_singular:
            return ErrorKind::numerical;
        case ErrorCode::io_error:
            return ErrorKind::io;
        default:
            return ErrorKind::validation;
    }
}

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

    ErrorCode code() const { return code_; }
    ErrorKind kind() const { return error_kind(code_); }

  private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

}  // namespace gamelab
