#pragma once

#include <stdexcept>
#include <string>

namespace rlmt {

// Bad values in a config file or programmatic configuration.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad command-line usage (unknown subcommand, missing flag, ...).
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed operator string or other unparseable text input.
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Operator applied to an algorithm or environment it cannot act on.
struct CompatibilityError : std::runtime_error {
    explicit CompatibilityError(const std::string& msg) : std::runtime_error(msg) {}
};

// Mutant that would be behaviorally identical to the original.
struct VacuousMutationError : std::runtime_error {
    explicit VacuousMutationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical blow-up or other unrecoverable failure during training.
struct TrainingError : std::runtime_error {
    explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace rlmt
