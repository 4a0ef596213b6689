#pragma once

#include <stdexcept>
#include <string>

namespace ecodyn {

// Three families, one per CLI exit code (2, 3, 4).

/// Bad parameters, malformed input, violated preconditions.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A well-formed problem whose estimate could not be produced.
class EstimationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parameters outside the regime an operation requires (e.g. a saddle where a stable node is needed).
class StabilityError : public InputError {
public:
    using InputError::InputError;
};

class SingularSystemError : public InputError {
public:
    using InputError::InputError;
};

class ParseError : public InputError {
public:
    ParseError(std::size_t line, const std::string& what)
        : InputError("line " + std::to_string(line) + ": " + what), line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class DuplicateKeyError : public InputError {
public:
    using InputError::InputError;
};

class DivergenceError : public EstimationError {
public:
    using EstimationError::EstimationError;
};

class RankDeficiencyError : public EstimationError {
public:
    using EstimationError::EstimationError;
};

}  // namespace ecodyn
