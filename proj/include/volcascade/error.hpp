#pragma once

#include <stdexcept>
#include <string>

namespace volcascade {

/// Bad user input: malformed files, invalid configuration, degenerate data.
/// The CLI maps it to exit code 1; anything else is an internal error (2).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Failure inside a named pipeline stage.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& what, bool input_error)
        : std::runtime_error(stage + ": " + what), stage_(std::move(stage)), input_error_(input_error) {}

    const std::string& stage() const noexcept { return stage_; }
    bool input_error() const noexcept { return input_error_; }

private:
    std::string stage_;
    bool input_error_;
};

}  // namespace volcascade
