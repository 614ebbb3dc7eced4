#ifndef SPECSENSE_ERRORS_HPP
#define SPECSENSE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace specsense {

/// Malformed input file (CSV, config, model). Carries a one-based line
/// number when the failing line is known, 0 otherwise.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : std::runtime_error(line > 0 ? what + " (line " + std::to_string(line) + ")" : what),
          line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Per-class scale estimation failed (missing label class, zero mean, ...).
class EstimationError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Training diverged; carries the epoch at which the loss became non-finite.
class TrainingError : public std::runtime_error {
public:
    TrainingError(const std::string& what, int epoch)
        : std::runtime_error(what + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}
    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

/// The two hypothesis scale vectors coincide, so the likelihood-ratio
/// boundary has no normal direction.
class DegenerateDirectionError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Bad experiment configuration (schema violation, out-of-range value).
/// Messages name the offending key path, e.g. "scenario.nodes".
class ConfigError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace specsense

#endif
