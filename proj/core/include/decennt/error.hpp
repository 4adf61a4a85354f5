#pragma once

#include <stdexcept>
#include <string>

namespace decennt {

// Typed error channel used across the library. The kind carries the
// contract category (dimension, format, usage, ...) so callers and the
// CLI can map failures to stable exit codes.
class Error : public std::runtime_error {
public:
    enum class Kind {
        Dimension,       // operand shapes incompatible
        Input,           // bad values handed to an operation
        Config,          // invalid configuration / hyperparameter
        Usage,           // API called out of order or with wrong protocol
        Format,          // corrupt or mis-typed file content
        Validation,      // dataset/model level consistency failure
        Stratification,  // fold split cannot keep both classes represented
        Parameter,       // out-of-range generator or analysis parameter
        Io,              // filesystem failure
        Metric,          // metric undefined for the given inputs
        Correlation,     // degenerate series in a correlation computation
        Stability,       // unstable dynamical-system specification
    };

    Error(Kind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

    static Error dimension(const std::string& m) { return {Kind::Dimension, m}; }
    static Error input(const std::string& m) { return {Kind::Input, m}; }
    static Error config(const std::string& m) { return {Kind::Config, m}; }
    static Error usage(const std::string& m) { return {Kind::Usage, m}; }
    static Error format(const std::string& m) { return {Kind::Format, m}; }
    static Error validation(const std::string& m) { return {Kind::Validation, m}; }
    static Error stratification(const std::string& m) { return {Kind::Stratification, m}; }
    static Error parameter(const std::string& m) { return {Kind::Parameter, m}; }
    static Error io(const std::string& m) { return {Kind::Io, m}; }
    static Error metric(const std::string& m) { return {Kind::Metric, m}; }
    static Error correlation(const std::string& m) { return {Kind::Correlation, m}; }
    static Error stability(const std::string& m) { return {Kind::Stability, m}; }

private:
    Kind kind_;
};

}  // namespace decennt
