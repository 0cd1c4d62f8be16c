#pragma once

#include <stdexcept>
#include <string>

namespace revdiff {

/// Argument outside the mathematical domain of an operation
/// (negative time, singular kernel, empty sample set, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Invalid experiment configuration or sampler/solver settings.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite values or overflow produced during a computation.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Monte Carlo estimate rejected for lack of samples.
class StatisticsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace revdiff
