#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace compcg {

/// Malformed arguments: dimension mismatches, out-of-range parameters.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A user-supplied callback broke its contract (e.g. wrong output length).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// A matrix that should have been SPD failed to factorize.
class FactorizationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Appending a block to a Cholesky factor failed (Schur complement not PD).
class AppendError : public FactorizationError {
public:
    using FactorizationError::FactorizationError;
};

/// Conditioning the companion model on a new record failed.
class ConditioningError : public std::runtime_error {
public:
    ConditioningError(const std::string& what, std::size_t record_index)
        : std::runtime_error(what), record_index_(record_index) {}

    /// Position the offending record would have taken in the training set.
    std::size_t record_index() const noexcept { return record_index_; }

private:
    std::size_t record_index_;
};

/// Triangular solves against the stored factor produced non-finite values.
class DegenerateModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace compcg
