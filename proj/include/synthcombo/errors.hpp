#pragma once

#include <stdexcept>
#include <string>

namespace synthcombo {

// Malformed or inconsistent input data (bad CSV rows, dimension mismatches,
// infeasible configurations). Maps to CLI exit code 2.
class DataError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A numerical routine could not produce a usable answer (rank-zero panel,
// singular Gram matrix, non-finite prediction). Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

[[noreturn]] inline void fail_data(const std::string& what) { throw DataError(what); }

[[noreturn]] inline void fail_numerical(const std::string& what) { throw NumericalError(what); }

inline void require(bool cond, const std::string& what) {
    if (!cond) fail_data(what);
}

}  // namespace detail
}  // namespace synthcombo
