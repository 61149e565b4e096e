#pragma once

#include <stdexcept>
#include <string>

namespace dak {

/// Malformed or inconsistent input: ragged rows, non-finite values, N < 4,
/// dimension mismatches. The CLI maps this to exit code 2.
class input_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Calibration that cannot studentize the statistic (sigma_long == 0, d too
/// small for a HAC bandwidth). The CLI maps this to exit code 3.
class degenerate_calibration : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A deterministic object failed a numerical sanity check (K not PSD, K
/// singular where an inverse is needed). Also exit code 3.
class data_integrity_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operation called in a state where it is undefined (e.g. localizing an
/// alarm that was never raised).
class state_error : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Argument outside the mathematical domain of a function uses std::domain_error.

}  // namespace dak
