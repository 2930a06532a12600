#pragma once

#include <stdexcept>
#include <string>

namespace focusmr {

// Malformed input: bad TSV header, unparseable number, unknown config key.
// The CLI maps these to exit code 2 and the message names the offending
// file, line, or key.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Structurally unusable data: no core variant, nonpositive standard error,
// duplicate variant id. Also exit code 2 at the CLI.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Estimation cannot proceed on this data: no relevant instruments, weak-set
// variance undefined, degenerate candidate set. Exit code 3 at the CLI.
struct EstimationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A numerical guarantee failed beyond tolerance, e.g. a covariance matrix
// with a substantially negative eigenvalue. Exit code 3 at the CLI.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace focusmr
