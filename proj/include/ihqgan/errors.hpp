#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ihqgan {

/// Malformed or truncated input data (IDX archives, PNG files, manifests).
struct FormatError : std::runtime_error {
    std::size_t offset;
    FormatError(const std::string& what, std::size_t at)
        : std::runtime_error(what + " (at byte offset " + std::to_string(at) + ")"), offset(at) {}
};

/// Structurally valid input that cannot satisfy a data contract (missing
/// files, too few samples, inconsistent counts).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// NaN/Inf detected in a gradient, loss, or parameter update.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace ihqgan
