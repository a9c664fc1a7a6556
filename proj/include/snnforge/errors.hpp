#pragma once

#include <stdexcept>
#include <string>

namespace snnforge {

// Shape or conformance violation between operands.
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid configuration value (stride, simulation length, sweep grid, mode).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad payload content (empty dataset, label out of range, count mismatch).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed serialized artifact (IDX stream, model file, report).
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace snnforge
