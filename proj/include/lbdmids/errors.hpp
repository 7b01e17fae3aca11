#pragma once

#include <stdexcept>

namespace lbdmids {

// Error taxonomy; the CLI maps these onto exit codes
// (config=1, data=2, training=3, io=4).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// shape violations in the kernel / network layers
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

} // namespace lbdmids
