#pragma once

#include <stdexcept>

namespace lanepe {

// Problems with user-supplied data (labels, datasets, checkpoints on disk).
// The CLI maps these to exit code 2; contract violations inside the library
// stay std::invalid_argument / std::logic_error and map to 3.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace lanepe
