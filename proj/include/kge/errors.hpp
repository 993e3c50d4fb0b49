#pragma once

#include <stdexcept>
#include <string>

namespace kge {

// Shape mismatch between tensors or against a declared parameter shape.
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Triple or payload violates the relation/entity schema.
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An API precondition was violated (bad argument, wrong call order).
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Negative sampling cannot satisfy the request (candidate pool too small).
struct SamplingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values encountered during optimisation.
struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File or stream could not be read/written/parsed.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid or inconsistent run configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace kge
