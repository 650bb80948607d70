#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace knobtune {

// Base class for everything thrown by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Vector length does not match the declared dimension.
struct ShapeError : Error {
  using Error::Error;
};

// A configuration violates its parameter space, or a bad value was supplied.
struct ValidationError : Error {
  using Error::Error;
};

// Agent action component outside [0,1].
struct InvalidActionError : Error {
  using Error::Error;
};

// A metrics snapshot is missing series required by the schema.
struct IncompleteSnapshotError : Error {
  IncompleteSnapshotError(const std::string& what, std::vector<std::string> missing)
      : Error(what), missing_metrics(std::move(missing)) {}
  std::vector<std::string> missing_metrics;
};

// HTTP / endpoint failures when talking to an external metrics store.
struct TransportError : Error {
  using Error::Error;
};

struct EmptyBufferError : Error {
  using Error::Error;
};

// Non-finite gradients or parameters during training.
struct DivergenceError : Error {
  using Error::Error;
};

// Unreadable, corrupt, or wrong-version checkpoint file.
struct CheckpointError : Error {
  using Error::Error;
};

}  // namespace knobtune
