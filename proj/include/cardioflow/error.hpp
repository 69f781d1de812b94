#pragma once

#include <stdexcept>
#include <string>

namespace cardioflow {

/// Base class of all library errors. `kind()` is a stable machine-readable
/// tag used by the CLI when it reports failures as JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& m) : Error("shape_error", m) {}
};

struct NonFiniteError : Error {
  explicit NonFiniteError(const std::string& m) : Error("non_finite", m) {}
};

struct GeometryError : Error {
  explicit GeometryError(const std::string& m) : Error("geometry_error", m) {}
};

struct DegenerateInputError : Error {
  explicit DegenerateInputError(const std::string& m) : Error("degenerate_input", m) {}
};

struct AtlasError : Error {
  explicit AtlasError(const std::string& m) : Error("atlas_error", m) {}
};

struct DatasetError : Error {
  explicit DatasetError(const std::string& m) : Error("dataset_error", m) {}
};

struct RegistrationError : Error {
  explicit RegistrationError(const std::string& m) : Error("registration_error", m) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error("config_error", m) {}
};

struct IoError : Error {
  explicit IoError(const std::string& m) : Error("io_error", m) {}
};

struct CheckpointError : Error {
  explicit CheckpointError(const std::string& m) : Error("checkpoint_error", m) {}
};

}  // namespace cardioflow
