#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mmtopo {

enum class Errc {
  NonConvexInput,
  DegenerateGeometry,
  PointOutsidePolytope,
  OrphanNode,
  ChildCountMismatch,
  DuplicateMaterialLeaf,
  DuplicateLabel,
  UnknownLabel,
  InvalidParameters,
  InvalidGeometry,
  NewtonDivergence,
  SingularSystem,
  ZeroGradient,
  SolverFailure,
  InvalidNormalization,
  IoFailure,
  InvalidConfig,
};

std::string_view to_string(Errc code);

/// Single exception type for the toolkit; `code()` identifies the failure.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace mmtopo
