#include "mmtopo/error.hpp"

namespace mmtopo {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::NonConvexInput: return "NonConvexInput";
    case Errc::DegenerateGeometry: return "DegenerateGeometry";
    case Errc::PointOutsidePolytope: return "PointOutsidePolytope";
    case Errc::OrphanNode: return "OrphanNode";
    case Errc::ChildCountMismatch: return "ChildCountMismatch";
    case Errc::DuplicateMaterialLeaf: return "DuplicateMaterialLeaf";
    case Errc::DuplicateLabel: return "DuplicateLabel";
    case Errc::UnknownLabel: return "UnknownLabel";
    case Errc::InvalidParameters: return "InvalidParameters";
    case Errc::InvalidGeometry: return "InvalidGeometry";
    case Errc::NewtonDivergence: return "NewtonDivergence";
    case Errc::SingularSystem: return "SingularSystem";
    case Errc::ZeroGradient: return "ZeroGradient";
    case Errc::SolverFailure: return "SolverFailure";
    case Errc::InvalidNormalization: return "InvalidNormalization";
    case Errc::IoFailure: return "IoFailure";
    case Errc::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

}  // namespace mmtopo
