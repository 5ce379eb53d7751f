#pragma once

#include <stdexcept>
#include <string>

namespace ggf {

// Base class for all library errors. The CLI maps subclasses onto exit
// codes: validation failures -> 2, divergence -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define GGF_DEFINE_ERROR(NAME)     \
  class NAME : public Error {      \
   public:                         \
    using Error::Error;            \
  }

// mesh-core
GGF_DEFINE_ERROR(InvalidMesh);
GGF_DEFINE_ERROR(InvalidSurfacePoint);
GGF_DEFINE_ERROR(DegenerateFace);
GGF_DEFINE_ERROR(MissingRestState);

// energies
GGF_DEFINE_ERROR(StaleCollisionSet);

// gaussian texture / assets
GGF_DEFINE_ERROR(UvCoverageError);
GGF_DEFINE_ERROR(NotAnAsset);
GGF_DEFINE_ERROR(UnsupportedVersion);
GGF_DEFINE_ERROR(CorruptAsset);

// rendering / losses
GGF_DEFINE_ERROR(ShapeMismatch);

// registration
GGF_DEFINE_ERROR(EmptyObservation);
GGF_DEFINE_ERROR(EmptyPointCloud);
GGF_DEFINE_ERROR(MissingBody);

// simulation
GGF_DEFINE_ERROR(TopologyMismatch);
GGF_DEFINE_ERROR(InvalidScaleField);

// metrics / scenes
GGF_DEFINE_ERROR(EmptyGeometry);
GGF_DEFINE_ERROR(UnknownScene);

#undef GGF_DEFINE_ERROR

// Divergence errors carry the step at which the blow-up was detected.
class DivergedOptimization : public Error {
 public:
  DivergedOptimization(const std::string& what, int iteration)
      : Error(what + " (iteration " + std::to_string(iteration) + ")"),
        iteration(iteration) {}
  int iteration;
};

class DivergedSimulation : public Error {
 public:
  explicit DivergedSimulation(const std::string& what) : Error(what) {}
};

}  // namespace ggf
