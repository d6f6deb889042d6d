#pragma once

#include <stdexcept>
#include <string>

namespace gw {

// Base class for every error thrown by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// graph
struct CycleError : Error { using Error::Error; };
struct EmptyGraphError : Error { using Error::Error; };
struct LayerIndexError : Error { using Error::Error; };

// generators / synthetic data
struct SpecError : Error { using Error::Error; };

// nn
struct ShapeError : Error { using Error::Error; };
struct SizeError : Error { using Error::Error; };
struct NoTapeError : Error { using Error::Error; };
struct LabelRangeError : Error { using Error::Error; };
struct CellArityError : Error { using Error::Error; };

// pruning / training
struct NoMaskableLayersError : Error { using Error::Error; };
struct DataError : Error { using Error::Error; };

// extraction
struct ProbeShapeError : Error { using Error::Error; };
struct UnsupportedModelError : Error { using Error::Error; };
struct MemoryGuardError : Error { using Error::Error; };

// persistence
struct FormatError : Error { using Error::Error; };
struct TruncationError : Error { using Error::Error; };
struct MagicError : Error { using Error::Error; };
struct CountMismatchError : Error { using Error::Error; };

}  // namespace gw
