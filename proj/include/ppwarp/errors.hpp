#pragma once

#include <stdexcept>
#include <string>

namespace ppw {

// Two failure families, mirrored by the CLI exit codes:
// validation problems exit with 2, io problems with 1.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// geometry
struct DegenerateSegment : ValidationError { using ValidationError::ValidationError; };
struct AllParallel : ValidationError { using ValidationError::ValidationError; };
struct DegenerateQuad : ValidationError { using ValidationError::ValidationError; };
struct AtInfinity : ValidationError { using ValidationError::ValidationError; };

// saliency
struct BadParam : ValidationError { using ValidationError::ValidationError; };
struct CacheCorrupt : IoError { using IoError::IoError; };

// warp
struct NonPositiveSaliency : ValidationError { using ValidationError::ValidationError; };
struct MonotonicityViolation : ValidationError { using ValidationError::ValidationError; };
struct OutOfBounds : ValidationError { using ValidationError::ValidationError; };
struct ClampBoundary : ValidationError { using ValidationError::ValidationError; };

// eval
struct TooShort : ValidationError { using ValidationError::ValidationError; };
struct DegenerateTrack : ValidationError { using ValidationError::ValidationError; };

}  // namespace ppw
