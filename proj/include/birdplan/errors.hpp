#pragma once

#include <stdexcept>
#include <string>

namespace birdplan {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : Error { using Error::Error; };
struct UnsupportedModel : ParseError { using ParseError::ParseError; };
struct MissingInput : Error { using Error::Error; };
struct ConsistencyError : Error { using Error::Error; };

struct DegenerateClustering : Error { using Error::Error; };
struct CapacityError : Error { using Error::Error; };

struct DegenerateGeometry : Error { using Error::Error; };
struct RayParallel : Error { using Error::Error; };
struct IntersectBehind : Error { using Error::Error; };
struct HorizonError : Error { using Error::Error; };

struct OutOfCoverage : Error { using Error::Error; };

struct EmptySubScene : Error { using Error::Error; };
struct ModelNotReady : Error { using Error::Error; };
struct IncompletePlan : Error { using Error::Error; };
struct StaleArtifact : Error { using Error::Error; };

struct ValidationError : Error { using Error::Error; };

}  // namespace birdplan
