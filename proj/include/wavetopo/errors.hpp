#pragma once

#include <stdexcept>
#include <string>

namespace wavetopo {

// Base for every library failure; the CLI maps these onto exit codes.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DomainError : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct InvalidStructure : Error { using Error::Error; };
struct PolarityMismatch : Error { using Error::Error; };
struct UnlabeledEdge : Error { using Error::Error; };
struct SingularFit : Error { using Error::Error; };
struct NoValidEpsilon : Error { using Error::Error; };
struct DegenerateZeroSet : Error { using Error::Error; };
struct NotATree : Error { using Error::Error; };
struct OpenComponent : Error { using Error::Error; };
struct NonConvergence : Error { using Error::Error; };
struct QuadratureError : Error { using Error::Error; };
struct VerificationFailed : Error { using Error::Error; };

}  // namespace wavetopo
