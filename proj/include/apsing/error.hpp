#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace apsing {

enum class ErrorKind {
  InvalidDomain,
  UnsupportedResolution,
  DomainMismatch,
  NonFinite,
  DegenerateGroundState,
  NearDegenerate,
  SingularRestriction,
  RangeViolation,
  InconclusiveScan,
  NotFound,
  NoConvergence,
  HypothesisViolation,
  ContinuationStall,
  OutOfDomain,
  RecipeFailed,
  NoSignChange,
  DegenerateMuK,
  NoBracket,
  DeltaLost,
  JacobianSingular,
  NewtonDiverged,
  Precondition,
  StageFailure,
  Config,
  Io,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library. `stage` names the pipeline stage (or
// operation) that failed; pipelines rethrow with their own stage prefix.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string stage, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + " [" + stage +
                           "]: " + message),
        kind_(kind),
        stage_(std::move(stage)),
        detail_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& stage() const noexcept { return stage_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string stage_;
  std::string detail_;
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidDomain: return "invalid-domain";
    case ErrorKind::UnsupportedResolution: return "unsupported-resolution";
    case ErrorKind::DomainMismatch: return "domain-mismatch";
    case ErrorKind::NonFinite: return "non-finite";
    case ErrorKind::DegenerateGroundState: return "degenerate-ground-state";
    case ErrorKind::NearDegenerate: return "near-degenerate";
    case ErrorKind::SingularRestriction: return "singular-restriction";
    case ErrorKind::RangeViolation: return "range-violation";
    case ErrorKind::InconclusiveScan: return "inconclusive-scan";
    case ErrorKind::NotFound: return "not-found";
    case ErrorKind::NoConvergence: return "no-convergence";
    case ErrorKind::HypothesisViolation: return "hypothesis-violation";
    case ErrorKind::ContinuationStall: return "continuation-stall";
    case ErrorKind::OutOfDomain: return "out-of-domain";
    case ErrorKind::RecipeFailed: return "recipe-failed";
    case ErrorKind::NoSignChange: return "no-sign-change";
    case ErrorKind::DegenerateMuK: return "degenerate-mu_k";
    case ErrorKind::NoBracket: return "no-bracket";
    case ErrorKind::DeltaLost: return "delta-lost";
    case ErrorKind::JacobianSingular: return "jacobian-singular";
    case ErrorKind::NewtonDiverged: return "newton-diverged";
    case ErrorKind::Precondition: return "precondition";
    case ErrorKind::StageFailure: return "stage-failure";
    case ErrorKind::Config: return "config-error";
    case ErrorKind::Io: return "io-error";
  }
  return "unknown";
}

}  // namespace apsing
