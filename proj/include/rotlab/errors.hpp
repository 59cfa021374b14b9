#pragma once

#include <stdexcept>
#include <string>

namespace rotlab {

enum class errc {
  negative_weight,
  bad_mass,
  bad_axis,
  incompatible_spaces,
  length_mismatch,
  space_mismatch,
  empty_grid,
  nonpositive_alpha,
  zero_marginal,
  missing_factors,
  bad_order,
  marginal_mismatch,
  unknown_experiment,
  config_invalid,
  solver_failure,
  degenerate_data,
  invalid_metric,
  bad_input,
};

inline const char* errc_name(errc c) {
  switch (c) {
    case errc::negative_weight: return "NegativeWeight";
    case errc::bad_mass: return "BadMass";
    case errc::bad_axis: return "BadAxis";
    case errc::incompatible_spaces: return "IncompatibleSpaces";
    case errc::length_mismatch: return "LengthMismatch";
    case errc::space_mismatch: return "SpaceMismatch";
    case errc::empty_grid: return "EmptyGrid";
    case errc::nonpositive_alpha: return "NonpositiveAlpha";
    case errc::zero_marginal: return "ZeroMarginal";
    case errc::missing_factors: return "MissingFactors";
    case errc::bad_order: return "BadOrder";
    case errc::marginal_mismatch: return "MarginalMismatch";
    case errc::unknown_experiment: return "UnknownExperiment";
    case errc::config_invalid: return "ConfigInvalid";
    case errc::solver_failure: return "SolverFailure";
    case errc::degenerate_data: return "DegenerateData";
    case errc::invalid_metric: return "InvalidMetric";
    case errc::bad_input: return "BadInput";
  }
  return "Error";
}

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, errc code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace rotlab
