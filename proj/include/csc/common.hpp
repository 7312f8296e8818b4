#pragma once

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

namespace csc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using RowVec = Eigen::RowVectorXd;
using ScalarFn = std::function<double(double)>;

enum class Errc {
  Infeasible,
  MaxIterations,
  RankDeficient,
  ZeroGradient,
  WitnessInfeasible,
  SelectionConditionViolated,
  NotInFeasibleSet,
  UnsupportedDimension,
  BadCount,
  ConditionViolated,
  SelectionNotFeasible,
  DegenerateGeometry,
  AtCenter,
  BadTransform,
  NonFiniteState,
  ThrustSingularity,
  ConfigParse,
  Io,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::Infeasible: return "Infeasible";
    case Errc::MaxIterations: return "MaxIterations";
    case Errc::RankDeficient: return "RankDeficient";
    case Errc::ZeroGradient: return "ZeroGradient";
    case Errc::WitnessInfeasible: return "WitnessInfeasible";
    case Errc::SelectionConditionViolated: return "SelectionConditionViolated";
    case Errc::NotInFeasibleSet: return "NotInFeasibleSet";
    case Errc::UnsupportedDimension: return "UnsupportedDimension";
    case Errc::BadCount: return "BadCount";
    case Errc::ConditionViolated: return "ConditionViolated";
    case Errc::SelectionNotFeasible: return "SelectionNotFeasible";
    case Errc::DegenerateGeometry: return "DegenerateGeometry";
    case Errc::AtCenter: return "AtCenter";
    case Errc::BadTransform: return "BadTransform";
    case Errc::NonFiniteState: return "NonFiniteState";
    case Errc::ThrustSingularity: return "ThrustSingularity";
    case Errc::ConfigParse: return "ConfigParse";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

/// Single exception type for the library; `code()` tells callers what went wrong.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Offending pair for Errc::SelectionConditionViolated.
class SelectionConditionError : public Error {
 public:
  SelectionConditionError(int j, int k, const std::string& what)
      : Error(Errc::SelectionConditionViolated, what), j(j), k(k) {}
  int j;
  int k;
};

}  // namespace csc
