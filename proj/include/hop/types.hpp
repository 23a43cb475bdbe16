#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace hop {

// Dense tensors are row-major: one row per instance in a batch.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

enum class ErrorCode {
  kDimensionMismatch,
  kInvalidArgument,
  kNotInterior,
  kInfeasible,
  kDegenerate,
  kUnbounded,
  kNonFinite,
  kIo,
  kHashMismatch,
  kGenerationExhausted,
};

const char* error_code_name(ErrorCode code);

/// Every failure raised by the library carries a machine-readable code so the
/// CLI can emit it as JSON.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace hop
