#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace crverify {

enum class ErrorCode {
  depth_exceeded,
  degenerate,
  singular_system,
  frame_expansion_failure,
  prediction_mismatch,
  mode_mismatch,
  rank_drop,
  not_adapted,
  oracle_mismatch,
  hypothesis_violated,
  degenerate_chart,
  metric_mismatch,
  no_feasible_point,
  not_flat,
  syntax_error,
  unknown_symbol,
  config_error,
};

constexpr std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::depth_exceeded: return "DepthExceeded";
    case ErrorCode::degenerate: return "Degenerate";
    case ErrorCode::singular_system: return "SingularSystem";
    case ErrorCode::frame_expansion_failure: return "FrameExpansionFailure";
    case ErrorCode::prediction_mismatch: return "PredictionMismatch";
    case ErrorCode::mode_mismatch: return "ModeMismatch";
    case ErrorCode::rank_drop: return "RankDrop";
    case ErrorCode::not_adapted: return "NotAdapted";
    case ErrorCode::oracle_mismatch: return "OracleMismatch";
    case ErrorCode::hypothesis_violated: return "HypothesisViolated";
    case ErrorCode::degenerate_chart: return "DegenerateChart";
    case ErrorCode::metric_mismatch: return "MetricMismatch";
    case ErrorCode::no_feasible_point: return "NoFeasiblePoint";
    case ErrorCode::not_flat: return "NotFlat";
    case ErrorCode::syntax_error: return "SyntaxError";
    case ErrorCode::unknown_symbol: return "UnknownSymbol";
    case ErrorCode::config_error: return "ConfigError";
  }
  return "Error";
}

/// Base of every error raised by the library. `code()` identifies the failure
/// class; the message carries the details (check name, location, values).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

template <ErrorCode C>
class CodedError : public Error {
 public:
  explicit CodedError(const std::string& what) : Error(C, what) {}
};

using DepthExceeded = CodedError<ErrorCode::depth_exceeded>;
using Degenerate = CodedError<ErrorCode::degenerate>;
using SingularSystem = CodedError<ErrorCode::singular_system>;
using FrameExpansionFailure = CodedError<ErrorCode::frame_expansion_failure>;
using PredictionMismatch = CodedError<ErrorCode::prediction_mismatch>;
using ModeMismatch = CodedError<ErrorCode::mode_mismatch>;
using RankDrop = CodedError<ErrorCode::rank_drop>;
using NotAdapted = CodedError<ErrorCode::not_adapted>;
using OracleMismatch = CodedError<ErrorCode::oracle_mismatch>;
using HypothesisViolated = CodedError<ErrorCode::hypothesis_violated>;
using DegenerateChart = CodedError<ErrorCode::degenerate_chart>;
using MetricMismatch = CodedError<ErrorCode::metric_mismatch>;
using NoFeasiblePoint = CodedError<ErrorCode::no_feasible_point>;
using NotFlat = CodedError<ErrorCode::not_flat>;
using ConfigError = CodedError<ErrorCode::config_error>;

/// Parse failures carry a 1-based line/column.
class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& what, int line, int column)
      : Error(ErrorCode::syntax_error,
              what + " at line " + std::to_string(line) + ", column " + std::to_string(column)),
        line_(line),
        column_(column) {}

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

class UnknownSymbol : public Error {
 public:
  UnknownSymbol(const std::string& symbol, int line, int column)
      : Error(ErrorCode::unknown_symbol, "'" + symbol + "' at line " + std::to_string(line) +
                                             ", column " + std::to_string(column)),
        symbol_(symbol),
        line_(line),
        column_(column) {}

  const std::string& symbol() const noexcept { return symbol_; }
  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  std::string symbol_;
  int line_;
  int column_;
};

}  // namespace crverify
