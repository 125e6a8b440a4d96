#pragma once

#include <stdexcept>
#include <string>

namespace nggan {

enum class ErrorKind {
  Io,
  Format,
  Config,
  InvalidArgument,
  Length,
  Shape,
  Degenerate,
  Resolution,
  EmptyRange,
  OutOfRange,
  Numerics,
};

// Exit code family used by the command-line tool.
// 2 = configuration, 3 = data, 4 = numeric failure.
inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::InvalidArgument:
      return 2;
    case ErrorKind::Numerics:
      return 4;
    default:
      return 3;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

template <ErrorKind K>
class KindedError : public Error {
 public:
  explicit KindedError(const std::string& what) : Error(K, what) {}
};

using IoError = KindedError<ErrorKind::Io>;
using FormatError = KindedError<ErrorKind::Format>;
using ConfigError = KindedError<ErrorKind::Config>;
// Bad parameter values (InvalidRange, InvalidParam, InvalidConfig, ModeError).
using InvalidArgument = KindedError<ErrorKind::InvalidArgument>;
using LengthError = KindedError<ErrorKind::Length>;
using ShapeError = KindedError<ErrorKind::Shape>;
// Zero-variance traces, all-zero sets, batches too small for batch statistics.
using DegenerateInput = KindedError<ErrorKind::Degenerate>;
using ResolutionError = KindedError<ErrorKind::Resolution>;
using EmptyRange = KindedError<ErrorKind::EmptyRange>;
using OutOfRange = KindedError<ErrorKind::OutOfRange>;
using NumericsError = KindedError<ErrorKind::Numerics>;

}  // namespace nggan
