#pragma once

#include <stdexcept>
#include <string>

namespace fold {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// malformed bytes in a file we tried to parse
struct FormatError : Error {
  using Error::Error;
};

// dimension / index / argument violations
struct RangeError : Error {
  using Error::Error;
};

// open/read/write failures
struct IoError : Error {
  using Error::Error;
};

// a pipeline stage was invoked before the stage it depends on
struct MissingStageError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

}  // namespace fold
