#pragma once
#include <stdexcept>
#include <string>

namespace stlctl {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor/tape shape violations; message names the offending node and op.
struct ShapeError : Error {
  using Error::Error;
};

// STL text that does not conform to the grammar; carries line/column.
struct ParseError : Error {
  int line = 0;
  int column = 0;
  ParseError(const std::string& msg, int line_, int col_)
      : Error("line " + std::to_string(line_) + ", col " + std::to_string(col_) + ": " + msg),
        line(line_),
        column(col_) {}
};

struct ConfigError : Error {
  using Error::Error;
};

// Training/optimization aborts (NaN loss, NaN gradient) with context.
struct TrainError : Error {
  using Error::Error;
};

}  // namespace stlctl
