#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace kin3d {

enum class Errc {
  NonPositiveDepth,
  SingularCalibration,
  BehindCamera,
  RangeError,
  InsufficientData,
  SingularInnovation,
  NoGroundTruth,
  EmptyMatchSet,
  DegenerateVariance,
  InsufficientFrames,
  ParseError,
  UnitError,
  IoError,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::NonPositiveDepth: return "NonPositiveDepth";
    case Errc::SingularCalibration: return "SingularCalibration";
    case Errc::BehindCamera: return "BehindCamera";
    case Errc::RangeError: return "RangeError";
    case Errc::InsufficientData: return "InsufficientData";
    case Errc::SingularInnovation: return "SingularInnovation";
    case Errc::NoGroundTruth: return "NoGroundTruth";
    case Errc::EmptyMatchSet: return "EmptyMatchSet";
    case Errc::DegenerateVariance: return "DegenerateVariance";
    case Errc::InsufficientFrames: return "InsufficientFrames";
    case Errc::ParseError: return "ParseError";
    case Errc::UnitError: return "UnitError";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the typed codes above.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Text-format failure; line and column are 1-based, column 0 means the whole line.
class ParseError : public Error {
 public:
  ParseError(Errc code, std::size_t line, std::size_t column, const std::string& what)
      : Error(code, "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace kin3d
