#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace subpack {

enum class Errc {
  OutOfBits,
  Malformed,
  ValueOutOfRange,
  InvalidLayout,
  IdWidthMismatch,
  CtuMismatch,
  IdCollision,
  FrameCountMismatch,
  PlanGeometryMismatch,
  UnknownSubpicId,
  DimensionMismatch,
  OddDimensions,
  PayloadCorrupt,
  MissingReference,
  EmptyComponent,
  MissingVps,
  TruncatedUnit,
  UnknownUnitType,
  QpOutOfRange,
  UnknownSequence,
  NoOverlap,
  DegenerateCurve,
  EmptyInput,
  RoundTripFailure,
  Io,
};

constexpr auto name(Errc code) -> std::string_view {
  switch (code) {
  case Errc::OutOfBits:
    return "OutOfBits";
  case Errc::Malformed:
    return "Malformed";
  case Errc::ValueOutOfRange:
    return "ValueOutOfRange";
  case Errc::InvalidLayout:
    return "InvalidLayout";
  case Errc::IdWidthMismatch:
    return "IdWidthMismatch";
  case Errc::CtuMismatch:
    return "CtuMismatch";
  case Errc::IdCollision:
    return "IdCollision";
  case Errc::FrameCountMismatch:
    return "FrameCountMismatch";
  case Errc::PlanGeometryMismatch:
    return "PlanGeometryMismatch";
  case Errc::UnknownSubpicId:
    return "UnknownSubpicId";
  case Errc::DimensionMismatch:
    return "DimensionMismatch";
  case Errc::OddDimensions:
    return "OddDimensions";
  case Errc::PayloadCorrupt:
    return "PayloadCorrupt";
  case Errc::MissingReference:
    return "MissingReference";
  case Errc::EmptyComponent:
    return "EmptyComponent";
  case Errc::MissingVps:
    return "MissingVps";
  case Errc::TruncatedUnit:
    return "TruncatedUnit";
  case Errc::UnknownUnitType:
    return "UnknownUnitType";
  case Errc::QpOutOfRange:
    return "QpOutOfRange";
  case Errc::UnknownSequence:
    return "UnknownSequence";
  case Errc::NoOverlap:
    return "NoOverlap";
  case Errc::DegenerateCurve:
    return "DegenerateCurve";
  case Errc::EmptyInput:
    return "EmptyInput";
  case Errc::RoundTripFailure:
    return "RoundTripFailure";
  case Errc::Io:
    return "Io";
  }
  return "Unknown";
}

// All toolkit failures are reported through this exception; code() is stable
// and is what the CLI prints.
class Error : public std::runtime_error {
public:
  Error(Errc code, const std::string &what) : std::runtime_error{what}, m_code{code} {}

  [[nodiscard]] auto code() const noexcept -> Errc { return m_code; }

private:
  Errc m_code;
};

[[noreturn]] inline void fail(Errc code, const std::string &what) { throw Error{code, what}; }

inline void verify(bool condition, Errc code, const std::string &what) {
  if (!condition) {
    fail(code, what);
  }
}

} // namespace subpack
