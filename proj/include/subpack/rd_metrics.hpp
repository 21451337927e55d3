#pragma once

// Evaluation math: geometry QP derivation, the CTC texture QP ladder, PSNR,
// WS-PSNR and Bjontegaard delta rate.

#include "error.hpp"
#include "yuv.hpp"

#include <array>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace subpack {

// round(max(1, -14.2 + 0.8 q)) evaluated in tenths, rounding half away from zero.
inline auto deriveGeometryQp(int textureQp) -> int {
  if (textureQp < 0 || textureQp > 63) {
    fail(Errc::QpOutOfRange, "texture QP " + std::to_string(textureQp) + " outside 0..63");
  }
  const auto tenths = 8 * textureQp - 142;
  if (tenths <= 10) {
    return 1;
  }
  return (tenths + 5) / 10;
}

enum class CtcSequence { ClassroomVideo, Frog, Chess };

inline constexpr std::array<CtcSequence, 3> allCtcSequences{
    CtcSequence::ClassroomVideo, CtcSequence::Frog, CtcSequence::Chess};

constexpr auto name(CtcSequence s) -> std::string_view {
  switch (s) {
  case CtcSequence::ClassroomVideo:
    return "ClassroomVideo";
  case CtcSequence::Frog:
    return "Frog";
  case CtcSequence::Chess:
    return "Chess";
  }
  return "?";
}

inline auto parseCtcSequence(std::string_view text) -> CtcSequence {
  for (const auto s : allCtcSequences) {
    if (name(s) == text) {
      return s;
    }
  }
  fail(Errc::UnknownSequence, "unknown sequence '" + std::string{text} + "'");
}

inline constexpr std::array<int, 5> ctcTargetBitrateMbps{50, 28, 16, 9, 5};

struct QpLadder {
  std::string sequence_name;
  std::array<int, 5> texture_qps{};
  std::array<int, 5> geometry_qps{};
};

inline auto ctcLadder(CtcSequence sequence) -> QpLadder {
  QpLadder ladder;
  ladder.sequence_name = std::string{name(sequence)};
  switch (sequence) {
  case CtcSequence::ClassroomVideo:
    ladder.texture_qps = {25, 27, 30, 33, 38};
    break;
  case CtcSequence::Frog:
    ladder.texture_qps = {30, 36, 43, 47, 51};
    break;
  case CtcSequence::Chess:
    ladder.texture_qps = {11, 18, 25, 31, 38};
    break;
  }
  for (std::size_t i = 0; i < ladder.texture_qps.size(); ++i) {
    ladder.geometry_qps[i] = deriveGeometryQp(ladder.texture_qps[i]);
  }
  return ladder;
}

inline auto formatLadder(const QpLadder &ladder) -> std::string {
  std::ostringstream out;
  const auto row = [&](const std::string &label, const auto &values) {
    out << std::left << std::setw(24) << label << std::right;
    for (const auto v : values) {
      out << std::setw(6) << v;
    }
    out << '\n';
  };
  row("Target bitrate [Mbps]", ctcTargetBitrateMbps);
  row("QP index", std::array{1, 2, 3, 4, 5});
  row(ladder.sequence_name + " texture", ladder.texture_qps);
  row(ladder.sequence_name + " geometry", ladder.geometry_qps);
  return out.str();
}

inline constexpr double zeroErrorPsnr = 999.99;

namespace detail {
inline void checkComparable(std::span<const YuvFrame> a, std::span<const YuvFrame> b) {
  if (a.empty() || a.size() != b.size()) {
    fail(Errc::DimensionMismatch, "sequences differ in length or are empty");
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].width() != b[i].width() || a[i].height() != b[i].height()) {
      fail(Errc::DimensionMismatch, "frame " + std::to_string(i) + " dimensions differ");
    }
  }
}

inline auto psnrFromMse(double mse) -> double {
  if (mse <= 0.0) {
    return zeroErrorPsnr;
  }
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

// Row weight for equirectangular content of the given plane height.
inline auto wsRowWeight(std::uint32_t row, std::uint32_t height) -> double {
  return std::cos((row + 0.5 - height / 2.0) * std::numbers::pi / height);
}
} // namespace detail

inline auto psnr(std::span<const YuvFrame> a, std::span<const YuvFrame> b, Plane plane) -> double {
  detail::checkComparable(a, b);
  double sse = 0.0;
  double count = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto &pa = a[i].plane(plane);
    const auto &pb = b[i].plane(plane);
    for (std::size_t k = 0; k < pa.size(); ++k) {
      const double d = static_cast<double>(pa[k]) - pb[k];
      sse += d * d;
    }
    count += static_cast<double>(pa.size());
  }
  return detail::psnrFromMse(sse / count);
}

inline auto wsPsnr(std::span<const YuvFrame> a, std::span<const YuvFrame> b, Plane plane)
    -> double {
  detail::checkComparable(a, b);
  double weightedSse = 0.0;
  double weightSum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto w = a[i].planeWidth(plane);
    const auto h = a[i].planeHeight(plane);
    for (std::uint32_t y = 0; y < h; ++y) {
      const auto weight = detail::wsRowWeight(y, h);
      double rowSse = 0.0;
      for (std::uint32_t x = 0; x < w; ++x) {
        const double d = static_cast<double>(a[i].at(plane, x, y)) - b[i].at(plane, x, y);
        rowSse += d * d;
      }
      weightedSse += weight * rowSse;
      weightSum += weight * w;
    }
  }
  return detail::psnrFromMse(weightedSse / weightSum);
}

struct RdPoint {
  double bitrate{}; // bits per second
  double quality{}; // dB or any score that grows with rate
};

struct RdCurve {
  std::vector<RdPoint> points;
};

inline void validateCurve(const RdCurve &curve) {
  if (curve.points.size() < 4) {
    fail(Errc::DegenerateCurve, "a rate-distortion curve needs at least four points");
  }
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    const auto &p = curve.points[i];
    if (!(p.bitrate > 0.0) || !std::isfinite(p.bitrate) || !std::isfinite(p.quality)) {
      fail(Errc::DegenerateCurve, "point " + std::to_string(i) + " has a non-positive rate");
    }
    if (i > 0 && (p.bitrate <= curve.points[i - 1].bitrate ||
                  p.quality <= curve.points[i - 1].quality)) {
      fail(Errc::DegenerateCurve, "rates and qualities must both increase strictly");
    }
  }
}

// log10(rate) as a cubic in quality. The polynomial is kept in the normalized
// variable t = (quality - center) / scale for conditioning.
struct LogRateFit {
  double center{};
  double scale{1.0};
  std::array<double, 4> coeff{}; // ascending powers of t

  [[nodiscard]] auto operator()(double quality) const -> double {
    const auto t = (quality - center) / scale;
    return coeff[0] + t * (coeff[1] + t * (coeff[2] + t * coeff[3]));
  }

  // Closed-form integral over quality.
  [[nodiscard]] auto integral(double lo, double hi) const -> double {
    const auto anti = [&](double q) {
      const auto t = (q - center) / scale;
      return t * (coeff[0] + t * (coeff[1] / 2 + t * (coeff[2] / 3 + t * coeff[3] / 4)));
    };
    return scale * (anti(hi) - anti(lo));
  }
};

inline auto fitLogRate(const RdCurve &curve) -> LogRateFit {
  validateCurve(curve);
  const auto &pts = curve.points;
  LogRateFit fit;
  const auto lo = pts.front().quality;
  const auto hi = pts.back().quality;
  fit.center = (lo + hi) / 2;
  fit.scale = (hi - lo) / 2;

  // Normal equations of the least-squares cubic; exact interpolation for four points.
  std::array<std::array<double, 5>, 4> m{};
  for (const auto &p : pts) {
    const auto t = (p.quality - fit.center) / fit.scale;
    const auto y = std::log10(p.bitrate);
    std::array<double, 7> powers{};
    powers[0] = 1.0;
    for (std::size_t k = 1; k < powers.size(); ++k) {
      powers[k] = powers[k - 1] * t;
    }
    for (std::size_t r = 0; r < 4; ++r) {
      for (std::size_t c = 0; c < 4; ++c) {
        m[r][c] += powers[r + c];
      }
      m[r][4] += powers[r] * y;
    }
  }
  for (std::size_t col = 0; col < 4; ++col) {
    auto pivot = col;
    for (auto r = col + 1; r < 4; ++r) {
      if (std::abs(m[r][col]) > std::abs(m[pivot][col])) {
        pivot = r;
      }
    }
    if (std::abs(m[pivot][col]) < 1e-12) {
      fail(Errc::DegenerateCurve, "rate-distortion points do not determine a cubic");
    }
    std::swap(m[col], m[pivot]);
    for (std::size_t r = 0; r < 4; ++r) {
      if (r != col) {
        const auto factor = m[r][col] / m[col][col];
        for (auto c = col; c < 5; ++c) {
          m[r][c] -= factor * m[col][c];
        }
      }
    }
  }
  for (std::size_t k = 0; k < 4; ++k) {
    fit.coeff[k] = m[k][4] / m[k][k];
  }
  return fit;
}

// Average rate difference of test over anchor at equal quality, in percent.
inline auto bdRate(const RdCurve &anchor, const RdCurve &test) -> double {
  const auto fa = fitLogRate(anchor);
  const auto ft = fitLogRate(test);
  const auto lo = std::max(anchor.points.front().quality, test.points.front().quality);
  const auto hi = std::min(anchor.points.back().quality, test.points.back().quality);
  if (!(hi > lo)) {
    fail(Errc::NoOverlap, "quality ranges of the two curves do not overlap");
  }
  const auto meanDiff = (ft.integral(lo, hi) - fa.integral(lo, hi)) / (hi - lo);
  return (std::pow(10.0, meanDiff) - 1.0) * 100.0;
}

// "rate_bps,quality" per line; blank lines, '#' comments and a non-numeric
// header line are skipped.
inline auto parseRdCsv(const std::string &text) -> RdCurve {
  RdCurve curve;
  std::istringstream in{text};
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty() || line.front() == '#') {
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      fail(Errc::Malformed, "RD line " + std::to_string(lineNo) + " lacks a comma");
    }
    try {
      std::size_t used = 0;
      const auto rateText = line.substr(0, comma);
      const auto qualityText = line.substr(comma + 1);
      const auto rate = std::stod(rateText, &used);
      if (used != rateText.size()) {
        throw std::invalid_argument{"rate"};
      }
      const auto quality = std::stod(qualityText, &used);
      if (qualityText.find_first_not_of(" \t", used) != std::string::npos) {
        throw std::invalid_argument{"quality"};
      }
      curve.points.push_back({rate, quality});
    } catch (const std::exception &) {
      if (curve.points.empty() && lineNo == 1) {
        continue; // header
      }
      fail(Errc::Malformed, "RD line " + std::to_string(lineNo) + " is not 'rate_bps,quality'");
    }
  }
  validateCurve(curve);
  return curve;
}

} // namespace subpack
