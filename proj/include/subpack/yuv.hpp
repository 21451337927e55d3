#pragma once

// Planar 8-bit 4:2:0 frames and the raw file format used by the tools.

#include "error.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace subpack {

enum class Plane { Y, Cb, Cr };

class YuvFrame {
public:
  YuvFrame() = default;

  YuvFrame(std::uint32_t width, std::uint32_t height, std::uint8_t fill = 0)
      : m_width{width}, m_height{height} {
    if (width % 2 != 0 || height % 2 != 0) {
      fail(Errc::OddDimensions, "4:2:0 frame dimensions must be even, got " +
                                    std::to_string(width) + "x" + std::to_string(height));
    }
    m_y.assign(static_cast<std::size_t>(width) * height, fill);
    m_cb.assign(static_cast<std::size_t>(width / 2) * (height / 2), fill);
    m_cr = m_cb;
  }

  [[nodiscard]] auto width() const noexcept { return m_width; }
  [[nodiscard]] auto height() const noexcept { return m_height; }

  [[nodiscard]] auto planeWidth(Plane p) const noexcept {
    return p == Plane::Y ? m_width : m_width / 2;
  }
  [[nodiscard]] auto planeHeight(Plane p) const noexcept {
    return p == Plane::Y ? m_height : m_height / 2;
  }

  [[nodiscard]] auto plane(Plane p) const -> const std::vector<std::uint8_t> & {
    return p == Plane::Y ? m_y : p == Plane::Cb ? m_cb : m_cr;
  }
  [[nodiscard]] auto plane(Plane p) -> std::vector<std::uint8_t> & {
    return p == Plane::Y ? m_y : p == Plane::Cb ? m_cb : m_cr;
  }

  [[nodiscard]] auto at(Plane p, std::uint32_t x, std::uint32_t y) const -> std::uint8_t {
    return plane(p)[static_cast<std::size_t>(y) * planeWidth(p) + x];
  }
  auto at(Plane p, std::uint32_t x, std::uint32_t y) -> std::uint8_t & {
    return plane(p)[static_cast<std::size_t>(y) * planeWidth(p) + x];
  }

  [[nodiscard]] auto byteSize() const noexcept { return m_y.size() + m_cb.size() + m_cr.size(); }

  friend auto operator==(const YuvFrame &, const YuvFrame &) -> bool = default;

private:
  std::uint32_t m_width{};
  std::uint32_t m_height{};
  std::vector<std::uint8_t> m_y;
  std::vector<std::uint8_t> m_cb;
  std::vector<std::uint8_t> m_cr;
};

inline constexpr std::array<Plane, 3> allPlanes{Plane::Y, Plane::Cb, Plane::Cr};

// Luma rectangle; chroma follows at half resolution, so x, y, w and h must be even.
struct PixelRect {
  std::uint32_t x{};
  std::uint32_t y{};
  std::uint32_t w{};
  std::uint32_t h{};

  friend auto operator==(const PixelRect &, const PixelRect &) -> bool = default;
};

inline auto crop(const YuvFrame &frame, const PixelRect &r) -> YuvFrame {
  if (r.x + r.w > frame.width() || r.y + r.h > frame.height()) {
    fail(Errc::DimensionMismatch, "crop rectangle exceeds the frame");
  }
  YuvFrame out{r.w, r.h};
  for (const auto p : allPlanes) {
    const auto s = p == Plane::Y ? 1U : 2U;
    for (std::uint32_t y = 0; y < out.planeHeight(p); ++y) {
      for (std::uint32_t x = 0; x < out.planeWidth(p); ++x) {
        out.at(p, x, y) = frame.at(p, r.x / s + x, r.y / s + y);
      }
    }
  }
  return out;
}

inline void paste(YuvFrame &dst, const YuvFrame &src, std::uint32_t x0, std::uint32_t y0) {
  if (x0 % 2 != 0 || y0 % 2 != 0 || x0 + src.width() > dst.width() ||
      y0 + src.height() > dst.height()) {
    fail(Errc::DimensionMismatch, "paste target exceeds the frame");
  }
  for (const auto p : allPlanes) {
    const auto s = p == Plane::Y ? 1U : 2U;
    for (std::uint32_t y = 0; y < src.planeHeight(p); ++y) {
      for (std::uint32_t x = 0; x < src.planeWidth(p); ++x) {
        dst.at(p, x0 / s + x, y0 / s + y) = src.at(p, x, y);
      }
    }
  }
}

// Extends the frame to width x height by replicating the last column and row.
inline auto padReplicate(const YuvFrame &frame, std::uint32_t width, std::uint32_t height)
    -> YuvFrame {
  if (width < frame.width() || height < frame.height()) {
    fail(Errc::DimensionMismatch, "padding cannot shrink a frame");
  }
  YuvFrame out{width, height};
  for (const auto p : allPlanes) {
    const auto sw = frame.planeWidth(p);
    const auto sh = frame.planeHeight(p);
    for (std::uint32_t y = 0; y < out.planeHeight(p); ++y) {
      for (std::uint32_t x = 0; x < out.planeWidth(p); ++x) {
        out.at(p, x, y) = frame.at(p, std::min(x, sw - 1), std::min(y, sh - 1));
      }
    }
  }
  return out;
}

// Quarter turn clockwise, applied per plane.
inline auto rotate90(const YuvFrame &frame) -> YuvFrame {
  YuvFrame out{frame.height(), frame.width()};
  for (const auto p : allPlanes) {
    const auto h = frame.planeHeight(p);
    for (std::uint32_t y = 0; y < frame.planeHeight(p); ++y) {
      for (std::uint32_t x = 0; x < frame.planeWidth(p); ++x) {
        out.at(p, h - 1 - y, x) = frame.at(p, x, y);
      }
    }
  }
  return out;
}

inline auto rotate270(const YuvFrame &frame) -> YuvFrame {
  YuvFrame out{frame.height(), frame.width()};
  for (const auto p : allPlanes) {
    const auto w = frame.planeWidth(p);
    for (std::uint32_t y = 0; y < frame.planeHeight(p); ++y) {
      for (std::uint32_t x = 0; x < frame.planeWidth(p); ++x) {
        out.at(p, y, w - 1 - x) = frame.at(p, x, y);
      }
    }
  }
  return out;
}

// Raw files: Y, Cb, Cr planes back to back per frame, frames concatenated.
inline void writeRawFrames(const std::string &path, const std::vector<YuvFrame> &frames) {
  std::ofstream stream{path, std::ios::binary};
  if (!stream) {
    fail(Errc::Io, "cannot open " + path + " for writing");
  }
  for (const auto &frame : frames) {
    for (const auto p : allPlanes) {
      const auto &samples = frame.plane(p);
      stream.write(reinterpret_cast<const char *>(samples.data()),
                   static_cast<std::streamsize>(samples.size()));
    }
  }
  if (!stream) {
    fail(Errc::Io, "write to " + path + " failed");
  }
}

inline auto readRawFrames(const std::string &path, std::uint32_t width, std::uint32_t height)
    -> std::vector<YuvFrame> {
  std::ifstream stream{path, std::ios::binary};
  if (!stream) {
    fail(Errc::Io, "cannot open " + path);
  }
  const auto frameBytes = YuvFrame{width, height}.byteSize();
  const auto fileBytes = std::filesystem::file_size(path);
  if (frameBytes == 0 || fileBytes % frameBytes != 0) {
    fail(Errc::DimensionMismatch, path + " is not a whole number of " + std::to_string(width) +
                                      "x" + std::to_string(height) + " frames");
  }
  std::vector<YuvFrame> frames(fileBytes / frameBytes, YuvFrame{width, height});
  for (auto &frame : frames) {
    for (const auto p : allPlanes) {
      auto &samples = frame.plane(p);
      stream.read(reinterpret_cast<char *>(samples.data()),
                  static_cast<std::streamsize>(samples.size()));
    }
  }
  if (!stream) {
    fail(Errc::Io, "read from " + path + " failed");
  }
  return frames;
}

} // namespace subpack
