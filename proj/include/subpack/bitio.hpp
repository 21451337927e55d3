#pragma once

#include "error.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace subpack {

using Bytes = std::vector<std::uint8_t>;
using ByteSpan = std::span<const std::uint8_t>;

// Largest value an order-0 exp-Golomb codeword may carry (32-bit info field).
inline constexpr std::uint64_t maxUeValue = 0xFFFFFFFEU;

// One decoded syntax element, recorded when a reader has a trace attached.
struct TraceEntry {
  std::string name;
  std::size_t bit_offset{};
  std::size_t bit_length{};
  std::uint64_t value{};
};

using SyntaxTrace = std::vector<TraceEntry>;

// MSB-first reader over an unescaped RBSP. Never zero-fills past the end.
class BitReader {
public:
  explicit BitReader(ByteSpan data, SyntaxTrace *trace = nullptr) : m_data{data}, m_trace{trace} {}

  [[nodiscard]] auto bitOffset() const noexcept { return m_offset; }
  [[nodiscard]] auto bitsLeft() const noexcept { return 8 * m_data.size() - m_offset; }
  [[nodiscard]] auto byteAligned() const noexcept -> bool { return m_offset % 8 == 0; }

  auto readBits(unsigned n, std::string_view name = {}) -> std::uint32_t {
    if (n < 1 || n > 32) {
      fail(Errc::ValueOutOfRange, "read_bits width must be in 1..32, got " + std::to_string(n));
    }
    const auto start = m_offset;
    const auto value = static_cast<std::uint32_t>(take(n));
    record(name, start, value);
    return value;
  }

  auto readFlag(std::string_view name = {}) -> bool { return readBits(1, name) != 0; }

  auto readUe(std::string_view name = {}) -> std::uint32_t {
    const auto start = m_offset;
    unsigned leadingZeros = 0;
    while (take(1) == 0) {
      if (++leadingZeros > 31) {
        fail(Errc::Malformed, "exp-Golomb codeword with more than 31 leading zeros");
      }
    }
    // The 1 bit already consumed is the top bit of the (z+1)-bit info field.
    std::uint64_t info = 1;
    if (leadingZeros > 0) {
      info = (info << leadingZeros) | take(leadingZeros);
    }
    const auto value = static_cast<std::uint32_t>(info - 1);
    record(name, start, value);
    return value;
  }

  auto readBytes(std::size_t count, std::string_view name = {}) -> Bytes {
    if (!byteAligned()) {
      fail(Errc::Malformed, "byte read at unaligned position");
    }
    if (count > bitsLeft() / 8) {
      fail(Errc::OutOfBits, "need " + std::to_string(count) + " bytes, " +
                                std::to_string(bitsLeft() / 8) + " remain");
    }
    const auto first = m_data.begin() + static_cast<std::ptrdiff_t>(m_offset / 8);
    Bytes out(first, first + static_cast<std::ptrdiff_t>(count));
    record(name, m_offset, count);
    m_offset += 8 * count;
    return out;
  }

  // Consumes a stop bit and zero bits up to the next byte boundary.
  void readAlignment(std::string_view name = "alignment") {
    const auto start = m_offset;
    if (take(1) != 1) {
      fail(Errc::Malformed, "missing stop bit at bit " + std::to_string(start));
    }
    while (!byteAligned()) {
      if (take(1) != 0) {
        fail(Errc::Malformed, "nonzero alignment bit at bit " + std::to_string(m_offset - 1));
      }
    }
    record(name, start, 1);
  }

  // Zero bits up to the next byte boundary.
  void readZeroAlignment() {
    while (!byteAligned()) {
      if (take(1) != 0) {
        fail(Errc::Malformed, "nonzero alignment bit");
      }
    }
  }

  // Trailing bits must also be the last thing in the buffer.
  void readTrailingBits() {
    readAlignment("rbsp_trailing_bits");
    if (bitsLeft() != 0) {
      fail(Errc::Malformed, std::to_string(bitsLeft() / 8) + " bytes after rbsp_trailing_bits");
    }
  }

private:
  auto take(unsigned n) -> std::uint64_t {
    if (n > bitsLeft()) {
      fail(Errc::OutOfBits, "need " + std::to_string(n) + " bits, " + std::to_string(bitsLeft()) +
                                " remain");
    }
    std::uint64_t value = 0;
    for (unsigned i = 0; i < n; ++i) {
      const auto byte = m_data[m_offset / 8];
      const auto bit = (byte >> (7 - m_offset % 8)) & 1U;
      value = (value << 1) | bit;
      ++m_offset;
    }
    return value;
  }

  void record(std::string_view name, std::size_t start, std::uint64_t value) {
    if (m_trace != nullptr && !name.empty()) {
      m_trace->push_back({std::string{name}, start, m_offset - start, value});
    }
  }

  ByteSpan m_data;
  std::size_t m_offset{};
  SyntaxTrace *m_trace{};
};

class BitWriter {
public:
  void writeBits(std::uint64_t value, unsigned n) {
    if (n > 64 || (n < 64 && (value >> n) != 0)) {
      fail(Errc::ValueOutOfRange,
           "value " + std::to_string(value) + " does not fit in " + std::to_string(n) + " bits");
    }
    for (unsigned i = n; i > 0; --i) {
      putBit(static_cast<unsigned>((value >> (i - 1)) & 1U));
    }
  }

  void writeFlag(bool flag) { putBit(flag ? 1U : 0U); }

  void writeUe(std::uint64_t value) {
    if (value > maxUeValue) {
      fail(Errc::ValueOutOfRange, "ue value " + std::to_string(value) + " exceeds 2^32-2");
    }
    const auto info = value + 1;
    unsigned width = 0;
    while ((info >> width) != 0) {
      ++width;
    }
    writeBits(0, width - 1);
    writeBits(info, width);
  }

  void writeBytes(ByteSpan bytes) {
    if (!byteAligned()) {
      fail(Errc::Malformed, "byte write at unaligned position");
    }
    m_bytes.insert(m_bytes.end(), bytes.begin(), bytes.end());
    m_bitCount += 8 * bytes.size();
  }

  // Stop bit followed by zero bits to the byte boundary.
  void writeAlignment() {
    putBit(1);
    writeZeroAlignment();
  }

  void writeZeroAlignment() {
    while (!byteAligned()) {
      putBit(0);
    }
  }

  void writeTrailingBits() { writeAlignment(); }

  [[nodiscard]] auto byteAligned() const noexcept -> bool { return m_bitCount % 8 == 0; }
  [[nodiscard]] auto bitCount() const noexcept -> std::size_t { return m_bitCount; }
  [[nodiscard]] auto bytes() const & -> const Bytes & { return m_bytes; }
  [[nodiscard]] auto bytes() && -> Bytes { return std::move(m_bytes); }

private:
  void putBit(unsigned bit) {
    if (m_bitCount % 8 == 0) {
      m_bytes.push_back(0);
    }
    m_bytes.back() |= static_cast<std::uint8_t>(bit << (7 - m_bitCount % 8));
    ++m_bitCount;
  }

  Bytes m_bytes;
  std::size_t m_bitCount{};
};

// Inserts 0x03 after every 00 00 that would otherwise precede a byte <= 0x03.
// Appends to out.
inline void escapeRbspInto(ByteSpan raw, Bytes &out) {
  int zeros = 0;
  for (const auto byte : raw) {
    if (zeros == 2 && byte <= 0x03) {
      out.push_back(0x03);
      zeros = 0;
    }
    out.push_back(byte);
    zeros = byte == 0 ? zeros + 1 : 0;
  }
}

inline auto escapeRbsp(ByteSpan raw) -> Bytes {
  Bytes out;
  out.reserve(raw.size() + raw.size() / 64 + 4);
  escapeRbspInto(raw, out);
  return out;
}

// Appends the unescaped bytes to out.
inline void unescapeRbspInto(ByteSpan escaped, Bytes &out) {
  int zeros = 0;
  for (std::size_t i = 0; i < escaped.size(); ++i) {
    const auto byte = escaped[i];
    if (zeros == 2) {
      if (byte == 0x03) {
        if (i + 1 < escaped.size() && escaped[i + 1] > 0x03) {
          fail(Errc::Malformed, "emulation prevention byte followed by " +
                                    std::to_string(escaped[i + 1]) + " at offset " +
                                    std::to_string(i));
        }
        zeros = 0;
        continue;
      }
      if (byte < 0x03) {
        fail(Errc::Malformed, "start code emulation at offset " + std::to_string(i - 2));
      }
    }
    out.push_back(byte);
    zeros = byte == 0 ? zeros + 1 : 0;
  }
}

inline auto unescapeRbsp(ByteSpan escaped) -> Bytes {
  Bytes out;
  out.reserve(escaped.size());
  unescapeRbspInto(escaped, out);
  return out;
}

} // namespace subpack
