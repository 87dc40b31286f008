#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>

#include "rlvr/model.hpp"

namespace rlvr {

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string format_double(double x) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x, std::chars_format::general, 17);
  return std::string(buf.data(), end);
}

/// Canonical text for hashing: every field in a fixed order, reals at 17
/// significant digits.
inline std::string canonical_text(const Scenario& s) {
  std::string out = "mode=" + std::string(to_string(s.mode));
  out += ";beta=" + format_double(s.beta);
  out += ";horizon=" + format_double(s.horizon);
  out += ";step=" + format_double(s.step);
  out += ";stride=" + std::to_string(s.record_stride);
  out += ";seed=" + std::to_string(s.seed);
  for (std::size_t i = 0; i < s.task.size(); ++i) {
    const auto& p = s.task.patterns()[i];
    out += ";pattern=" + p.name + "," + format_double(p.p_succ) + "," + format_double(s.ref.prob(i));
  }
  if (s.p_sft) {
    out += ";p_sft=";
    for (double x : *s.p_sft) out += format_double(x) + ",";
  }
  return out;
}

inline std::uint64_t scenario_digest(const Scenario& s) { return fnv1a(canonical_text(s)); }

inline std::string digest_hex(std::uint64_t d) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, d >>= 4) out[static_cast<std::size_t>(i)] = kHex[d & 0xf];
  return out;
}

}  // namespace rlvr
