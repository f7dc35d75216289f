#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace icx {

/// 64-bit FNV-1a over the raw bytes of `s`.
constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline bool is_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

/// A whitespace-delimited token and its byte offset in the source text.
struct TextToken {
  std::string text;
  std::size_t offset = 0;

  std::size_t end() const noexcept { return offset + text.size(); }
  bool operator==(const TextToken&) const = default;
};

/// Maximal runs of non-whitespace, with offsets.
std::vector<TextToken> whitespace_tokens(std::string_view text);

/// Token strings only.
std::vector<std::string> whitespace_split(std::string_view text);

std::string_view trim(std::string_view s) noexcept;

bool all_space(std::string_view s) noexcept;

/// Seeded generator with platform-independent draws. std::mt19937_64's output
/// sequence is fixed by the standard; the distributions are not, so bounded
/// draws are done here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace icx
