#include "icx/text.hpp"

#include <limits>

namespace icx {

std::vector<TextToken> whitespace_tokens(std::string_view text) {
  std::vector<TextToken> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    if (i >= text.size()) break;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    out.push_back({std::string(text.substr(i, j - i)), i});
    i = j;
  }
  return out;
}

std::vector<std::string> whitespace_split(std::string_view text) {
  std::vector<std::string> out;
  for (auto& t : whitespace_tokens(text)) out.push_back(std::move(t.text));
  return out;
}

std::string_view trim(std::string_view s) noexcept {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

bool all_space(std::string_view s) noexcept {
  for (char c : s) {
    if (!is_space(c)) return false;
  }
  return true;
}

std::uint64_t Rng::below(std::uint64_t bound) {
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % bound;
}

}  // namespace icx
