#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace icx {

/// Granularity of an input unit, coarse to fine.
enum class Level { sentence = 0, phrase = 1, word = 2 };

std::string_view level_name(Level level) noexcept;
/// Throws PreconditionError on an unknown name.
Level parse_level(std::string_view name);

/// Half-open byte interval [start, end) of the input at some granularity.
struct UnitSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  Level level = Level::word;
  std::string text;

  std::size_t length() const noexcept { return end - start; }
  bool operator==(const UnitSpan&) const = default;
};

/// Rule-based segmentation. Spans are sorted, disjoint, never contain leading
/// or trailing whitespace, and every non-whitespace byte of `text` falls in
/// exactly one span.
///
///   sentence: a run of . ! ? closes a sentence when followed by whitespace and
///             an uppercase letter, or by end of text; abbreviations (Mr. Dr.
///             e.g. i.e. etc. vs. Fig. No.) never close one.
///   phrase:   sentences split after words ending in , ; : and before
///             and/or/but when they open a clause of at least two words that
///             follows at least two words.
///   word:     maximal runs of non-whitespace; punctuation stays attached.
std::vector<UnitSpan> segment(std::string_view text, Level level);

/// Splits `parent` into units of a strictly finer level. Children carry
/// offsets into the same text as `parent`. Throws InvalidLevelOrder.
std::vector<UnitSpan> refine(const UnitSpan& parent, Level finer);

}  // namespace icx
