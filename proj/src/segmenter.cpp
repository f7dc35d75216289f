#include "icx/segmenter.hpp"

#include <array>
#include <cctype>

#include "icx/errors.hpp"
#include "icx/text.hpp"

namespace icx {
namespace {

constexpr std::array<std::string_view, 8> kAbbreviations = {
    "Mr.", "Dr.", "e.g.", "i.e.", "etc.", "vs.", "Fig.", "No."};

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

bool is_abbreviation(std::string_view word) {
  for (auto a : kAbbreviations) {
    if (word == a) return true;
  }
  return false;
}

UnitSpan make_span(std::string_view text, std::size_t b, std::size_t e, Level level) {
  return UnitSpan{b, e, level, std::string(text.substr(b, e - b))};
}

// Trims whitespace from [b, e) and appends if non-empty.
void push_trimmed(std::vector<UnitSpan>& out, std::string_view text, std::size_t b, std::size_t e,
                  Level level) {
  while (b < e && is_space(text[b])) ++b;
  while (e > b && is_space(text[e - 1])) --e;
  if (b < e) out.push_back(make_span(text, b, e, level));
}

std::vector<UnitSpan> sentences(std::string_view text) {
  std::vector<UnitSpan> out;
  std::size_t start = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_terminator(text[i])) {
      ++i;
      continue;
    }
    std::size_t run_end = i;
    while (run_end < text.size() && is_terminator(text[run_end])) ++run_end;
    bool closes = false;
    if (run_end == text.size()) {
      closes = true;
    } else if (is_space(text[run_end])) {
      std::size_t k = run_end;
      while (k < text.size() && is_space(text[k])) ++k;
      closes = (k == text.size()) || std::isupper(static_cast<unsigned char>(text[k]));
    }
    if (closes) {
      std::size_t w = i;
      while (w > start && !is_space(text[w - 1])) --w;
      if (is_abbreviation(text.substr(w, run_end - w))) closes = false;
    }
    if (closes) {
      push_trimmed(out, text, start, run_end, Level::sentence);
      start = run_end;
    }
    i = run_end;
  }
  push_trimmed(out, text, start, text.size(), Level::sentence);
  return out;
}

std::vector<UnitSpan> words(std::string_view text, std::size_t base = 0) {
  std::vector<UnitSpan> out;
  for (const auto& t : whitespace_tokens(text)) {
    out.push_back(UnitSpan{base + t.offset, base + t.end(), Level::word, t.text});
  }
  return out;
}

bool is_conjunction(std::string_view w) { return w == "and" || w == "or" || w == "but"; }

bool ends_clause(std::string_view w) {
  const char c = w.back();
  return c == ',' || c == ';' || c == ':';
}

// Phrases of one sentence; `full` is the whole text, the sentence is [b, e).
void phrases_of(std::vector<UnitSpan>& out, std::string_view full, std::size_t b, std::size_t e) {
  const auto ws = words(full.substr(b, e - b), b);
  std::size_t phrase_first = 0;  // index into ws
  auto close = [&](std::size_t last_exclusive) {
    if (last_exclusive > phrase_first) {
      out.push_back(make_span(full, ws[phrase_first].start, ws[last_exclusive - 1].end, Level::phrase));
      phrase_first = last_exclusive;
    }
  };
  for (std::size_t i = 0; i < ws.size(); ++i) {
    const std::string_view w = ws[i].text;
    if (i > phrase_first && is_conjunction(w)) {
      const bool after_comma = ends_clause(ws[i - 1].text);
      const bool long_clause = (i - phrase_first) >= 2 && (ws.size() - i) >= 2;
      if (after_comma || long_clause) close(i);
    }
    if (ends_clause(w)) close(i + 1);
  }
  close(ws.size());
}

}  // namespace

std::string_view level_name(Level level) noexcept {
  switch (level) {
    case Level::sentence: return "sentence";
    case Level::phrase: return "phrase";
    case Level::word: return "word";
  }
  return "word";
}

Level parse_level(std::string_view name) {
  if (name == "sentence") return Level::sentence;
  if (name == "phrase") return Level::phrase;
  if (name == "word") return Level::word;
  throw PreconditionError("unknown level '" + std::string(name) + "'");
}

std::vector<UnitSpan> segment(std::string_view text, Level level) {
  switch (level) {
    case Level::sentence:
      return sentences(text);
    case Level::word:
      return words(text);
    case Level::phrase: {
      std::vector<UnitSpan> out;
      for (const auto& s : sentences(text)) phrases_of(out, text, s.start, s.end);
      return out;
    }
  }
  return {};
}

std::vector<UnitSpan> refine(const UnitSpan& parent, Level finer) {
  if (static_cast<int>(finer) <= static_cast<int>(parent.level)) {
    throw InvalidLevelOrder("cannot refine a " + std::string(level_name(parent.level)) + " into " +
                            std::string(level_name(finer)) + " units");
  }
  auto children = segment(parent.text, finer);
  for (auto& c : children) {
    c.start += parent.start;
    c.end += parent.start;
  }
  return children;
}

}  // namespace icx
