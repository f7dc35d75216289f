#include <doctest.h>

#include <string>

#include "icx/errors.hpp"
#include "icx/perturber.hpp"
#include "icx/text.hpp"
#include "support.hpp"

using namespace icx;

namespace {

Mask mask_of(const std::string& bits) {
  Mask m(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) m.set_perturbed(i, bits[i] == '1');
  return m;
}

std::string apply(const std::string& text, Level level, const std::string& bits,
                  const ReplacementPolicy& p = ReplacementPolicy::remove()) {
  return apply_mask(text, segment(text, level), mask_of(bits), p);
}

}  // namespace

TEST_CASE("mask basics") {
  const auto m = mask_of("0110");
  CHECK(m.key() == "0110");
  CHECK(m.perturbed_count() == 2);
  CHECK(m.kept(0));
  CHECK(m.perturbed(1));
  CHECK(Mask::all_kept(3).key() == "000");
}

TEST_CASE("apply_mask examples") {
  CHECK(apply("a b c", Level::word, "010") == "a c");
  CHECK(apply("a b c", Level::word, "000") == "a b c");
  CHECK(apply("a b c", Level::word, "111", ReplacementPolicy::fixed("_")) == "_ _ _");
  CHECK(apply("a b c", Level::word, "100") == "b c");
  CHECK(apply("a b c", Level::word, "001") == "a b");
  CHECK(apply("a b c", Level::word, "111") == "");
  CHECK(apply("A. B. C.", Level::sentence, "010") == "A. C.");
  CHECK(apply("x  y\n\nz", Level::word, "010") == "x  z");
  CHECK(apply("red cats, and blue dogs.", Level::phrase, "10") == "and blue dogs.");
  CHECK(ReplacementPolicy::fixed("") == ReplacementPolicy::remove());
  CHECK_THROWS_AS(apply_mask("a b", segment("a b", Level::word), Mask(3), ReplacementPolicy::remove()),
                  MaskLengthMismatch);
  CHECK_THROWS_AS(apply_mask("a b", segment("a b", Level::word), Mask(2, true),
                             ReplacementPolicy::infill(InfillParams{})),
                  PreconditionError);
}

TEST_CASE("property: identity, sentinels and monotone length") {
  Rng rng(11);
  const std::vector<std::string> vocab = {"alpha", "beta,", "gamma.", "Delta", "eps;", "and", "zeta!", "Eta"};
  for (int trial = 0; trial < 200; ++trial) {
    std::string text;
    const std::size_t n = 1 + rng.below(12);
    std::vector<std::size_t> sentinel_words;
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0) text += rng.below(4) == 0 ? "  " : " ";
      text += vocab[rng.below(vocab.size())];
    }
    CAPTURE(text);
    for (auto level : {Level::sentence, Level::phrase, Level::word}) {
      const auto units = segment(text, level);
      const auto kept = Mask::all_kept(units.size());
      CHECK(apply_mask(text, units, kept, ReplacementPolicy::remove()) == text);
      CHECK(apply_mask(text, units, kept, ReplacementPolicy::fixed("#")) == text);
      Mask m(units.size());
      for (std::size_t i = 0; i < units.size(); ++i) m.set_perturbed(i, rng.below(2) == 1);
      const auto out = apply_mask(text, units, m, ReplacementPolicy::remove());
      CHECK(out.size() <= text.size());
      if (text.find("  ") == std::string::npos) CHECK(out.find("  ") == std::string::npos);
      if (!out.empty()) {
        CHECK_FALSE(is_space(out.front()));
        CHECK_FALSE(is_space(out.back()));
      }
    }
  }
  // Unique sentinels vanish when their unit is perturbed.
  for (int trial = 0; trial < 100; ++trial) {
    std::string text;
    const std::size_t n = 2 + rng.below(8);
    for (std::size_t i = 0; i < n; ++i) text += (i ? " " : "") + std::string("w") + std::to_string(i) + "q";
    const auto units = segment(text, Level::word);
    Mask m(n);
    for (std::size_t i = 0; i < n; ++i) m.set_perturbed(i, rng.below(2) == 1);
    for (const auto& p : {ReplacementPolicy::remove(), ReplacementPolicy::fixed("_")}) {
      const auto out = apply_mask(text, units, m, p);
      for (std::size_t i = 0; i < n; ++i) {
        const bool present = out.find(units[i].text) != std::string::npos;
        CHECK(present == m.kept(i));
      }
    }
  }
}

TEST_CASE("infill candidates") {
  const std::string text = "the sky is grey";
  const auto words = segment(text, Level::word);
  // The infill prompt wraps the window as <mask>sky</mask>.
  test::MockBackend blue("trigger:sky</mask>,blue,");
  const auto got = infill_candidates(text, {words[1]}, *blue.client, 3);
  REQUIRE(got.size() == 1);  // identical replies are deduplicated
  CHECK(got[0].text == "the blue is grey");
  CHECK(got[0].replacement == "blue");
  CHECK(blue.server.requests() == 3);
  CHECK(infill_window(text, {words[1]}, *blue.client, 1) == std::vector<std::string>{"the blue is grey"});
  CHECK(infill_window(text, {words[1]}, *blue.client, 0).empty());

  CHECK_THROWS_AS(infill_window(text, {words[2]}, *blue.client, 2), AllCandidatesDegenerate);
  CHECK_THROWS_AS(infill_window(text, {words[0], words[2]}, *blue.client, 1), PreconditionError);
  CHECK_THROWS_AS(infill_window(text, {}, *blue.client, 1), PreconditionError);

  test::MockBackend echo("echo");
  const auto e = infill_window(text, {words[1], words[2]}, *echo.client, 2, InfillParams{2, 3});
  REQUIRE(e.size() == 1);
  CHECK(e[0].find("the ") == 0);
  CHECK(e[0].substr(e[0].size() - 5) == " grey");
  CHECK(mask_window(text, 4, 10) == "the <mask>sky is</mask> grey");
}
