#include <doctest.h>

#include <cmath>
#include <limits>

#include "icx/cell.hpp"
#include "icx/errors.hpp"
#include "support.hpp"

using namespace icx;
using namespace icx::cell;

namespace {

// The explained model answers YES iff the prompt mentions "blue"; the infiller
// always proposes "blue" (every infill prompt carries the <mask> sentinel).
struct TriggerScenario {
  test::MockBackend model{"trigger:blue,YES,NO"};
  test::MockBackend infiller{"trigger:<mask>,blue,"};
  Backends backends() { return Backends{*model.client, infiller.client.get(), nullptr}; }
  std::int64_t requests() const { return model.server.requests() + infiller.server.requests(); }
};

void check_invariants(const ContrastiveExplanation& r, const CellParams& p) {
  CHECK(apply_edits(r.original_prompt, r.edits) == r.contrastive_prompt);
  CHECK(r.queries_used <= p.budget);
  CHECK(r.edits.size() <= p.max_edits);
  for (std::size_t i = 1; i < r.best_history.size(); ++i) CHECK(r.best_history[i] >= r.best_history[i - 1]);
}

}  // namespace

TEST_CASE("cell finds the trigger") {
  TriggerScenario s;
  CellParams p;
  const auto r = cell_explain("the sky is grey today", s.backends(), ScalarizerSpec::parse("cell-bleu"), p, 1);
  CHECK(r.succeeded);
  CHECK(r.original_response == "NO");
  CHECK(r.contrastive_response == "YES");
  CHECK(r.edits.size() == 1);
  CHECK(r.edits[0].replacement == "blue");
  CHECK(r.contrastive_prompt.find("blue") != std::string::npos);
  CHECK(r.contrast_score == doctest::Approx(1.0 - 0.1 * static_cast<double>(r.edits[0].window.size()) / 5.0));
  CHECK(r.contrast_score >= p.threshold);
  CHECK(r.queries_used == s.requests());
  check_invariants(r, p);
}

TEST_CASE("mcell finds the trigger in round one") {
  TriggerScenario s;
  CellParams p;
  const auto r = mcell_explain("the sky is grey", s.backends(), ScalarizerSpec::parse("cell-bleu"), p, 1);
  CHECK(r.succeeded);
  CHECK(r.edits.size() == 1);
  CHECK(r.edits[0].window.size() == 1);
  CHECK(r.edits[0].window[0].text == "the");  // all ties, leftmost wins
  CHECK(r.contrastive_prompt == "blue sky is grey");
  CHECK(r.contrast_score == doctest::Approx(0.975));
  CHECK(r.queries_used == s.requests());
  check_invariants(r, p);
}

TEST_CASE("unreachable threshold fails within budget") {
  for (std::int64_t budget : {10, 25, 60}) {
    TriggerScenario s;
    CellParams p;
    p.budget = budget;
    p.threshold = std::numeric_limits<double>::infinity();
    const auto r = cell_explain("one two three four five six", s.backends(), ScalarizerSpec::parse("cell-bleu"), p, 3);
    CHECK_FALSE(r.succeeded);
    CHECK(r.queries_used == s.requests());
    check_invariants(r, p);
    const auto m = mcell_explain("one two three", s.backends(), ScalarizerSpec::parse("cell-bleu"), p, 3);
    CHECK_FALSE(m.succeeded);
    check_invariants(m, p);
  }
}

TEST_CASE("window clamping and degenerate settings") {
  TriggerScenario s;
  CellParams p;
  const auto one = cell_explain("sky", s.backends(), ScalarizerSpec::parse("cell-bleu"), p, 0);
  CHECK(one.succeeded);
  CHECK(one.contrastive_prompt == "blue");
  REQUIRE(one.edits.size() == 1);
  CHECK(one.edits[0].window.size() == 1);

  TriggerScenario z;
  p.max_edits = 0;
  const auto none = mcell_explain("the sky", z.backends(), ScalarizerSpec::parse("cell-bleu"), p, 0);
  CHECK_FALSE(none.succeeded);
  CHECK(none.edits.empty());
  CHECK(none.queries_used == 1);
  CHECK(none.contrastive_prompt == "the sky");

  TriggerScenario b;
  CellParams tiny;
  tiny.budget = 2;
  CHECK_THROWS_AS(cell_explain("a b c d e f g h", b.backends(), ScalarizerSpec::parse("cell-bleu"), tiny, 0),
                  PreconditionError);
  CHECK_THROWS_AS(cell_explain("   ", b.backends(), ScalarizerSpec::parse("cell-bleu"), p, 0), EmptyInput);
  CHECK_THROWS_AS(cell_explain("a b", b.backends(), ScalarizerSpec::parse("logprob"), p, 0), PreconditionError);
}

TEST_CASE("no signal exhausts the edit rounds") {
  test::MockBackend model("trigger:qqq,SAME,SAME");
  test::MockBackend infiller("trigger:<mask>,other,");
  CellParams p;
  p.max_edits = 2;
  const auto r = mcell_explain("a b c d", Backends{*model.client, infiller.client.get(), nullptr},
                               ScalarizerSpec::parse("cell-bleu"), p, 0);
  CHECK_FALSE(r.succeeded);
  CHECK(r.best_history.size() == 2);
  CHECK(r.edits.size() == 1);  // later rounds only add edit cost
  CHECK(r.queries_used == model.server.requests() + infiller.server.requests());
  check_invariants(r, p);
}

TEST_CASE("judge scalarizer with a separate judge") {
  TriggerScenario s;
  test::MockBackend judge("judge:prefer-containing:YES");
  CellParams p;
  const auto r = cell_explain("the sky is grey", Backends{*s.model.client, s.infiller.client.get(), judge.client.get()},
                              ScalarizerSpec::parse("contradiction"), p, 0);
  CHECK(r.succeeded);
  CHECK(r.contrast_score == 1.0);
  CHECK(r.queries_used == s.requests() + judge.server.requests());
  check_invariants(r, p);
}

TEST_CASE("determinism") {
  TriggerScenario a, b;
  CellParams p;
  p.threshold = 2.0;
  const auto ra = cell_explain("x y z w v u", a.backends(), ScalarizerSpec::parse("cell-bleu"), p, 9);
  const auto rb = cell_explain("x y z w v u", b.backends(), ScalarizerSpec::parse("cell-bleu"), p, 9);
  CHECK(ra == rb);
}

TEST_CASE("apply_edits replays in order and checks windows") {
  const std::string prompt = "a b c d";
  auto words = segment(prompt, Level::word);
  Edit first{{words[1]}, "X Y"};
  const std::string after = "a X Y c d";
  auto words2 = segment(after, Level::word);
  Edit second{{words2[3], words2[4]}, "Z"};
  CHECK(apply_edits(prompt, {first, second}) == "a X Y Z");
  CHECK_THROWS_AS(apply_edits(prompt, {second}), PreconditionError);
  CHECK(apply_edits(prompt, {}) == prompt);
}
