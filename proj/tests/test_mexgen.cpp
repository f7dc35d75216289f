#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

#include "icx/errors.hpp"
#include "icx/mexgen.hpp"
#include "icx/text.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace icx;
using namespace icx::mexgen;

namespace {

// A table-driven game: one random value per mask.
struct RandomGame {
  RandomGame(std::size_t n, std::uint64_t seed) : n(n) {
    Rng rng(seed);
    values.resize(std::size_t{1} << n);
    for (auto& v : values) v = rng.uniform(-5.0, 5.0);
  }
  double operator()(const Mask& m) const {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < n; ++i) idx |= std::size_t{m.kept(i)} << i;
    return values[idx];
  }
  std::size_t n;
  std::vector<double> values;
};

double linear(const std::vector<double>& c, double b0, const Mask& m) {
  double y = b0;
  for (std::size_t i = 0; i < c.size(); ++i) y += c[i] * (m.kept(i) ? 1.0 : 0.0);
  return y;
}

}  // namespace

TEST_CASE("l-shap: two-player game") {
  // v(S) over kept players: v({})=0, v({1})=1, v({2})=2, v({1,2})=4.
  MaskEvaluator v([](const Mask& m) {
    const bool a = m.kept(0), b = m.kept(1);
    return a && b ? 4.0 : a ? 1.0 : b ? 2.0 : 0.0;
  });
  const auto phi = lshap_attribute(2, v, {2});
  CHECK(phi[0] == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(phi[1] == doctest::Approx(2.5).epsilon(1e-15));
}

TEST_CASE("l-shap matches the permutation oracle for full neighborhoods") {
  for (std::size_t n = 1; n <= 7; ++n) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const RandomGame game(n, 100 * n + seed);
      MaskEvaluator v([&](const Mask& m) { return game(m); });
      const auto got = lshap_attribute(n, v, {n});
      const auto want = oracle::shapley_permutations(n, [&](const Mask& m) { return game(m); });
      for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(got[i] - want[i]) <= 1e-9);
      // Efficiency: the values sum to v(all kept) - v(all perturbed).
      double sum = 0;
      for (double x : got) sum += x;
      CHECK(sum == doctest::Approx(game(Mask(n, false)) - game(Mask(n, true))).epsilon(1e-12));
    }
  }
}

TEST_CASE("l-shap with a local radius equals Shapley of the restricted game") {
  const std::size_t n = 6, radius = 1;
  const RandomGame game(n, 77);
  MaskEvaluator v([&](const Mask& m) { return game(m); });
  const auto got = lshap_attribute(n, v, {radius});
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= radius ? i - radius : 0, hi = std::min(n - 1, i + radius);
    const std::size_t m = hi - lo + 1;
    const auto local = oracle::shapley_permutations(m, [&](const Mask& sub) {
      Mask full(n, false);
      for (std::size_t k = 0; k < m; ++k) full.set_perturbed(lo + k, sub.perturbed(k));
      return game(full);
    });
    CHECK(std::abs(got[i] - local[i - lo]) <= 1e-9);
  }
}

TEST_CASE("l-shap: additive games, radius zero, query bound") {
  const std::vector<double> c{2.0, -1.0, 0.5, 3.0, 0.0};
  for (std::size_t r : {0, 1, 2, 5}) {
    MaskEvaluator v([&](const Mask& m) { return linear(c, 7.0, m); });
    const auto phi = lshap_attribute(c.size(), v, {r});
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(phi[i] == doctest::Approx(c[i]).epsilon(1e-12));
    CHECK(v.evaluations() <= lshap_query_bound(c.size(), {r}));
    if (r >= 1) CHECK(v.evaluations() < lshap_query_bound(c.size(), {r}));
  }
  const RandomGame game(4, 5);
  MaskEvaluator v([&](const Mask& m) { return game(m); });
  const auto phi = lshap_attribute(4, v, {0});
  for (std::size_t i = 0; i < 4; ++i) {
    Mask only(4, false);
    only.set_perturbed(i);
    CHECK(phi[i] == doctest::Approx(game(Mask(4, false)) - game(only)).epsilon(1e-12));
  }
  CHECK(lshap_query_bound(5, {0}) == 10);
}

TEST_CASE("c-lime recovers linear coefficients with exhaustive sampling") {
  ClimeParams p;
  p.exhaustive = true;
  {
    MaskEvaluator v([](const Mask& m) { return linear({3.0, 0.0, -1.0}, 0.0, m); });
    const auto s = clime_attribute(3, v, p, 0);
    CHECK(std::abs(s[0] - 3.0) <= 1e-6);
    CHECK(std::abs(s[1]) <= 1e-6);
    CHECK(std::abs(s[2] + 1.0) <= 1e-6);
  }
  Rng rng(8);
  for (std::size_t n = 1; n <= 10; ++n) {
    std::vector<double> c(n);
    for (auto& x : c) x = rng.uniform(-4.0, 4.0);
    const double b0 = rng.uniform(-2.0, 2.0);
    MaskEvaluator v([&](const Mask& m) { return linear(c, b0, m); });
    const auto s = clime_attribute(n, v, p, n);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(s[i] - c[i]) <= 1e-6);
  }
}

TEST_CASE("c-lime: constant, single unit, sampling design") {
  ClimeParams p;
  MaskEvaluator constant([](const Mask&) { return 4.2; });
  for (double s : clime_attribute(5, constant, p, 1)) CHECK(std::abs(s) <= 1e-9);

  MaskEvaluator one([](const Mask& m) { return m.kept(0) ? 2.0 : -0.5; });
  const auto s = clime_attribute(1, one, p, 0);
  CHECK(std::abs(s[0] - 2.5) <= 1e-5);

  const auto samples = clime_samples(6, p, 9);
  CHECK(samples.size() == 22);  // 1 + 6 + 15, the whole design space
  CHECK(samples[0] == Mask::all_kept(6));
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(samples[1 + i].perturbed_count() == 1);
    CHECK(samples[1 + i].perturbed(i));
  }
  std::map<std::string, int> seen;
  for (const auto& m : samples) {
    CHECK(++seen[m.key()] == 1);
    CHECK(m.perturbed_count() <= 2);
  }
  CHECK(clime_samples(6, p, 9) == samples);
  // n_samples beyond the design space stops at the space.
  ClimeParams big;
  big.n_samples = 1000;
  CHECK(clime_samples(3, big, 0).size() == 7);  // 1 + 3 + C(3,2)
}

TEST_CASE("c-lime: degenerate design without ridge") {
  ClimeParams p;
  p.ridge = 0.0;
  const std::vector<Mask> samples{Mask::all_kept(2), Mask(std::vector<bool>{true, false})};
  CHECK_THROWS_AS(clime_fit(samples, {1.0, 0.0}, p), DegenerateDesign);
}

TEST_CASE("c-lime: one unit is the plain difference") {
  // The perturbed sample weighs e^-16 under the default kernel.
  ClimeParams p;
  const std::vector<Mask> samples{Mask::all_kept(1), Mask(std::vector<bool>{true})};
  const auto s = clime_fit(samples, {2.0, -0.5}, p);
  REQUIRE(s.size() == 1);
  CHECK(std::abs(s[0] - 2.5) <= 1e-5);
}

TEST_CASE("c-lime: ridge keeps a rank-deficient design solvable") {
  ClimeParams p;
  const std::vector<Mask> samples{Mask::all_kept(2), Mask(std::vector<bool>{true, false})};
  const auto s = clime_fit(samples, {1.0, 0.0}, p);
  REQUIRE(s.size() == 2);
  CHECK(s[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(std::isfinite(s[1]));
}

TEST_CASE("argmax is stable under positive scaling") {
  const RandomGame game(5, 31);
  for (double k : {0.5, 3.0, 100.0}) {
    MaskEvaluator a([&](const Mask& m) { return game(m); });
    MaskEvaluator b([&](const Mask& m) { return k * game(m); });
    ClimeParams p;
    const auto sa = clime_attribute(5, a, p, 4), sb = clime_attribute(5, b, p, 4);
    const auto la = lshap_attribute(5, a, {2}), lb = lshap_attribute(5, b, {2});
    auto argmax = [](const std::vector<double>& v) { return std::max_element(v.begin(), v.end()) - v.begin(); };
    CHECK(argmax(sa) == argmax(sb));
    CHECK(argmax(la) == argmax(lb));
  }
}

TEST_CASE("parallel evaluation gives identical results") {
  const RandomGame game(6, 4);
  MaskEvaluator serial([&](const Mask& m) { return game(m); });
  MaskEvaluator parallel([&](const Mask& m) { return game(m); }, 4);
  ClimeParams p;
  CHECK(clime_attribute(6, serial, p, 3) == clime_attribute(6, parallel, p, 3));
}

TEST_CASE("top_units ties go to the earlier unit") {
  std::vector<AttributionNode> nodes(4);
  const double scores[] = {1.0, -3.0, 3.0, 0.5};
  for (std::size_t i = 0; i < 4; ++i) {
    nodes[i].unit.start = 10 * i;
    nodes[i].score = scores[i];
  }
  CHECK(top_units(nodes, 2) == std::vector<std::size_t>{1, 2});
  CHECK(top_units(nodes, 0).empty());
  CHECK(top_units(nodes, 9).size() == 4);
}

TEST_CASE("multilevel: planted importance on copy-sentence") {
  const std::string input = "Cats purr softly. Dogs bark loudly. Birds sing early.";
  for (auto method : {Method::clime, Method::lshap}) {
    test::MockBackend m("copy-sentence:2");
    MultilevelConfig cfg;
    cfg.method = method;
    cfg.top_k = 1;
    const auto r = multilevel_explain(input, *m.client, ScalarizerSpec::parse("logprob"), cfg);
    CHECK(r.output == "Dogs bark loudly.");
    REQUIRE(r.units.size() == 3);
    CHECK(r.units[1].score > r.units[0].score);
    CHECK(r.units[1].score > r.units[2].score);
    CHECK(r.units[1].children.size() == 3);
    CHECK(r.units[0].children.empty());
    CHECK(r.n_queries == m.server.requests());
    CHECK_FALSE(r.truncated);
    for (const auto& w : r.units[1].children) {
      CHECK(w.unit.level == Level::word);
      CHECK(w.unit.text == input.substr(w.unit.start, w.unit.end - w.unit.start));
    }
  }
}

TEST_CASE("multilevel: structure and budget truncation") {
  test::MockBackend m("echo");
  MultilevelConfig cfg;
  auto r = multilevel_explain("Go home now.", *m.client, ScalarizerSpec::parse("logprob"), cfg);
  REQUIRE(r.units.size() == 1);
  CHECK(r.units[0].children.size() == 3);

  cfg.top_k = 0;
  r = multilevel_explain("A b. C d.", *m.client, ScalarizerSpec::parse("logprob"), cfg);
  CHECK(r.units.size() == 2);
  for (const auto& u : r.units) CHECK(u.children.empty());

  CHECK_THROWS_AS(multilevel_explain("", *m.client, ScalarizerSpec::parse("logprob"), cfg), EmptyInput);
  MultilevelConfig bad;
  bad.levels = {Level::word, Level::sentence};
  CHECK_THROWS_AS(multilevel_explain("a b", *m.client, ScalarizerSpec::parse("logprob"), bad), InvalidLevelOrder);

  test::MockBackend b("echo");
  b.client->attach_meter(std::make_shared<BudgetMeter>(6));
  MultilevelConfig dflt;
  r = multilevel_explain("One two. Three four. Five six.", *b.client, ScalarizerSpec::parse("logprob"), dflt);
  CHECK(r.truncated);
  CHECK(r.n_queries <= 6);
  CHECK(r.n_queries == b.server.requests());
}

TEST_CASE("multilevel: determinism") {
  test::MockBackend m("copy-sentence:1");
  MultilevelConfig cfg;
  cfg.seed = 13;
  const auto a = multilevel_explain("X y. Z w. Q r.", *m.client, ScalarizerSpec::parse("text-sim:bleu"), cfg);
  const auto b = multilevel_explain("X y. Z w. Q r.", *m.client, ScalarizerSpec::parse("text-sim:bleu"), cfg);
  REQUIRE(a.units.size() == b.units.size());
  for (std::size_t i = 0; i < a.units.size(); ++i) CHECK(a.units[i].score == b.units[i].score);
  CHECK(a.n_queries == b.n_queries);
}
