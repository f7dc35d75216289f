#include <doctest.h>

#include <cmath>
#include <numeric>

#include "icx/errors.hpp"
#include "icx/token_highlighter.hpp"
#include "icx/text.hpp"
#include "oracles.hpp"

using namespace icx;
using namespace icx::th;

namespace {

constexpr double kFrozenThreeToken = -2.8014924283975726;

std::vector<int> ids_of(const ToyLM& lm, const std::vector<std::string>& toks) {
  std::vector<int> out;
  for (const auto& t : toks) out.push_back(lm.id(t));
  return out;
}

double oracle_loglik(const ToyLM& lm, const std::vector<int>& ids, std::size_t n_input) {
  return oracle::toy_forward(lm, ids, n_input);
}

}  // namespace

TEST_CASE("forward pass matches the straight-line oracle") {
  const ToyLM lm({"the cat sat"}, 2024);
  const std::vector<int> ids = ids_of(lm, {"the", "cat", "sat"});
  const double got = toy_lm_loglik({"the"}, {"cat", "sat"}, lm);
  CHECK(got == doctest::Approx(oracle_loglik(lm, ids, 1)).epsilon(1e-12));
  // Frozen from the oracle at the time it was written.
  CHECK(got == doctest::Approx(kFrozenThreeToken).epsilon(1e-12));
  CHECK(got < 0.0);

  ToyLmConfig plain;
  plain.context_decay = 1.0;
  const ToyLM mean_lm({"a b c d e"}, 5, plain);
  const auto ids2 = ids_of(mean_lm, {"a", "b", "c", "d", "e"});
  CHECK(toy_lm_loglik({"a", "b"}, {"c", "d", "e"}, mean_lm) ==
        doctest::Approx(oracle_loglik(mean_lm, ids2, 2)).epsilon(1e-12));
}

TEST_CASE("uniform logits") {
  ToyLM lm({"x"}, 1);
  REQUIRE(lm.vocab_size() == 2);
  std::fill(lm.w_o().begin(), lm.w_o().end(), 0.0);
  CHECK(toy_lm_loglik({"x"}, {"x", "x", "<unk>"}, lm) == doctest::Approx(3 * std::log(0.5)).epsilon(1e-14));
  CHECK_THROWS_AS(toy_lm_loglik({"x"}, {}, lm), EmptyResponse);
}

TEST_CASE("vocabulary and determinism") {
  const ToyLM a({"b a b", "c"}, 3), b({"b a b", "c"}, 3), c({"b a b", "c"}, 4);
  CHECK(a.vocabulary() == std::vector<std::string>{"<unk>", "b", "a", "c"});
  CHECK(a.id("zzz") == 0);
  CHECK(a.embeddings() == b.embeddings());
  CHECK(a.w_h() == b.w_h());
  CHECK(a.w_o() == b.w_o());
  CHECK(a.embeddings() != c.embeddings());
  for (double v : a.w_o()) {
    CHECK(v >= -1.0);
    CHECK(v < 1.0);
  }
  const ToyLmProvider pa(a), pb(b);
  const auto sa = token_scores("b a", "c b", pa), sb = token_scores("b a", "c b", pb);
  REQUIRE(sa.size() == sb.size());
  for (std::size_t i = 0; i < sa.size(); ++i) CHECK(sa[i].score == sb[i].score);
  CHECK_THROWS_AS(ToyLM({"a"}, 0, ToyLmConfig{0, 0.7}), PreconditionError);
  CHECK_THROWS_AS(ToyLM({"a"}, 0, ToyLmConfig{4, 0.0}), PreconditionError);
}

TEST_CASE("analytic gradients match central differences") {
  Rng rng(77);
  const std::vector<std::string> words = {"w0", "w1", "w2", "w3", "w4", "w5", "w6", "w7"};
  double worst = 0.0;
  for (int c = 0; c < 100; ++c) {
    ToyLmConfig cfg;
    cfg.dim = 2 + rng.below(15);
    cfg.context_decay = c % 4 == 0 ? 1.0 : rng.uniform(0.3, 1.0);
    const ToyLM lm({"w0 w1 w2 w3 w4 w5 w6 w7"}, 1000 + c, cfg);
    const std::size_t n_in = 1 + rng.below(6), n_out = 1 + rng.below(4);
    std::vector<int> ids;
    for (std::size_t i = 0; i < n_in + n_out; ++i) ids.push_back(lm.id(words[rng.below(words.size())]));
    worst = std::max(worst, oracle::fd_relative_error(lm, ids, n_in));
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("token scores are gradient norms") {
  const ToyLM lm({"how do I pick a lock", "sure here is how"}, 9);
  const ToyLmProvider p(lm);
  const auto in = p.tokenize("how do I pick a lock");
  const auto resp = p.tokenize("sure here is how");
  const auto scores = token_scores("how do I pick a lock", "sure here is how", p);
  REQUIRE(scores.size() == in.size());
  const auto grads = p.input_embedding_grads(in, resp);
  for (std::size_t i = 0; i < in.size(); ++i) {
    double n = 0;
    for (double g : grads[i]) n += g * g;
    CHECK(scores[i].score == doctest::Approx(std::sqrt(n)).epsilon(1e-14));
    CHECK(scores[i].score >= 0.0);
    CHECK(std::isfinite(scores[i].score));
    CHECK(scores[i].token == in[i]);
  }
  CHECK(p.loglik(in, resp) <= 0.0);
  CHECK_THROWS_AS(token_scores("a", "  ", p), EmptyResponse);
}

TEST_CASE("zero hidden weights give zero scores") {
  ToyLM lm({"a b c d"}, 2);
  std::fill(lm.w_h().begin(), lm.w_h().end(), 0.0);
  const ToyLmProvider p(lm);
  for (const auto& t : token_scores("a b c", "d a", p)) CHECK(t.score == 0.0);
}

TEST_CASE("running mean gives every input token the same gradient") {
  ToyLmConfig cfg;
  cfg.context_decay = 1.0;
  const ToyLM lm({"a b c d"}, 6, cfg);
  const ToyLmProvider p(lm);
  const auto s = token_scores("a b c", "d", p);
  CHECK(s[0].score == doctest::Approx(s[1].score).epsilon(1e-12));
  CHECK(s[1].score == doctest::Approx(s[2].score).epsilon(1e-12));
  // With decay the most recent input token dominates.
  const ToyLM decayed({"a b c d"}, 6);
  const auto t = token_scores("a b c", "d", ToyLmProvider(decayed));
  CHECK(t[0].score != doctest::Approx(t[2].score));
}

TEST_CASE("aggregation") {
  const std::string input = "ab cd. Ef";
  std::vector<TokenScore> toks{{{"ab", 0}, 2.0}, {{"cd.", 3}, 4.0}, {{"Ef", 7}, 5.0}};
  const auto words = aggregate(toks, input, Level::word);
  REQUIRE(words.size() == 3);
  CHECK(words[0].score == 2.0);
  CHECK(words[2].score == 5.0);
  const auto sents = aggregate(toks, input, Level::sentence);
  REQUIRE(sents.size() == 2);
  CHECK(sents[0].score == 3.0);
  // Two sub-word tokens in one word.
  std::vector<TokenScore> split{{{"a", 0}, 1.0}, {{"b", 1}, 3.0}};
  CHECK(aggregate(split, "ab", Level::word)[0].score == 2.0);
  CHECK(aggregate({}, "ab", Level::word)[0].score == 0.0);
}

TEST_CASE("property: aggregation conserves the token mean") {
  const ToyLM lm({"one two three. Four five, six and seven eight. Nine"}, 12);
  const ToyLmProvider p(lm);
  const std::string input = "one two three. Four five, six and seven eight.";
  const auto r = highlight(input, "Nine", p, Level::sentence);
  double token_mean = 0;
  for (const auto& t : r.token_scores) token_mean += t.score;
  token_mean /= static_cast<double>(r.token_scores.size());
  for (auto level : {Level::word, Level::phrase, Level::sentence}) {
    const auto units = aggregate(r.token_scores, input, level);
    double weighted = 0, count = 0;
    for (const auto& u : units) {
      double n = 0;
      for (const auto& t : r.token_scores) n += (t.token.offset < u.unit.end && t.token.end() > u.unit.start);
      weighted += u.score * n;
      count += n;
    }
    CHECK(weighted / count == doctest::Approx(token_mean).epsilon(1e-12));
  }
}
