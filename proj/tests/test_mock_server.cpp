#include <doctest.h>

#include <cmath>
#include <httplib.h>
#include <json.hpp>

#include "icx/errors.hpp"
#include "icx/mock_server.hpp"
#include "icx/prompts.hpp"
#include "icx/text.hpp"

using namespace icx;
using namespace icx::mock;

TEST_CASE("mock_logprob rule") {
  CHECK(mock_logprob("") == -(1.0 + static_cast<double>(0xcbf29ce484222325ULL % 1000) / 1000.0));
  CHECK(mock_logprob("") == doctest::Approx(-1.037));
  CHECK(mock_logprob("x") == mock_logprob("x"));
  CHECK(fnv1a64("a") % 1000 != fnv1a64("b") % 1000);
  CHECK(mock_logprob("a") != mock_logprob("b"));
  for (const char* t : {"a", "hello", "x y", "..."}) {
    CHECK(mock_logprob(t) <= -1.0);
    CHECK(mock_logprob(t) >= -2.0);
  }
}

TEST_CASE("sequence logprobs penalize novel tokens") {
  const auto lp = sequence_logprobs({"a", "b", "a"});
  REQUIRE(lp.size() == 3);
  CHECK(lp[0] == mock_logprob("a") - kNoveltyPenalty);
  CHECK(lp[1] == mock_logprob("b") - kNoveltyPenalty);
  CHECK(lp[2] == mock_logprob("a"));
}

TEST_CASE("mock embedding is a deterministic unit vector") {
  const auto a = mock_embedding("a", 0);
  CHECK(a.size() == kEmbeddingDim);
  CHECK(a == mock_embedding("a", 0));
  CHECK(a != mock_embedding("a", 1));
  double n = 0;
  for (double x : a) n += x * x;
  CHECK(std::sqrt(n) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("mock judge rules") {
  const JudgeRule longer{JudgeRule::Kind::prefer_longer, ""};
  CHECK(mock_judge(longer, "ab", "abc") == 'B');
  CHECK(mock_judge(longer, "ab", "cd") == 'A');
  const JudgeRule cat{JudgeRule::Kind::prefer_containing, "cat"};
  CHECK(mock_judge(cat, "dog", "a cat") == 'B');
  CHECK(mock_judge(cat, "cat", "a cat") == 'A');
  CHECK(mock_judge(cat, "dog", "bird") == 'A');
}

TEST_CASE("behavior parsing round-trips") {
  for (const char* s : {"echo", "copy-sentence:3", "trigger:blue,YES,NO", "judge:prefer-longer",
                        "judge:prefer-containing:cat", "judge:fixed:yes", "judge:fixed:maybe"}) {
    CHECK(MockBehavior::parse(s).spec() == s);
  }
  CHECK(MockBehavior::parse("judge:fixed-yes").spec() == "judge:fixed:yes");
  CHECK(MockBehavior::parse("judge:fixed-no").spec() == "judge:fixed:no");
  CHECK_THROWS_AS(MockBehavior::parse("bogus"), PreconditionError);
  CHECK_THROWS_AS(MockBehavior::parse("copy-sentence:0"), PreconditionError);
  CHECK_THROWS_AS(MockBehavior::parse("trigger:blue"), PreconditionError);
}

TEST_CASE("respond contracts") {
  CHECK(respond(MockBehavior::parse("echo"), "p") == "p");
  CHECK(respond(MockBehavior::parse("copy-sentence:1"), "X. Y.") == "X.");
  CHECK(respond(MockBehavior::parse("copy-sentence:2"), "A. B. C.") == "B.");
  CHECK(respond(MockBehavior::parse("copy-sentence:5"), "A. B.") == "");
  const auto trig = MockBehavior::parse("trigger:blue,YES,NO");
  CHECK(respond(trig, "the sky is blue") == "YES");
  CHECK(respond(trig, "the sky is grey") == "NO");
  const auto judge = MockBehavior::parse("judge:prefer-longer");
  CHECK(respond(judge, prompts::preference("q", "short", "much longer")) == "B");
  CHECK(respond(judge, prompts::contradiction("x", "x")) == "no");
  CHECK(respond(judge, prompts::contradiction("x", "y")) == "yes");
  CHECK(respond(judge, prompts::entailment("x", "x")) == "yes");
  CHECK(respond(judge, "not a judge prompt") == "");
  CHECK(respond(MockBehavior::parse("judge:fixed-yes"), prompts::entailment("x", "y")) == "yes");
  CHECK(truncate_tokens("a  b c", 2) == "a  b");
  CHECK(truncate_tokens("a b", 5) == "a b");
}

TEST_CASE("server endpoints, counter and port conflicts") {
  MockOptions o;
  o.behavior = MockBehavior::parse("echo");
  o.can_embed = false;
  MockServer server(o);
  server.start(0);
  REQUIRE(server.port() > 0);
  httplib::Client cli("127.0.0.1", server.port());

  auto res = cli.Post("/v1/chat/completions",
                      R"({"messages":[{"role":"user","content":"hello world"}],"max_tokens":10})",
                      "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  const auto j = nlohmann::json::parse(res->body);
  CHECK(j["choices"][0]["message"]["content"] == "hello world");

  res = cli.Post("/v1/completions", R"({"prompt":"a b a","echo":true,"logprobs":1,"max_tokens":1})",
                 "application/json");
  REQUIRE(res);
  const auto c = nlohmann::json::parse(res->body);
  const auto& lp = c["choices"][0]["logprobs"];
  REQUIRE(lp["tokens"].size() == 3);
  CHECK(lp["token_logprobs"][2].get<double>() == mock_logprob("a"));
  CHECK(lp["text_offset"][2] == 4);

  res = cli.Post("/v1/embeddings", R"({"input":"a"})", "application/json");
  REQUIRE(res);
  CHECK(res->status == 404);

  res = cli.Post("/v1/chat/completions", "{not json", "application/json");
  REQUIRE(res);
  CHECK(res->status == 400);

  res = cli.Get("/stats");
  REQUIRE(res);
  CHECK(nlohmann::json::parse(res->body)["requests"] == 4);
  CHECK(server.requests() == 4);

  MockServer clash(o);
  CHECK_THROWS_AS(clash.start(server.port()), PortInUse);
  server.stop();
}
