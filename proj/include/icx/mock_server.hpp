#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace icx::mock {

/// Extra penalty on an echoed token that has not appeared earlier in the
/// prompt. It gives prompt scoring a dependence on context: removing the
/// source of a copied span makes the copy improbable.
inline constexpr double kNoveltyPenalty = 8.0;
inline constexpr std::size_t kEmbeddingDim = 8;

/// -(1 + (fnv1a64(token) mod 1000) / 1000), always in [-2, -1].
double mock_logprob(std::string_view token) noexcept;

/// Per-token log-probabilities of a whitespace-tokenized sequence:
/// mock_logprob(t_i), minus kNoveltyPenalty when t_i does not occur among t_0..t_{i-1}.
std::vector<double> sequence_logprobs(const std::vector<std::string>& tokens);

/// Unit vector of kEmbeddingDim components. Components are drawn from a
/// splitmix64 stream seeded with fnv1a64(text) ^ seed, each mapped to [-1, 1),
/// then L2-normalized.
std::vector<double> mock_embedding(std::string_view text, std::uint64_t seed);

struct JudgeRule {
  enum class Kind { prefer_longer, prefer_containing, fixed };
  Kind kind = Kind::prefer_longer;
  std::string arg;  // the word for prefer_containing, the reply for fixed
};

/// 'A' or 'B'. prefer-longer: longer text wins, ties go to A.
/// prefer-containing:w: the text containing w wins; both or neither go to A.
char mock_judge(const JudgeRule& rule, std::string_view a, std::string_view b);

struct MockBehavior {
  enum class Kind { echo, copy_sentence, trigger, judge };
  Kind kind = Kind::echo;
  std::size_t sentence = 1;  // copy-sentence, 1-based
  std::string trigger_word, on_hit, on_miss;
  JudgeRule judge;

  /// Parses "echo", "copy-sentence:K", "trigger:WORD,HIT,MISS",
  /// "judge:prefer-longer", "judge:prefer-containing:W", "judge:fixed-yes",
  /// "judge:fixed-no" or "judge:fixed:REPLY". Throws PreconditionError.
  static MockBehavior parse(std::string_view spec);
  std::string spec() const;
};

/// The response text the mock produces for `prompt` (before max_tokens truncation).
///   echo            the prompt itself
///   copy-sentence:k the k-th sentence of the prompt per segment(.., sentence), or ""
///   trigger         HIT if the prompt contains WORD as a substring, else MISS
///   judge           a verdict for recognized judge prompts, else ""
/// Judge verdicts: preference prompts get mock_judge(rule, A, B). For yes/no
/// prompts, "A and B differ" means A != B under prefer-longer and
/// contains(A, w) != contains(B, w) under prefer-containing:w; a contradiction
/// prompt is answered yes iff they differ and an entailment prompt yes iff they
/// do not. fixed rules reply verbatim.
std::string respond(const MockBehavior& behavior, std::string_view prompt);

/// First `max_tokens` whitespace tokens of `text`, keeping their original spacing.
std::string truncate_tokens(std::string_view text, int max_tokens);

struct MockOptions {
  MockBehavior behavior;
  std::uint64_t seed = 0;
  bool can_score = true;  // serve /v1/completions
  bool can_embed = true;  // serve /v1/embeddings
  std::string host = "127.0.0.1";
};

/// Deterministic OpenAI-compatible server. Counts every POST to the /v1 API in
/// a request counter exposed at GET /stats. Disabled endpoints answer 404.
class MockServer {
 public:
  explicit MockServer(MockOptions options);
  ~MockServer();
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  /// Binds and serves on a background thread. port 0 picks a free port.
  /// Throws PortInUse.
  void start(int port = 0);
  /// Blocks until stop() is called from elsewhere.
  void wait();
  void stop();

  int port() const noexcept { return port_; }
  std::string endpoint() const;
  std::int64_t requests() const noexcept;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = -1;
};

}  // namespace icx::mock
