#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "icx/segmenter.hpp"
#include "icx/text.hpp"

namespace icx::th {

/// White-box seam: anything that can tokenize with character offsets, score a
/// response given an input, and differentiate that score with respect to the
/// input token embeddings.
class GradientProvider {
 public:
  virtual ~GradientProvider() = default;

  virtual std::vector<TextToken> tokenize(std::string_view text) const = 0;
  /// log p(response | input), <= 0.
  virtual double loglik(const std::vector<TextToken>& input, const std::vector<TextToken>& response) const = 0;
  /// One gradient vector per input token.
  virtual std::vector<std::vector<double>> input_embedding_grads(const std::vector<TextToken>& input,
                                                                 const std::vector<TextToken>& response) const = 0;
};

struct ToyLmConfig {
  std::size_t dim = 16;
  /// Weight decay of older positions in the context average. 1.0 gives the
  /// plain running mean, under which every input token receives the same
  /// gradient; values below 1 weight recent tokens more.
  double context_decay = 0.7;
};

/// Small differentiable language model over a whitespace vocabulary.
///   c_p = sum_{j<p} decay^(p-1-j) x_j / sum_{j<p} decay^(p-1-j)   (c_0 = 0)
///   h_p = tanh(W_h c_p), logits_p = W_o h_p, p(next = y) = softmax(logits_p)[y]
/// where x_j is the embedding row of the token at position j.
class ToyLM {
 public:
  static constexpr std::string_view kUnknown = "<unk>";

  /// Vocabulary: "<unk>" then the whitespace tokens of `texts` in order of first
  /// appearance. Parameters are drawn from Rng(seed) in the order E, W_h, W_o,
  /// uniform in [-1, 1) with W_h scaled by 2 / sqrt(dim).
  ToyLM(const std::vector<std::string>& texts, std::uint64_t seed, ToyLmConfig config = {});

  std::size_t vocab_size() const noexcept { return vocab_.size(); }
  std::size_t dim() const noexcept { return config_.dim; }
  double context_decay() const noexcept { return config_.context_decay; }
  int id(std::string_view token) const;
  const std::vector<std::string>& vocabulary() const noexcept { return vocab_; }

  // Row-major parameters: E is |V| x d, W_h is d x d, W_o is |V| x d.
  std::vector<double>& embeddings() noexcept { return e_; }
  std::vector<double>& w_h() noexcept { return w_h_; }
  std::vector<double>& w_o() noexcept { return w_o_; }
  const std::vector<double>& embeddings() const noexcept { return e_; }
  const std::vector<double>& w_h() const noexcept { return w_h_; }
  const std::vector<double>& w_o() const noexcept { return w_o_; }

  /// Per-position embedding rows (n x d) for token ids.
  std::vector<double> embed(std::span<const int> ids) const;

  /// Log-likelihood of ids[n_input..] given explicit position embeddings `x`
  /// (ids.size() x d). Only ids of response positions are read.
  double loglik_embedded(std::span<const double> x, std::span<const int> ids, std::size_t n_input) const;

  /// d loglik / d x_j for the first n_input positions, as an n_input x d block.
  std::vector<double> input_grads(std::span<const double> x, std::span<const int> ids, std::size_t n_input) const;

 private:
  ToyLmConfig config_;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, int> index_;
  std::vector<double> e_, w_h_, w_o_;
};

/// GradientProvider backed by a ToyLM with whitespace tokenization.
class ToyLmProvider final : public GradientProvider {
 public:
  explicit ToyLmProvider(const ToyLM& lm) : lm_(lm) {}

  std::vector<TextToken> tokenize(std::string_view text) const override { return whitespace_tokens(text); }
  double loglik(const std::vector<TextToken>& input, const std::vector<TextToken>& response) const override;
  std::vector<std::vector<double>> input_embedding_grads(const std::vector<TextToken>& input,
                                                         const std::vector<TextToken>& response) const override;

 private:
  std::vector<int> ids(const std::vector<TextToken>& input, const std::vector<TextToken>& response) const;

  const ToyLM& lm_;
};

/// log p(response | input) under `lm`. Throws EmptyResponse.
double toy_lm_loglik(const std::vector<std::string>& input_tokens, const std::vector<std::string>& response_tokens,
                     const ToyLM& lm);

struct TokenScore {
  TextToken token;
  double score = 0.0;
};

struct UnitScore {
  UnitSpan unit;
  double score = 0.0;
};

struct SaliencyResult {
  std::vector<TokenScore> token_scores;
  std::vector<UnitScore> unit_scores;
};

/// L2 norm of d log p(response | input) / d e_i for every input token.
/// Throws EmptyResponse.
std::vector<TokenScore> token_scores(std::string_view input, std::string_view response,
                                     const GradientProvider& provider);

/// Mean score of the tokens overlapping each unit; units without tokens score 0.
std::vector<UnitScore> aggregate(const std::vector<TokenScore>& tokens, std::string_view input, Level level);

SaliencyResult highlight(std::string_view input, std::string_view response, const GradientProvider& provider,
                         Level level);

}  // namespace icx::th
