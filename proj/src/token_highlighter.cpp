#include "icx/token_highlighter.hpp"

#include <cmath>

#include "icx/errors.hpp"
#include "icx/kernels.hpp"

namespace icx::th {

ToyLM::ToyLM(const std::vector<std::string>& texts, std::uint64_t seed, ToyLmConfig config) : config_(config) {
  if (config_.dim == 0) throw PreconditionError("ToyLM dimension must be positive");
  if (!(config_.context_decay > 0.0 && config_.context_decay <= 1.0)) {
    throw PreconditionError("context_decay must lie in (0, 1]");
  }
  vocab_.emplace_back(kUnknown);
  index_.emplace(std::string(kUnknown), 0);
  for (const auto& t : texts) {
    for (auto& w : whitespace_split(t)) {
      if (index_.emplace(w, static_cast<int>(vocab_.size())).second) vocab_.push_back(std::move(w));
    }
  }
  const std::size_t d = config_.dim;
  Rng rng(seed);
  e_.resize(vocab_.size() * d);
  for (auto& v : e_) v = rng.uniform(-1.0, 1.0);
  w_h_.resize(d * d);
  const double scale = 2.0 / std::sqrt(static_cast<double>(d));
  for (auto& v : w_h_) v = rng.uniform(-1.0, 1.0) * scale;
  w_o_.resize(vocab_.size() * d);
  for (auto& v : w_o_) v = rng.uniform(-1.0, 1.0);
}

int ToyLM::id(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? 0 : it->second;
}

std::vector<double> ToyLM::embed(std::span<const int> ids) const {
  const std::size_t d = config_.dim;
  std::vector<double> x(ids.size() * d);
  for (std::size_t p = 0; p < ids.size(); ++p) {
    std::copy_n(e_.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(ids[p]) * d), d,
                x.begin() + static_cast<std::ptrdiff_t>(p * d));
  }
  return x;
}

namespace {

// Log-softmax entry and (optionally) softmax probabilities in `prob`.
double log_softmax_at(const std::vector<double>& logits, int y, std::vector<double>* prob) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double z = 0.0;
  for (double v : logits) z += std::exp(v - mx);
  const double lse = mx + std::log(z);
  if (prob != nullptr) {
    prob->resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) (*prob)[i] = std::exp(logits[i] - lse);
  }
  return logits[static_cast<std::size_t>(y)] - lse;
}

}  // namespace

double ToyLM::loglik_embedded(std::span<const double> x, std::span<const int> ids, std::size_t n_input) const {
  const std::size_t d = config_.dim;
  const std::size_t n = ids.size();
  const std::size_t v = vocab_.size();
  const double decay = config_.context_decay;
  std::vector<double> sum(d, 0.0), c(d), h(d), logits(v);
  double z = 0.0;
  double total = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    if (p >= n_input) {
      if (z > 0.0) {
        for (std::size_t k = 0; k < d; ++k) c[k] = sum[k] / z;
      } else {
        std::fill(c.begin(), c.end(), 0.0);
      }
      kernels::gemv(w_h_, d, d, c, h);
      for (auto& hv : h) hv = std::tanh(hv);
      kernels::gemv(w_o_, v, d, h, logits);
      total += log_softmax_at(logits, ids[p], nullptr);
    }
    // Fold position p into the context for p + 1.
    for (auto& s : sum) s *= decay;
    kernels::axpy(1.0, x.subspan(p * d, d), sum);
    z = z * decay + 1.0;
  }
  return total;
}

std::vector<double> ToyLM::input_grads(std::span<const double> x, std::span<const int> ids,
                                       std::size_t n_input) const {
  const std::size_t d = config_.dim;
  const std::size_t n = ids.size();
  const std::size_t v = vocab_.size();
  const double decay = config_.context_decay;

  // G[p] = (d loglik_p / d c_p) / Z_p for response positions, else 0.
  std::vector<double> g(n * d, 0.0);
  std::vector<double> sum(d, 0.0), c(d), h(d), logits(v), prob, dlogits(v), dh(d), da(d);
  double z = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    if (p >= n_input && z > 0.0) {
      for (std::size_t k = 0; k < d; ++k) c[k] = sum[k] / z;
      kernels::gemv(w_h_, d, d, c, h);
      for (auto& hv : h) hv = std::tanh(hv);
      kernels::gemv(w_o_, v, d, h, logits);
      log_softmax_at(logits, ids[p], &prob);
      for (std::size_t i = 0; i < v; ++i) dlogits[i] = -prob[i];
      dlogits[static_cast<std::size_t>(ids[p])] += 1.0;
      kernels::gemv_t(w_o_, v, d, dlogits, dh);
      for (std::size_t k = 0; k < d; ++k) da[k] = (1.0 - h[k] * h[k]) * dh[k];
      std::span<double> gp(g.data() + p * d, d);
      kernels::gemv_t(w_h_, d, d, da, gp);
      for (auto& gv : gp) gv /= z;
    }
    for (auto& s : sum) s *= decay;
    kernels::axpy(1.0, x.subspan(p * d, d), sum);
    z = z * decay + 1.0;
  }

  // R_j = sum_{p>j} decay^(p-1-j) G[p] = G[j+1] + decay * R_{j+1}.
  std::vector<double> out(n_input * d, 0.0);
  std::vector<double> r(d, 0.0);
  for (std::size_t j = n; j-- > 0;) {
    if (j + 1 < n) {
      for (auto& rv : r) rv *= decay;
      kernels::axpy(1.0, std::span<const double>(g.data() + (j + 1) * d, d), r);
    }
    if (j < n_input) std::copy(r.begin(), r.end(), out.begin() + static_cast<std::ptrdiff_t>(j * d));
  }
  return out;
}

std::vector<int> ToyLmProvider::ids(const std::vector<TextToken>& input, const std::vector<TextToken>& response) const {
  std::vector<int> out;
  out.reserve(input.size() + response.size());
  for (const auto& t : input) out.push_back(lm_.id(t.text));
  for (const auto& t : response) out.push_back(lm_.id(t.text));
  return out;
}

double ToyLmProvider::loglik(const std::vector<TextToken>& input, const std::vector<TextToken>& response) const {
  if (response.empty()) throw EmptyResponse("response has no tokens");
  const auto seq = ids(input, response);
  return lm_.loglik_embedded(lm_.embed(seq), seq, input.size());
}

std::vector<std::vector<double>> ToyLmProvider::input_embedding_grads(const std::vector<TextToken>& input,
                                                                      const std::vector<TextToken>& response) const {
  if (response.empty()) throw EmptyResponse("response has no tokens");
  const auto seq = ids(input, response);
  const auto flat = lm_.input_grads(lm_.embed(seq), seq, input.size());
  const std::size_t d = lm_.dim();
  std::vector<std::vector<double>> out(input.size());
  for (std::size_t j = 0; j < input.size(); ++j) {
    out[j].assign(flat.begin() + static_cast<std::ptrdiff_t>(j * d),
                  flat.begin() + static_cast<std::ptrdiff_t>((j + 1) * d));
  }
  return out;
}

double toy_lm_loglik(const std::vector<std::string>& input_tokens, const std::vector<std::string>& response_tokens,
                     const ToyLM& lm) {
  if (response_tokens.empty()) throw EmptyResponse("response has no tokens");
  std::vector<int> seq;
  for (const auto& t : input_tokens) seq.push_back(lm.id(t));
  for (const auto& t : response_tokens) seq.push_back(lm.id(t));
  return lm.loglik_embedded(lm.embed(seq), seq, input_tokens.size());
}

std::vector<TokenScore> token_scores(std::string_view input, std::string_view response,
                                     const GradientProvider& provider) {
  const auto in = provider.tokenize(input);
  const auto resp = provider.tokenize(response);
  if (resp.empty()) throw EmptyResponse("response has no tokens");
  const auto grads = provider.input_embedding_grads(in, resp);
  std::vector<TokenScore> out;
  out.reserve(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    out.push_back({in[i], std::sqrt(kernels::dot(grads[i], grads[i]))});
  }
  return out;
}

std::vector<UnitScore> aggregate(const std::vector<TokenScore>& tokens, std::string_view input, Level level) {
  std::vector<UnitScore> out;
  for (auto& u : segment(input, level)) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& t : tokens) {
      if (t.token.offset < u.end && t.token.end() > u.start) {
        sum += t.score;
        ++count;
      }
    }
    out.push_back({std::move(u), count == 0 ? 0.0 : sum / static_cast<double>(count)});
  }
  return out;
}

SaliencyResult highlight(std::string_view input, std::string_view response, const GradientProvider& provider,
                         Level level) {
  SaliencyResult r;
  r.token_scores = token_scores(input, response, provider);
  r.unit_scores = aggregate(r.token_scores, input, level);
  return r;
}

}  // namespace icx::th
