#pragma once

// Independent reference computations. None of these call into the library's
// estimators or kernels.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "icx/perturber.hpp"
#include "icx/token_highlighter.hpp"

namespace icx::oracle {

// Shapley values by averaging marginal contributions over all n! orders.
// `v` receives the set of present (kept) players as a mask; absent players
// are perturbed.
inline std::vector<double> shapley_permutations(std::size_t n, const std::function<double(const Mask&)>& v) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> phi(n, 0.0);
  double count = 0.0;
  do {
    Mask present(n, true);  // all perturbed
    double prev = v(present);
    for (std::size_t p : order) {
      present.set_perturbed(p, false);
      const double cur = v(present);
      phi[p] += cur - prev;
      prev = cur;
    }
    count += 1.0;
  } while (std::next_permutation(order.begin(), order.end()));
  for (auto& x : phi) x /= count;
  return phi;
}

// The hand-derived BLEU value for reference "the cat sat", candidate "the cat":
// p1 = 2/2, p2 = (1+1)/(1+1), p3 = (0+1)/(0+1), p4 = (0+1)/(0+1) (no 3- or
// 4-grams in the candidate), geometric mean 1, BP = exp(1 - 3/2).
inline constexpr double kBleuTheCatSat = 0.60653065971263342;

// BLEU-4 from the definition, with plain maps.
inline double bleu(const std::string& ref, const std::string& cand) {
  auto toks = [](const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(w);
    return out;
  };
  const auto r = toks(ref), c = toks(cand);
  if (r.empty() && c.empty()) return 1.0;
  if (c.empty()) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    std::map<std::vector<std::string>, int> rc, cc;
    for (std::size_t i = 0; i + n <= r.size(); ++i) rc[{r.begin() + i, r.begin() + i + n}]++;
    for (std::size_t i = 0; i + n <= c.size(); ++i) cc[{c.begin() + i, c.begin() + i + n}]++;
    double match = 0.0, total = 0.0;
    for (const auto& [g, k] : cc) {
      total += k;
      auto it = rc.find(g);
      match += std::min(k, it == rc.end() ? 0 : it->second);
    }
    if (n >= 2) {
      match += 1.0;
      total += 1.0;
    }
    if (match == 0.0) return 0.0;
    log_sum += std::log(match / total);
  }
  const double bp = std::min(1.0, std::exp(1.0 - static_cast<double>(r.size()) / static_cast<double>(c.size())));
  return bp * std::exp(log_sum / 4.0);
}

// Straight-line ToyLM forward pass: explicit loops, no kernels, no caching.
//   E: V x d, Wh: d x d, Wo: V x d, all row-major.
inline double toy_forward(const std::vector<double>& E, const std::vector<double>& Wh, const std::vector<double>& Wo,
                          std::size_t V, std::size_t d, double decay, const std::vector<int>& ids,
                          std::size_t n_input, const std::vector<double>* x_override = nullptr) {
  auto x = [&](std::size_t pos, std::size_t k) {
    return x_override ? (*x_override)[pos * d + k] : E[static_cast<std::size_t>(ids[pos]) * d + k];
  };
  double total = 0.0;
  for (std::size_t p = n_input; p < ids.size(); ++p) {
    std::vector<double> c(d, 0.0);
    if (p > 0) {
      double wsum = 0.0;
      for (std::size_t j = 0; j < p; ++j) {
        const double w = std::pow(decay, static_cast<double>(p - 1 - j));
        wsum += w;
        for (std::size_t k = 0; k < d; ++k) c[k] += w * x(j, k);
      }
      for (auto& v : c) v /= wsum;
    }
    std::vector<double> h(d, 0.0);
    for (std::size_t r = 0; r < d; ++r) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += Wh[r * d + k] * c[k];
      h[r] = std::tanh(s);
    }
    std::vector<double> logits(V, 0.0);
    for (std::size_t v = 0; v < V; ++v) {
      for (std::size_t k = 0; k < d; ++k) logits[v] += Wo[v * d + k] * h[k];
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - mx);
    total += logits[static_cast<std::size_t>(ids[p])] - mx - std::log(z);
  }
  return total;
}

inline double toy_forward(const th::ToyLM& lm, const std::vector<int>& ids, std::size_t n_input,
                          const std::vector<double>* x = nullptr) {
  return toy_forward(lm.embeddings(), lm.w_h(), lm.w_o(), lm.vocab_size(), lm.dim(), lm.context_decay(), ids, n_input,
                     x);
}

// Largest per-token relative error ||g - g_fd|| / max(||g||, ||g_fd||) of the
// analytic input gradients against central differences of toy_forward.
inline double fd_relative_error(const th::ToyLM& lm, const std::vector<int>& ids, std::size_t n_input,
                                double eps = 1e-4) {
  const std::size_t d = lm.dim();
  auto x = lm.embed(ids);
  const auto g = lm.input_grads(x, ids, n_input);
  double worst = 0.0;
  for (std::size_t i = 0; i < n_input; ++i) {
    double diff2 = 0.0, norm_a = 0.0, norm_fd = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double saved = x[i * d + k];
      x[i * d + k] = saved + eps;
      const double up = toy_forward(lm, ids, n_input, &x);
      x[i * d + k] = saved - eps;
      const double down = toy_forward(lm, ids, n_input, &x);
      x[i * d + k] = saved;
      const double fd = (up - down) / (2 * eps);
      const double a = g[i * d + k];
      diff2 += (a - fd) * (a - fd);
      norm_a += a * a;
      norm_fd += fd * fd;
    }
    const double scale = std::max(std::sqrt(norm_a), std::sqrt(norm_fd));
    if (scale > 0) worst = std::max(worst, std::sqrt(diff2) / scale);
  }
  return worst;
}

}  // namespace icx::oracle
