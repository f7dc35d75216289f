#include "icx/mexgen.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <exception>
#include <set>
#include <thread>

#include "icx/errors.hpp"
#include "icx/objective.hpp"
#include "icx/text.hpp"

namespace icx::mexgen {

double MaskEvaluator::operator()(const Mask& mask) { return evaluate({mask}).front(); }

std::vector<double> MaskEvaluator::evaluate(const std::vector<Mask>& masks) {
  // Collect distinct unseen masks, evaluate them, then read every answer from the memo.
  std::vector<const Mask*> todo;
  std::set<std::string> queued;
  for (const auto& m : masks) {
    const std::string k = m.key();
    if (!memo_.contains(k) && queued.insert(k).second) todo.push_back(&m);
  }
  std::vector<double> values(todo.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::atomic<std::size_t> done{0};
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= todo.size()) return;
      try {
        values[i] = fn_(*todo[i]);
        done.fetch_add(1);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next.store(todo.size());
      }
    }
  };
  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(workers_), todo.size());
  if (n_threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  evaluations_ += done.load();
  if (failure) std::rethrow_exception(failure);
  for (std::size_t i = 0; i < todo.size(); ++i) memo_[todo[i]->key()] = values[i];
  std::vector<double> out;
  out.reserve(masks.size());
  for (const auto& m : masks) out.push_back(memo_.at(m.key()));
  return out;
}

namespace {

double binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

// Solves A x = b in place by Gaussian elimination with partial pivoting.
std::vector<double> solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(a[i][i]));
  const double tiny = std::max(scale, 1.0) * 1e-14;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    }
    if (std::abs(a[piv][col]) <= tiny) {
      throw DegenerateDesign("normal equations are singular; increase ridge or samples");
    }
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= a[i][c] * x[c];
    x[i] = s / a[i][i];
  }
  return x;
}

}  // namespace

std::vector<Mask> clime_samples(std::size_t n_units, const ClimeParams& params, std::uint64_t seed) {
  if (n_units == 0) return {};
  std::vector<Mask> out;
  if (params.exhaustive) {
    if (n_units > 20) throw PreconditionError("exhaustive sampling is limited to 20 units");
    // All-kept first, then singletons, then the rest, to match the sampled design's prefix.
    out.push_back(Mask::all_kept(n_units));
    for (std::size_t i = 0; i < n_units; ++i) {
      Mask m(n_units);
      m.set_perturbed(i);
      out.push_back(m);
    }
    for (std::uint64_t bits = 1; bits < (1ULL << n_units); ++bits) {
      if (std::popcount(bits) < 2) continue;
      Mask m(n_units);
      for (std::size_t i = 0; i < n_units; ++i) m.set_perturbed(i, (bits >> i) & 1U);
      out.push_back(m);
    }
    return out;
  }

  const std::size_t target = params.n_samples == 0 ? 4 * n_units : params.n_samples;
  if (target < n_units + 1) {
    throw PreconditionError("C-LIME needs at least n_units + 1 = " + std::to_string(n_units + 1) + " samples");
  }
  out.push_back(Mask::all_kept(n_units));
  for (std::size_t i = 0; i < n_units; ++i) {
    Mask m(n_units);
    m.set_perturbed(i);
    out.push_back(m);
  }
  const std::size_t k_hi = std::min(params.k_max, n_units);
  if (k_hi < 2) return out;
  double space = 0.0;
  for (std::size_t k = 2; k <= k_hi; ++k) space += binomial(n_units, k);
  const std::size_t reachable = out.size() + static_cast<std::size_t>(std::min(space, 1e12));
  const std::size_t goal = std::min(target, reachable);

  Rng rng(seed);
  std::set<std::string> seen;
  for (const auto& m : out) seen.insert(m.key());
  std::vector<std::size_t> idx(n_units);
  while (out.size() < goal) {
    const std::size_t k = 2 + rng.below(k_hi - 1);
    for (std::size_t i = 0; i < n_units; ++i) idx[i] = i;
    // Partial Fisher-Yates: first k entries are a uniform k-subset.
    for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(n_units - i)]);
    Mask m(n_units);
    for (std::size_t i = 0; i < k; ++i) m.set_perturbed(idx[i]);
    if (seen.insert(m.key()).second) out.push_back(std::move(m));
  }
  return out;
}

std::vector<double> clime_fit(const std::vector<Mask>& samples, const std::vector<double>& y,
                              const ClimeParams& params) {
  if (samples.size() != y.size()) throw PreconditionError("samples and values differ in length");
  if (samples.empty()) return {};
  const std::size_t n = samples.front().size();
  const std::size_t p = n + 1;  // intercept first
  std::vector<std::vector<double>> ata(p, std::vector<double>(p, 0.0));
  std::vector<double> atb(p, 0.0);
  std::vector<double> row(p);
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const Mask& m = samples[s];
    if (m.size() != n) throw MaskLengthMismatch("samples have differing lengths");
    const double d = static_cast<double>(m.perturbed_count()) / static_cast<double>(n);
    const double w = std::exp(-(d / params.sigma) * (d / params.sigma));
    row[0] = 1.0;
    for (std::size_t i = 0; i < n; ++i) row[i + 1] = m.kept(i) ? 1.0 : 0.0;
    for (std::size_t a = 0; a < p; ++a) {
      if (row[a] == 0.0) continue;
      atb[a] += w * row[a] * y[s];
      for (std::size_t b = 0; b < p; ++b) ata[a][b] += w * row[a] * row[b];
    }
  }
  if (params.ridge == 0.0) {
    const auto beta = solve(std::move(ata), std::move(atb));
    return {beta.begin() + 1, beta.end()};
  }
  // The kernel drives weights of heavily perturbed samples toward e^-16, so a
  // fixed ridge would swamp them. Refine against the unpenalized system: the
  // ridge keeps each solve well posed, the residual loop removes its bias.
  auto reg = ata;
  for (std::size_t i = 1; i < p; ++i) reg[i][i] += params.ridge;
  std::vector<double> beta(p, 0.0), r(p);
  for (int it = 0; it < 4000; ++it) {
    for (std::size_t a = 0; a < p; ++a) {
      double acc = atb[a];
      for (std::size_t b = 0; b < p; ++b) acc -= ata[a][b] * beta[b];
      r[a] = acc;
    }
    const auto delta = solve(reg, r);
    double step = 0.0, size = 0.0;
    for (std::size_t a = 0; a < p; ++a) {
      beta[a] += delta[a];
      step = std::max(step, std::abs(delta[a]));
      size = std::max(size, std::abs(beta[a]));
    }
    if (step <= 1e-15 * (1.0 + size)) break;
  }
  return {beta.begin() + 1, beta.end()};
}

std::vector<double> clime_attribute(std::size_t n_units, MaskEvaluator& value, const ClimeParams& params,
                                    std::uint64_t seed) {
  const auto samples = clime_samples(n_units, params, seed);
  const auto y = value.evaluate(samples);
  return clime_fit(samples, y, params);
}

namespace {

std::vector<std::size_t> neighborhood(std::size_t i, std::size_t n, std::size_t radius) {
  std::vector<std::size_t> out;
  const std::size_t lo = i > radius ? i - radius : 0;
  const std::size_t hi = std::min(n - 1, i + radius);
  for (std::size_t j = lo; j <= hi; ++j) {
    if (j != i) out.push_back(j);
  }
  return out;
}

}  // namespace

std::size_t lshap_query_bound(std::size_t n_units, const LshapParams& params) {
  std::size_t total = 0;
  for (std::size_t i = 0; i < n_units; ++i) total += std::size_t{1} << (neighborhood(i, n_units, params.radius).size() + 1);
  return total;
}

std::vector<double> lshap_attribute(std::size_t n_units, MaskEvaluator& value, const LshapParams& params) {
  std::vector<double> scores(n_units, 0.0);
  for (std::size_t i = 0; i < n_units; ++i) {
    const auto nb = neighborhood(i, n_units, params.radius);
    const std::size_t q = nb.size();
    if (q > 20) throw PreconditionError("L-SHAP neighborhood too large for exact enumeration");
    const std::size_t m = q + 1;
    // Coalition S of neighbors is kept; the rest of the neighborhood (and i,
    // when absent) is perturbed.
    std::vector<Mask> with_i, without_i;
    std::vector<double> weights;
    for (std::uint64_t bits = 0; bits < (1ULL << q); ++bits) {
      Mask with(n_units), without(n_units);
      without.set_perturbed(i);
      std::size_t size = 0;
      for (std::size_t b = 0; b < q; ++b) {
        const bool in_s = (bits >> b) & 1U;
        size += in_s;
        with.set_perturbed(nb[b], !in_s);
        without.set_perturbed(nb[b], !in_s);
      }
      // |S|! (m - |S| - 1)! / m!  ==  1 / (m * C(m - 1, |S|))
      weights.push_back(1.0 / (static_cast<double>(m) * binomial(m - 1, size)));
      with_i.push_back(std::move(with));
      without_i.push_back(std::move(without));
    }
    std::vector<Mask> all = with_i;
    all.insert(all.end(), without_i.begin(), without_i.end());
    const auto v = value.evaluate(all);
    double phi = 0.0;
    for (std::size_t s = 0; s < weights.size(); ++s) phi += weights[s] * (v[s] - v[weights.size() + s]);
    scores[i] = phi;
  }
  return scores;
}

std::string_view method_name(Method m) noexcept { return m == Method::clime ? "clime" : "lshap"; }

std::vector<std::size_t> top_units(const std::vector<AttributionNode>& nodes, std::size_t k) {
  std::vector<std::size_t> idx(nodes.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const double sa = std::abs(nodes[a].score), sb = std::abs(nodes[b].score);
    if (sa != sb) return sa > sb;
    return nodes[a].unit.start < nodes[b].unit.start;
  });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

namespace {

struct Explainer {
  std::string_view input;
  const Objective& objective;
  const MultilevelConfig& config;
  bool truncated = false;

  std::vector<AttributionNode> attribute(const std::vector<UnitSpan>& units) {
    MaskEvaluator value(
        [&](const Mask& m) { return objective(apply_mask(input, units, m, ReplacementPolicy::remove())); },
        config.workers);
    const std::vector<double> scores = config.method == Method::clime
                                           ? clime_attribute(units.size(), value, config.clime, config.seed)
                                           : lshap_attribute(units.size(), value, config.lshap);
    std::vector<AttributionNode> nodes;
    for (std::size_t i = 0; i < units.size(); ++i) nodes.push_back({units[i], scores[i], {}});
    return nodes;
  }

  void descend(std::vector<AttributionNode>& nodes, std::size_t level_index) {
    if (level_index >= config.levels.size()) return;
    for (std::size_t idx : top_units(nodes, config.top_k)) {
      AttributionNode& parent = nodes[idx];
      const auto children = refine(parent.unit, config.levels[level_index]);
      if (children.empty()) continue;
      try {
        parent.children = attribute(children);
      } catch (const BudgetExhausted&) {
        truncated = true;
        return;
      }
      descend(parent.children, level_index + 1);
      if (truncated) return;
    }
  }
};

}  // namespace

AttributionResult multilevel_explain(std::string_view input, LanguageModel& model, const ScalarizerSpec& scalarizer,
                                     const MultilevelConfig& config, LanguageModel* aux) {
  if (trim(input).empty()) throw EmptyInput("nothing to explain: input is empty");
  if (config.levels.empty()) throw PreconditionError("at least one level is required");
  for (std::size_t i = 1; i < config.levels.size(); ++i) {
    if (static_cast<int>(config.levels[i]) <= static_cast<int>(config.levels[i - 1])) {
      throw InvalidLevelOrder("levels must go from coarse to fine");
    }
  }
  require_capabilities(scalarizer, model, aux);

  const std::int64_t before = model.requests_sent() + (aux != nullptr && aux != &model ? aux->requests_sent() : 0);
  AttributionResult result;
  result.input = std::string(input);
  result.method = config.method;
  result.scalarizer = scalarizer;
  result.seed = config.seed;
  auto count = [&] {
    return model.requests_sent() + (aux != nullptr && aux != &model ? aux->requests_sent() : 0) - before;
  };

  try {
    result.output = model.generate(ModelInput::plain(result.input), config.gen).text;
  } catch (const BudgetExhausted&) {
    result.truncated = true;
    result.n_queries = count();
    return result;
  }
  const Objective objective(model, scalarizer, result.input, result.output, aux, config.gen);
  Explainer ex{input, objective, config};
  try {
    result.units = ex.attribute(segment(input, config.levels.front()));
    ex.descend(result.units, 1);
  } catch (const BudgetExhausted&) {
    ex.truncated = true;
  }
  result.truncated = ex.truncated;
  result.n_queries = count();
  return result;
}

}  // namespace icx::mexgen
