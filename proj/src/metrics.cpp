#include "icx/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "icx/errors.hpp"
#include "icx/text.hpp"

namespace icx::metrics {

double normalized_area(const std::vector<CurvePoint>& points) {
  if (points.size() < 2) return 0.0;
  const double v0 = points.front().value;
  if (v0 == 0.0) return 0.0;
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double a = v0 - points[i - 1].value;
    const double b = v0 - points[i].value;
    area += 0.5 * (a + b) * static_cast<double>(points[i].k - points[i - 1].k);
  }
  const double K = static_cast<double>(points.back().k - points.front().k);
  return area / (K * std::abs(v0));
}

std::vector<std::size_t> attribution_order(const std::vector<UnitSpan>& units, const std::vector<double>& scores) {
  if (units.size() != scores.size()) throw PreconditionError("scores must align with units");
  std::vector<std::size_t> order(units.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return units[a].start < units[b].start;
  });
  return order;
}

PerturbationCurve curve_for_order(std::string_view text, const std::vector<UnitSpan>& units,
                                  const std::vector<std::size_t>& order, const TextValueFn& value,
                                  std::optional<std::size_t> K, const ReplacementPolicy& policy,
                                  std::string ordering_label, int workers) {
  const std::size_t k_max = std::min(K.value_or(units.size()), units.size());
  std::vector<std::string> texts;
  Mask mask(units.size());
  texts.push_back(apply_mask(text, units, mask, policy));
  for (std::size_t k = 1; k <= k_max; ++k) {
    mask.set_perturbed(order[k - 1]);
    texts.push_back(apply_mask(text, units, mask, policy));
  }

  // Point k is valid only if every evaluation up to k succeeded.
  std::vector<double> values(texts.size());
  std::vector<char> ok(texts.size(), 0);
  std::atomic<std::size_t> next{0};
  std::exception_ptr other_failure;
  std::mutex mu;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= texts.size()) return;
      try {
        values[i] = value(texts[i]);
        ok[i] = 1;
      } catch (const BudgetExhausted&) {
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!other_failure) other_failure = std::current_exception();
        next.store(texts.size());
      }
    }
  };
  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, workers)), texts.size());
  if (n_threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (other_failure) std::rethrow_exception(other_failure);

  PerturbationCurve curve;
  curve.ordering = std::move(ordering_label);
  for (std::size_t k = 0; k < texts.size(); ++k) {
    if (!ok[k]) {
      curve.truncated = true;
      break;
    }
    curve.points.push_back({k, values[k]});
  }
  curve.normalized_area = normalized_area(curve.points);
  return curve;
}

PerturbationCurve perturb_curve(std::string_view text, const std::vector<UnitSpan>& units,
                                const std::vector<double>& scores, const TextValueFn& value,
                                std::optional<std::size_t> K, const ReplacementPolicy& policy, int workers) {
  return curve_for_order(text, units, attribution_order(units, scores), value, K, policy, "attribution", workers);
}

PerturbationCurve random_curve(std::string_view text, const std::vector<UnitSpan>& units, const TextValueFn& value,
                               std::uint64_t seed, std::optional<std::size_t> K, const ReplacementPolicy& policy,
                               int workers) {
  std::vector<std::size_t> order(units.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  return curve_for_order(text, units, order, value, K, policy, "random:" + std::to_string(seed), workers);
}

OrderingComparison compare_orderings(const PerturbationCurve& attr, const std::vector<PerturbationCurve>& random) {
  OrderingComparison c;
  c.area_attr = attr.normalized_area;
  if (random.empty()) {
    c.no_random_baselines = true;
    return c;
  }
  double sum = 0.0;
  for (const auto& r : random) {
    c.random_areas.push_back(r.normalized_area);
    sum += r.normalized_area;
  }
  c.mean_area_random = sum / static_cast<double>(random.size());
  return c;
}

}  // namespace icx::metrics
