#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "icx/perturber.hpp"
#include "icx/segmenter.hpp"

namespace icx::metrics {

/// Scalarizer value of a perturbed input text.
using TextValueFn = std::function<double(std::string_view)>;

struct CurvePoint {
  std::size_t k = 0;  // units perturbed
  double value = 0.0;

  bool operator==(const CurvePoint&) const = default;
};

struct PerturbationCurve {
  std::vector<CurvePoint> points;
  std::string ordering;  // "attribution" or "random:<seed>"
  double normalized_area = 0.0;
  bool truncated = false;  // budget ran out before k = K
};

/// Trapezoidal area of (value_0 - value_k) over k = 0..K, divided by K * |value_0|.
/// Zero when K = 0 or value_0 = 0.
double normalized_area(const std::vector<CurvePoint>& points);

/// Unit indices by descending score; equal scores keep the smaller start first.
std::vector<std::size_t> attribution_order(const std::vector<UnitSpan>& units, const std::vector<double>& scores);

/// Perturbs the first k units of `order` for k = 0..K and records the value.
/// K defaults to every unit. Evaluations may run on `workers` threads.
PerturbationCurve curve_for_order(std::string_view text, const std::vector<UnitSpan>& units,
                                  const std::vector<std::size_t>& order, const TextValueFn& value,
                                  std::optional<std::size_t> K, const ReplacementPolicy& policy,
                                  std::string ordering_label, int workers = 1);

PerturbationCurve perturb_curve(std::string_view text, const std::vector<UnitSpan>& units,
                                const std::vector<double>& scores, const TextValueFn& value,
                                std::optional<std::size_t> K = std::nullopt,
                                const ReplacementPolicy& policy = ReplacementPolicy::remove(), int workers = 1);

/// Curve under a uniformly random unit order drawn from `seed`.
PerturbationCurve random_curve(std::string_view text, const std::vector<UnitSpan>& units, const TextValueFn& value,
                               std::uint64_t seed, std::optional<std::size_t> K = std::nullopt,
                               const ReplacementPolicy& policy = ReplacementPolicy::remove(), int workers = 1);

struct OrderingComparison {
  double area_attr = 0.0;
  double mean_area_random = 0.0;
  std::vector<double> random_areas;
  bool no_random_baselines = false;
};

OrderingComparison compare_orderings(const PerturbationCurve& attr, const std::vector<PerturbationCurve>& random);

}  // namespace icx::metrics
