#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "icx/model_client.hpp"
#include "icx/perturber.hpp"
#include "icx/scalarizers.hpp"
#include "icx/segmenter.hpp"

namespace icx::mexgen {

using ValueFn = std::function<double(const Mask&)>;

/// Memoizing evaluator for value functions over masks. Distinct masks are
/// evaluated at most once; batches may run on several threads, and results are
/// returned by index so completion order never matters.
class MaskEvaluator {
 public:
  explicit MaskEvaluator(ValueFn fn, int workers = 1) : fn_(std::move(fn)), workers_(workers < 1 ? 1 : workers) {}

  double operator()(const Mask& mask);
  std::vector<double> evaluate(const std::vector<Mask>& masks);

  /// Number of value_fn calls made so far.
  std::size_t evaluations() const noexcept { return evaluations_; }

 private:
  ValueFn fn_;
  int workers_;
  std::map<std::string, double> memo_;
  std::size_t evaluations_ = 0;
};

struct ClimeParams {
  std::size_t n_samples = 0;  // 0 means 4 * n_units
  std::size_t k_max = 2;      // most units perturbed at once in random samples
  double sigma = 0.25;        // kernel width over the perturbed fraction
  double ridge = 1e-6;
  bool exhaustive = false;    // use all 2^n masks instead of sampling
};

struct LshapParams {
  std::size_t radius = 2;
};

/// C-LIME sample design: the all-kept mask, every single-unit perturbation,
/// then distinct masks with 2..k_max perturbed units drawn uniformly (size
/// first, then subset) until n_samples or the design space runs out.
std::vector<Mask> clime_samples(std::size_t n_units, const ClimeParams& params, std::uint64_t seed);

/// Weighted ridge regression of y on kept-indicators z with an unpenalized
/// intercept, weights exp(-(d/sigma)^2) where d is the perturbed fraction.
/// Returns one coefficient per unit. Throws DegenerateDesign.
std::vector<double> clime_fit(const std::vector<Mask>& samples, const std::vector<double>& y,
                              const ClimeParams& params);

std::vector<double> clime_attribute(std::size_t n_units, MaskEvaluator& value, const ClimeParams& params,
                                    std::uint64_t seed);

/// Exact Shapley values restricted to neighborhoods: unit i plays a game with
/// the units within `radius` positions; every unit outside stays kept.
std::vector<double> lshap_attribute(std::size_t n_units, MaskEvaluator& value, const LshapParams& params);

/// sum_i 2^(|N(i)|+1): L-SHAP queries before memoization.
std::size_t lshap_query_bound(std::size_t n_units, const LshapParams& params);

enum class Method { clime, lshap };

std::string_view method_name(Method m) noexcept;

struct AttributionNode {
  UnitSpan unit;
  double score = 0.0;
  std::vector<AttributionNode> children;
};

struct MultilevelConfig {
  Method method = Method::clime;
  ClimeParams clime;
  LshapParams lshap;
  std::vector<Level> levels{Level::sentence, Level::word};
  std::size_t top_k = 2;
  std::uint64_t seed = 0;
  int workers = 1;
  GenParams gen;
};

struct AttributionResult {
  std::string input;
  std::string output;  // the model's response to the unperturbed input
  std::vector<AttributionNode> units;
  Method method = Method::clime;
  ScalarizerSpec scalarizer;
  std::int64_t n_queries = 0;
  std::uint64_t seed = 0;
  bool truncated = false;  // a budget ran out; some levels are missing
};

/// Indices of the `k` units with the largest |score|; ties go to the smaller
/// start offset.
std::vector<std::size_t> top_units(const std::vector<AttributionNode>& nodes, std::size_t k);

/// Coarse-to-fine attribution. Generates the original output once, attributes
/// at levels[0], then for each of the top_k units refines to the next level and
/// attributes the children with the rest of the input held fixed, recursively.
/// `aux` is the judge / embedder for scalarizers that need one.
AttributionResult multilevel_explain(std::string_view input, LanguageModel& model, const ScalarizerSpec& scalarizer,
                                     const MultilevelConfig& config, LanguageModel* aux = nullptr);

}  // namespace icx::mexgen
