#pragma once

#include <string>
#include <string_view>

#include "icx/model_client.hpp"
#include "icx/scalarizers.hpp"

namespace icx {

/// Scores a perturbed version of a fixed input against the output the model
/// gave for the original. Values are oriented so that larger means "the
/// original output is still supported":
///   logprob          length-normalized log-probability of the original output
///   text-sim:*       similarity of the regenerated output to the original
///   preference       1 - preference_score
///   contradiction    1 - contradiction_score
///   nli              1 - nli_score
///   cell-bleu        bleu, i.e. 1 - cell_bleu_score with no edit penalty
class Objective {
 public:
  /// `aux` is the judge for judge scalarizers and the embedder for
  /// embed-cosine; it defaults to `model`.
  Objective(LanguageModel& model, ScalarizerSpec spec, std::string original_input, std::string original_output,
            LanguageModel* aux = nullptr, GenParams gen = {});

  double operator()(std::string_view perturbed_text) const;

  const ScalarizerSpec& spec() const noexcept { return spec_; }
  const std::string& original_output() const noexcept { return original_output_; }

 private:
  LanguageModel& model_;
  LanguageModel& aux_;
  ScalarizerSpec spec_;
  std::string original_input_;
  std::string original_output_;
  GenParams gen_;
};

/// Checks up front that the backends can serve `spec`; throws UnsupportedCapability.
void require_capabilities(const ScalarizerSpec& spec, LanguageModel& model, LanguageModel* aux);

}  // namespace icx
