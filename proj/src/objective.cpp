#include "icx/objective.hpp"

#include "icx/errors.hpp"

namespace icx {

Objective::Objective(LanguageModel& model, ScalarizerSpec spec, std::string original_input,
                     std::string original_output, LanguageModel* aux, GenParams gen)
    : model_(model),
      aux_(aux != nullptr ? *aux : model),
      spec_(spec),
      original_input_(std::move(original_input)),
      original_output_(std::move(original_output)),
      gen_(gen) {}

double Objective::operator()(std::string_view perturbed_text) const {
  const ModelInput input = ModelInput::plain(std::string(perturbed_text));
  if (spec_.kind == ScalarizerSpec::Kind::logprob) {
    return logprob_scalarize(input, original_output_, model_);
  }
  const std::string response = model_.generate(input, gen_).text;
  switch (spec_.kind) {
    case ScalarizerSpec::Kind::text_sim:
      return text_similarity(original_output_, response, spec_.metric, &aux_);
    case ScalarizerSpec::Kind::preference:
      return 1.0 - preference_score(original_input_, original_output_, response, aux_);
    case ScalarizerSpec::Kind::contradiction:
      return 1.0 - contradiction_score(original_output_, response, aux_);
    case ScalarizerSpec::Kind::nli:
      return 1.0 - nli_score(original_output_, response, aux_);
    case ScalarizerSpec::Kind::cell_bleu:
      return bleu(original_output_, response);
    case ScalarizerSpec::Kind::logprob:
      break;
  }
  return 0.0;
}

void require_capabilities(const ScalarizerSpec& spec, LanguageModel& model, LanguageModel* aux) {
  LanguageModel& a = aux != nullptr ? *aux : model;
  if (spec.kind == ScalarizerSpec::Kind::logprob && !model.capabilities().can_score) {
    throw UnsupportedCapability(model.name() + " cannot score sequences; use a text-sim scalarizer");
  }
  if (spec.kind == ScalarizerSpec::Kind::text_sim && spec.metric == TextMetric::embed_cosine &&
      !a.capabilities().can_embed) {
    throw UnsupportedCapability(a.name() + " does not serve embeddings");
  }
}

}  // namespace icx
