#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "icx/model_client.hpp"

namespace icx {

enum class TextMetric { bleu, unigram_f1, embed_cosine };

struct ScalarizerSpec {
  enum class Kind { logprob, text_sim, preference, contradiction, nli, cell_bleu };

  Kind kind = Kind::logprob;
  TextMetric metric = TextMetric::bleu;  // text_sim only
  double lambda_edit = 0.1;              // cell_bleu only

  /// "logprob", "text-sim:bleu", "text-sim:unigram-f1", "text-sim:embed-cosine",
  /// "preference", "contradiction", "nli", "cell-bleu". Throws PreconditionError.
  static ScalarizerSpec parse(std::string_view name);
  std::string name() const;

  bool needs_judge() const noexcept {
    return kind == Kind::preference || kind == Kind::contradiction || kind == Kind::nli;
  }
};

/// BLEU-4 over whitespace tokens. Clipped n-gram precisions for n = 1..4,
/// unsmoothed for unigrams and add-one smoothed (numerator and denominator)
/// for n >= 2, combined by geometric mean and multiplied by the brevity
/// penalty min(1, exp(1 - |ref| / |cand|)). Empty candidate scores 0; two
/// empty texts score 1.
double bleu(std::string_view reference, std::string_view candidate);

/// Harmonic mean of clipped unigram precision and recall.
double unigram_f1(std::string_view reference, std::string_view candidate);

/// Similarity in [0, 1]. embed-cosine maps cosine c to (1 + c) / 2 and needs an
/// embedding backend (UnsupportedCapability otherwise).
double text_similarity(std::string_view original_output, std::string_view new_output, TextMetric metric,
                       LanguageModel* embedder = nullptr);

double cosine(std::span<const double> a, std::span<const double> b);

/// Length-normalized log-probability of `original_output` given `perturbed`:
/// total / max(1, scored token count). Empty output gives 0.
double logprob_scalarize(const ModelInput& perturbed, std::string_view original_output, LanguageModel& client);

/// First non-whitespace character, case-insensitive. Throws JudgeParseError.
char parse_ab(std::string_view reply);
bool parse_yes_no(std::string_view reply);

/// Fraction of the two presentation orders in which the judge prefers the
/// ORIGINAL response. 1.0 means the perturbation degraded the answer.
double preference_score(std::string_view prompt, std::string_view response_orig, std::string_view response_pert,
                        LanguageModel& judge);

/// 1.0 if the judge says the perturbed response contradicts the original.
double contradiction_score(std::string_view response_orig, std::string_view response_pert, LanguageModel& judge);

/// 1.0 if the judge says the original no longer entails the perturbed response.
double nli_score(std::string_view response_orig, std::string_view response_pert, LanguageModel& judge);

/// (1 - bleu(orig, pert)) - lambda_edit * edit_fraction.
double cell_bleu_score(std::string_view response_orig, std::string_view response_pert, double edit_fraction,
                       double lambda_edit);

}  // namespace icx
