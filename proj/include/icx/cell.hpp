#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "icx/model_client.hpp"
#include "icx/perturber.hpp"
#include "icx/scalarizers.hpp"
#include "icx/segmenter.hpp"

namespace icx::cell {

struct CellParams {
  std::int64_t budget = 200;     // total backend calls: generation, infill and judge
  std::size_t span = 2;          // words per window
  int infills = 3;               // candidates per expanded window
  double threshold = 0.5;        // contrast score that counts as success
  std::size_t max_edits = 3;
  double lambda_edit = 0.1;      // cell-bleu edit penalty
  int max_new_tokens = 16;       // infill length cap
  GenParams gen;                 // for the explained model's responses
};

/// One replacement. Window offsets refer to the prompt as it stood after the
/// previous edits, so edits replay in order.
struct Edit {
  std::vector<UnitSpan> window;
  std::string replacement;

  bool operator==(const Edit&) const = default;
};

struct ContrastiveExplanation {
  std::string original_prompt;
  std::string original_response;
  std::string contrastive_prompt;
  std::string contrastive_response;
  std::vector<Edit> edits;
  double contrast_score = -std::numeric_limits<double>::infinity();
  std::int64_t queries_used = 0;
  bool succeeded = false;
  /// Best contrast score seen after each round.
  std::vector<double> best_history;

  bool operator==(const ContrastiveExplanation&) const = default;
};

/// Replays `edits` over `original`. Throws PreconditionError when a window's
/// recorded text does not match the prompt it is applied to.
std::string apply_edits(std::string_view original, const std::vector<Edit>& edits);

/// The explained model plus optional separate infiller and judge backends
/// (each defaults to `model`). One budget meter is shared by all of them for
/// the duration of a call.
struct Backends {
  LanguageModel& model;
  LanguageModel* infiller = nullptr;
  LanguageModel* judge = nullptr;
};

/// Budgeted search. Each round screens non-overlapping windows of `span`
/// unedited words left to right with one infill each, expands the best window
/// (and its one-word shifts) with `infills` candidates, and either stops at
/// the threshold or commits the round's best edit and freezes the edited text.
ContrastiveExplanation cell_explain(std::string_view prompt, const Backends& backends, const ScalarizerSpec& scalarizer,
                                    const CellParams& params, std::uint64_t seed);

/// Myopic search: every unedited word gets one infill per round and the best
/// is committed. Costs O(words) calls per round.
ContrastiveExplanation mcell_explain(std::string_view prompt, const Backends& backends, const ScalarizerSpec& scalarizer,
                                     const CellParams& params, std::uint64_t seed);

}  // namespace icx::cell
