#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "icx/model_client.hpp"
#include "icx/segmenter.hpp"

namespace icx {

/// One flag per unit; true = perturbed.
class Mask {
 public:
  Mask() = default;
  explicit Mask(std::size_t n, bool perturbed = false) : bits_(n, perturbed) {}
  explicit Mask(std::vector<bool> perturbed) : bits_(std::move(perturbed)) {}

  static Mask all_kept(std::size_t n) { return Mask(n, false); }

  std::size_t size() const noexcept { return bits_.size(); }
  bool perturbed(std::size_t i) const { return bits_[i]; }
  bool kept(std::size_t i) const { return !bits_[i]; }
  void set_perturbed(std::size_t i, bool v = true) { bits_[i] = v; }
  std::size_t perturbed_count() const noexcept;

  /// Bit string such as "0110", usable as a memo key.
  std::string key() const;

  bool operator==(const Mask&) const = default;

 private:
  std::vector<bool> bits_;
};

struct InfillParams {
  int candidates_per_window = 3;
  int max_new_tokens = 16;

  bool operator==(const InfillParams&) const = default;
};

/// delete, fixed:"..." or generated infill. fixed:"" canonicalizes to delete.
class ReplacementPolicy {
 public:
  enum class Kind { remove, fixed, infill };

  static ReplacementPolicy remove() { return ReplacementPolicy(Kind::remove, ""); }
  static ReplacementPolicy fixed(std::string replacement);
  static ReplacementPolicy infill(InfillParams params);

  Kind kind() const noexcept { return kind_; }
  const std::string& replacement() const noexcept { return replacement_; }
  const std::optional<InfillParams>& infill_params() const noexcept { return infill_; }

  bool operator==(const ReplacementPolicy&) const = default;

 private:
  ReplacementPolicy(Kind k, std::string r) : kind_(k), replacement_(std::move(r)) {}

  Kind kind_;
  std::string replacement_;
  std::optional<InfillParams> infill_;
};

/// Rebuilds `text` with the perturbed units replaced. Kept units, the text
/// around them and the gaps between them are copied verbatim. When a unit is
/// removed, whitespace gaps on both sides of it collapse to the first one, and
/// whitespace left dangling at either end of the result is dropped.
/// Throws MaskLengthMismatch, PreconditionError for infill policies.
std::string apply_mask(std::string_view text, const std::vector<UnitSpan>& units, const Mask& mask,
                       const ReplacementPolicy& policy);

/// Wraps the window in <mask>...</mask> for the infill prompt.
std::string mask_window(std::string_view text, std::size_t start, std::size_t end);

/// Asks `client` for `n` replacements of the contiguous word window and returns
/// the full candidate texts. Candidate i is generated with seed base_seed + i.
/// Replies are trimmed; empty replies, replies equal to the window text, and
/// duplicates are discarded. Throws AllCandidatesDegenerate when nothing
/// survives, PreconditionError when the window is empty or not contiguous.
std::vector<std::string> infill_window(std::string_view text, const std::vector<UnitSpan>& window,
                                       LanguageModel& client, int n, const InfillParams& params = {},
                                       std::int64_t base_seed = 0);

/// The replacement string extracted from an infill candidate, i.e. the
/// trimmed reply. Exposed so callers can record edits.
struct InfillCandidate {
  std::string text;         // full edited text
  std::string replacement;  // what replaced the window
};

std::vector<InfillCandidate> infill_candidates(std::string_view text, const std::vector<UnitSpan>& window,
                                               LanguageModel& client, int n, const InfillParams& params = {},
                                               std::int64_t base_seed = 0);

}  // namespace icx
