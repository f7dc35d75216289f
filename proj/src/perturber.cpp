#include "icx/perturber.hpp"

#include <algorithm>

#include "icx/errors.hpp"
#include "icx/prompts.hpp"
#include "icx/text.hpp"

namespace icx {

std::size_t Mask::perturbed_count() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), true));
}

std::string Mask::key() const {
  std::string k(bits_.size(), '0');
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i]) k[i] = '1';
  }
  return k;
}

ReplacementPolicy ReplacementPolicy::fixed(std::string replacement) {
  if (replacement.empty()) return remove();
  return ReplacementPolicy(Kind::fixed, std::move(replacement));
}

ReplacementPolicy ReplacementPolicy::infill(InfillParams params) {
  if (params.candidates_per_window < 1 || params.max_new_tokens < 1) {
    throw PreconditionError("infill parameters must be positive");
  }
  ReplacementPolicy p(Kind::infill, "");
  p.infill_ = params;
  return p;
}

std::string apply_mask(std::string_view text, const std::vector<UnitSpan>& units, const Mask& mask,
                       const ReplacementPolicy& policy) {
  if (mask.size() != units.size()) {
    throw MaskLengthMismatch("mask has " + std::to_string(mask.size()) + " bits for " +
                             std::to_string(units.size()) + " units");
  }
  if (policy.kind() == ReplacementPolicy::Kind::infill) {
    throw PreconditionError("apply_mask does not infill; use infill_window");
  }
  const bool removing = policy.kind() == ReplacementPolicy::Kind::remove;

  std::string out;
  out.reserve(text.size());
  std::string_view pending;   // whitespace gap waiting for the next emitted content
  bool has_pending = false;
  bool removed_since_emit = false;

  auto emit = [&](std::string_view content) {
    if (has_pending && !(removed_since_emit && (out.empty() || is_space(out.back())))) out += pending;
    has_pending = false;
    removed_since_emit = false;
    out += content;
  };
  auto space_gap = [&](std::string_view g) {
    if (g.empty()) return;
    if (has_pending && removed_since_emit) return;  // collapse around a removal
    if (has_pending) out += pending;
    pending = g;
    has_pending = true;
  };
  // Non-whitespace text between units (e.g. the rest of the input around a
  // refined sentence) is emitted verbatim; its edge whitespace collapses like a gap.
  auto gap = [&](std::string_view g) {
    std::size_t b = 0, e = g.size();
    while (b < e && is_space(g[b])) ++b;
    while (e > b && is_space(g[e - 1])) --e;
    if (b == e) return space_gap(g);
    space_gap(g.substr(0, b));
    emit(g.substr(b, e - b));
    space_gap(g.substr(e));
  };

  std::size_t cursor = 0;
  for (std::size_t i = 0; i < units.size(); ++i) {
    const UnitSpan& u = units[i];
    if (u.start < cursor || u.end > text.size() || u.start >= u.end) {
      throw PreconditionError("units must be sorted, disjoint and inside the text");
    }
    gap(text.substr(cursor, u.start - cursor));
    if (mask.kept(i)) {
      emit(text.substr(u.start, u.end - u.start));
    } else if (removing) {
      removed_since_emit = true;
    } else {
      emit(policy.replacement());
    }
    cursor = u.end;
  }
  gap(text.substr(cursor));
  if (has_pending && !removed_since_emit) out += pending;
  return out;
}

std::string mask_window(std::string_view text, std::size_t start, std::size_t end) {
  std::string out(text.substr(0, start));
  out += prompts::kMaskOpen;
  out += text.substr(start, end - start);
  out += prompts::kMaskClose;
  out += text.substr(end);
  return out;
}

std::vector<InfillCandidate> infill_candidates(std::string_view text, const std::vector<UnitSpan>& window,
                                               LanguageModel& client, int n, const InfillParams& params,
                                               std::int64_t base_seed) {
  if (n <= 0) return {};
  if (window.empty()) throw PreconditionError("infill window is empty");
  for (std::size_t i = 1; i < window.size(); ++i) {
    if (window[i].start < window[i - 1].end ||
        !all_space(text.substr(window[i - 1].end, window[i].start - window[i - 1].end))) {
      throw PreconditionError("infill window is not a contiguous run of words");
    }
  }
  const std::size_t start = window.front().start;
  const std::size_t end = window.back().end;
  if (end > text.size()) throw PreconditionError("infill window lies outside the text");
  const std::string_view original = text.substr(start, end - start);
  const ModelInput input = ModelInput::plain(prompts::infill(mask_window(text, start, end)));

  std::vector<InfillCandidate> out;
  for (int i = 0; i < n; ++i) {
    GenParams gp;
    gp.max_tokens = params.max_new_tokens;
    gp.temperature = 0.0;
    gp.seed = base_seed + i;
    const GeneratedOutput g = client.generate(input, gp);
    const std::string_view reply = trim(g.text);
    if (reply.empty() || reply == original) continue;
    const bool dup = std::any_of(out.begin(), out.end(),
                                 [&](const InfillCandidate& c) { return c.replacement == reply; });
    if (dup) continue;
    std::string full(text.substr(0, start));
    full += reply;
    full += text.substr(end);
    out.push_back({std::move(full), std::string(reply)});
  }
  if (out.empty()) {
    throw AllCandidatesDegenerate("every infill for '" + std::string(original) +
                                  "' was empty or identical to the original");
  }
  return out;
}

std::vector<std::string> infill_window(std::string_view text, const std::vector<UnitSpan>& window,
                                       LanguageModel& client, int n, const InfillParams& params,
                                       std::int64_t base_seed) {
  std::vector<std::string> out;
  for (auto& c : infill_candidates(text, window, client, n, params, base_seed)) out.push_back(std::move(c.text));
  return out;
}

}  // namespace icx
