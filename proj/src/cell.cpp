#include "icx/cell.hpp"

#include <algorithm>
#include <memory>
#include <optional>
#include <set>

#include "icx/errors.hpp"
#include "icx/text.hpp"

namespace icx::cell {

std::string apply_edits(std::string_view original, const std::vector<Edit>& edits) {
  std::string text(original);
  for (const auto& e : edits) {
    if (e.window.empty()) throw PreconditionError("edit with an empty window");
    for (const auto& w : e.window) {
      if (w.end > text.size() || text.compare(w.start, w.end - w.start, w.text) != 0) {
        throw PreconditionError("edit window '" + w.text + "' does not match the prompt");
      }
    }
    const std::size_t start = e.window.front().start;
    const std::size_t end = e.window.back().end;
    text = text.substr(0, start) + e.replacement + text.substr(end);
  }
  return text;
}

namespace {

// Installs one shared meter on every distinct backend and restores the
// previous meters on scope exit.
class MeterScope {
 public:
  MeterScope(std::vector<LanguageModel*> models, std::int64_t budget)
      : meter_(std::make_shared<BudgetMeter>(budget)) {
    for (auto* m : models) {
      if (std::find(models_.begin(), models_.end(), m) != models_.end()) continue;
      models_.push_back(m);
      saved_.push_back(m->meter());
      m->attach_meter(meter_);
    }
  }
  ~MeterScope() {
    for (std::size_t i = 0; i < models_.size(); ++i) models_[i]->attach_meter(saved_[i]);
  }
  MeterScope(const MeterScope&) = delete;
  MeterScope& operator=(const MeterScope&) = delete;

  BudgetMeter& meter() { return *meter_; }

 private:
  std::shared_ptr<BudgetMeter> meter_;
  std::vector<LanguageModel*> models_;
  std::vector<std::shared_ptr<BudgetMeter>> saved_;
};

struct Candidate {
  std::string prompt;
  std::string response;
  Edit edit;
  double score = 0.0;
};

struct FrozenRange {
  std::size_t start, end;
};

class Search {
 public:
  Search(std::string_view prompt, const Backends& b, const ScalarizerSpec& scalarizer, const CellParams& params,
         std::uint64_t seed, bool myopic)
      : model_(b.model),
        infiller_(b.infiller != nullptr ? *b.infiller : b.model),
        judge_(b.judge != nullptr ? *b.judge : b.model),
        scalarizer_(scalarizer),
        params_(params),
        seed_(seed),
        myopic_(myopic),
        span_(myopic ? 1 : std::max<std::size_t>(1, params.span)) {
    result_.original_prompt = std::string(prompt);
    result_.contrastive_prompt = result_.original_prompt;
    current_ = result_.original_prompt;
    original_words_ = segment(prompt, Level::word).size();
  }

  ContrastiveExplanation run() {
    if (original_words_ == 0) throw EmptyInput("prompt has no words");
    switch (scalarizer_.kind) {
      case ScalarizerSpec::Kind::preference:
      case ScalarizerSpec::Kind::contradiction:
      case ScalarizerSpec::Kind::nli:
      case ScalarizerSpec::Kind::cell_bleu:
        break;
      default:
        throw PreconditionError("CELL needs a preference, contradiction, nli or cell-bleu scalarizer");
    }
    if (params_.budget < static_cast<std::int64_t>(positions().size())) {
      throw PreconditionError("budget " + std::to_string(params_.budget) + " is below the " +
                              std::to_string(positions().size()) + " screening positions");
    }
    MeterScope scope({&model_, &infiller_, &judge_}, params_.budget);
    meter_ = &scope.meter();
    try {
      result_.original_response = model_.generate(ModelInput::plain(current_), params_.gen).text;
      result_.contrastive_response = result_.original_response;
      for (std::size_t round = 0; round < params_.max_edits; ++round) {
        if (!step(round)) break;
        if (result_.succeeded) break;
      }
    } catch (const BudgetExhausted&) {
      // Keep the best candidate found so far.
    }
    result_.queries_used = meter_->used();
    meter_ = nullptr;
    return result_;
  }

 private:
  std::int64_t eval_cost() const {
    switch (scalarizer_.kind) {
      case ScalarizerSpec::Kind::preference: return 1 + 2;
      case ScalarizerSpec::Kind::contradiction:
      case ScalarizerSpec::Kind::nli: return 1 + 1;
      default: return 1;
    }
  }

  bool frozen(const UnitSpan& w) const {
    return std::any_of(frozen_.begin(), frozen_.end(),
                       [&](const FrozenRange& f) { return w.start < f.end && w.end > f.start; });
  }

  // Runs of consecutive unfrozen words in the current prompt.
  std::vector<std::vector<UnitSpan>> runs() const {
    std::vector<std::vector<UnitSpan>> out;
    std::vector<UnitSpan> run;
    for (auto& w : segment(current_, Level::word)) {
      if (frozen(w)) {
        if (!run.empty()) out.push_back(std::move(run));
        run.clear();
      } else {
        run.push_back(std::move(w));
      }
    }
    if (!run.empty()) out.push_back(std::move(run));
    return out;
  }

  struct Position {
    std::size_t run, first, count;  // word range inside one run
  };

  std::vector<Position> positions() const {
    std::vector<Position> out;
    const auto rs = runs();
    for (std::size_t r = 0; r < rs.size(); ++r) {
      for (std::size_t i = 0; i < rs[r].size(); i += span_) {
        out.push_back({r, i, std::min(span_, rs[r].size() - i)});
      }
    }
    return out;
  }

  double contrast(const std::string& response, std::size_t window_words) const {
    switch (scalarizer_.kind) {
      case ScalarizerSpec::Kind::preference:
        return preference_score(result_.original_prompt, result_.original_response, response, judge_);
      case ScalarizerSpec::Kind::contradiction:
        return contradiction_score(result_.original_response, response, judge_);
      case ScalarizerSpec::Kind::nli:
        return nli_score(result_.original_response, response, judge_);
      case ScalarizerSpec::Kind::cell_bleu: {
        const double frac = std::min(
            1.0, static_cast<double>(edited_words_ + window_words) / static_cast<double>(original_words_));
        return cell_bleu_score(result_.original_response, response, frac, params_.lambda_edit);
      }
      default:
        return 0.0;
    }
  }

  // Infills `window` `n` times and scores each surviving candidate.
  std::vector<Candidate> try_window(const std::vector<UnitSpan>& window, int n, std::int64_t salt) {
    std::vector<Candidate> out;
    if (n <= 0) return out;
    InfillParams ip;
    ip.candidates_per_window = n;
    ip.max_new_tokens = params_.max_new_tokens;
    std::vector<InfillCandidate> cands;
    try {
      cands = infill_candidates(current_, window, infiller_, n, ip, static_cast<std::int64_t>(seed_) + salt);
    } catch (const AllCandidatesDegenerate&) {
      return out;
    }
    for (auto& c : cands) {
      if (!evaluated_.insert(c.text).second) continue;
      if (!meter_->can_afford(eval_cost())) break;
      Candidate cand;
      cand.response = model_.generate(ModelInput::plain(c.text), params_.gen).text;
      cand.score = contrast(cand.response, window.size());
      cand.prompt = std::move(c.text);
      cand.edit = Edit{window, std::move(c.replacement)};
      out.push_back(std::move(cand));
    }
    return out;
  }

  // Best of `cands`, leftmost (earliest) on ties.
  static const Candidate* argmax(const std::vector<Candidate>& cands) {
    const Candidate* best = nullptr;
    for (const auto& c : cands) {
      if (best == nullptr || c.score > best->score) best = &c;
    }
    return best;
  }

  std::vector<UnitSpan> window_of(const std::vector<std::vector<UnitSpan>>& rs, const Position& p) const {
    const auto& run = rs[p.run];
    return {run.begin() + static_cast<std::ptrdiff_t>(p.first),
            run.begin() + static_cast<std::ptrdiff_t>(p.first + p.count)};
  }

  // One round; false when nothing could be evaluated.
  bool step(std::size_t round) {
    const auto rs = runs();
    const auto pos = positions();
    if (pos.empty()) return false;
    const std::int64_t round_salt = static_cast<std::int64_t>(round) * 100000;
    evaluated_.clear();

    // Screening: one infill per position.
    std::vector<Candidate> screened;
    std::vector<std::size_t> screened_pos;
    for (std::size_t p = 0; p < pos.size(); ++p) {
      if (!meter_->can_afford(1 + eval_cost())) break;
      auto c = try_window(window_of(rs, pos[p]), 1, round_salt + static_cast<std::int64_t>(p) * 100);
      if (!c.empty()) {
        screened.push_back(std::move(c.front()));
        screened_pos.push_back(p);
      }
    }
    const Candidate* best_screen = argmax(screened);
    if (best_screen == nullptr) return false;

    std::vector<Candidate> expanded;
    if (!myopic_ && best_screen->score < params_.threshold) {
      const Position bp = pos[screened_pos[static_cast<std::size_t>(best_screen - screened.data())]];
      const auto& run = rs[bp.run];
      std::vector<Position> shifts{bp};
      if (bp.first > 0) shifts.push_back({bp.run, bp.first - 1, bp.count});
      if (bp.first + bp.count < run.size()) shifts.push_back({bp.run, bp.first + 1, bp.count});
      for (std::size_t s = 0; s < shifts.size(); ++s) {
        const std::int64_t per = 1 + eval_cost();
        const auto rem = meter_->remaining();
        int n = params_.infills;
        if (rem) n = static_cast<int>(std::min<std::int64_t>(n, *rem / per));
        if (n <= 0) break;
        auto c = try_window(window_of(rs, shifts[s]), n, round_salt + 50000 + static_cast<std::int64_t>(s) * 100);
        for (auto& x : c) expanded.push_back(std::move(x));
      }
    }

    std::vector<Candidate> all = std::move(screened);
    for (auto& x : expanded) all.push_back(std::move(x));
    const Candidate& best = *argmax(all);

    if (best.score > result_.contrast_score) {
      auto edits = committed_;
      edits.push_back(best.edit);
      result_.contrast_score = best.score;
      result_.contrastive_prompt = best.prompt;
      result_.contrastive_response = best.response;
      result_.edits = std::move(edits);
    }
    result_.best_history.push_back(result_.contrast_score);
    if (best.score >= params_.threshold) {
      result_.succeeded = true;
      return true;
    }
    commit(best);
    return true;
  }

  void commit(const Candidate& c) {
    const std::size_t start = c.edit.window.front().start;
    const std::size_t end = c.edit.window.back().end;
    const std::size_t new_end = start + c.edit.replacement.size();
    for (auto& f : frozen_) {
      if (f.start >= end) {
        f.start = f.start - end + new_end;
        f.end = f.end - end + new_end;
      }
    }
    frozen_.push_back({start, new_end});
    edited_words_ += c.edit.window.size();
    committed_.push_back(c.edit);
    current_ = c.prompt;
  }

  LanguageModel& model_;
  LanguageModel& infiller_;
  LanguageModel& judge_;
  ScalarizerSpec scalarizer_;
  CellParams params_;
  std::uint64_t seed_;
  bool myopic_;
  std::size_t span_;
  BudgetMeter* meter_ = nullptr;

  ContrastiveExplanation result_;
  std::string current_;
  std::vector<Edit> committed_;
  std::vector<FrozenRange> frozen_;
  std::set<std::string> evaluated_;  // candidate prompts scored this round
  std::size_t edited_words_ = 0;
  std::size_t original_words_ = 0;
};

}  // namespace

ContrastiveExplanation cell_explain(std::string_view prompt, const Backends& backends, const ScalarizerSpec& scalarizer,
                                    const CellParams& params, std::uint64_t seed) {
  return Search(prompt, backends, scalarizer, params, seed, false).run();
}

ContrastiveExplanation mcell_explain(std::string_view prompt, const Backends& backends, const ScalarizerSpec& scalarizer,
                                     const CellParams& params, std::uint64_t seed) {
  return Search(prompt, backends, scalarizer, params, seed, true).run();
}

}  // namespace icx::cell
