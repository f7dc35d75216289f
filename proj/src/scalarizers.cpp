#include "icx/scalarizers.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <vector>

#include "icx/errors.hpp"
#include "icx/kernels.hpp"
#include "icx/prompts.hpp"
#include "icx/text.hpp"

namespace icx {

ScalarizerSpec ScalarizerSpec::parse(std::string_view name) {
  ScalarizerSpec s;
  if (name == "logprob") {
    s.kind = Kind::logprob;
  } else if (name == "text-sim:bleu") {
    s.kind = Kind::text_sim;
    s.metric = TextMetric::bleu;
  } else if (name == "text-sim:unigram-f1") {
    s.kind = Kind::text_sim;
    s.metric = TextMetric::unigram_f1;
  } else if (name == "text-sim:embed-cosine") {
    s.kind = Kind::text_sim;
    s.metric = TextMetric::embed_cosine;
  } else if (name == "preference") {
    s.kind = Kind::preference;
  } else if (name == "contradiction") {
    s.kind = Kind::contradiction;
  } else if (name == "nli") {
    s.kind = Kind::nli;
  } else if (name == "cell-bleu") {
    s.kind = Kind::cell_bleu;
  } else {
    throw PreconditionError("unknown scalarizer '" + std::string(name) + "'");
  }
  return s;
}

std::string ScalarizerSpec::name() const {
  switch (kind) {
    case Kind::logprob: return "logprob";
    case Kind::text_sim:
      switch (metric) {
        case TextMetric::bleu: return "text-sim:bleu";
        case TextMetric::unigram_f1: return "text-sim:unigram-f1";
        case TextMetric::embed_cosine: return "text-sim:embed-cosine";
      }
      break;
    case Kind::preference: return "preference";
    case Kind::contradiction: return "contradiction";
    case Kind::nli: return "nli";
    case Kind::cell_bleu: return "cell-bleu";
  }
  return "logprob";
}

namespace {

using NgramCounts = std::map<std::vector<std::string>, int>;

NgramCounts ngrams(const std::vector<std::string>& toks, std::size_t n) {
  NgramCounts out;
  if (toks.size() < n) return out;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    ++out[std::vector<std::string>(toks.begin() + static_cast<std::ptrdiff_t>(i),
                                   toks.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return out;
}

// Clipped matches and candidate n-gram total.
std::pair<int, int> clipped(const std::vector<std::string>& ref, const std::vector<std::string>& cand,
                            std::size_t n) {
  const NgramCounts r = ngrams(ref, n);
  const NgramCounts c = ngrams(cand, n);
  int match = 0, total = 0;
  for (const auto& [g, cnt] : c) {
    total += cnt;
    const auto it = r.find(g);
    if (it != r.end()) match += std::min(cnt, it->second);
  }
  return {match, total};
}

}  // namespace

double bleu(std::string_view reference, std::string_view candidate) {
  const auto ref = whitespace_split(reference);
  const auto cand = whitespace_split(candidate);
  if (cand.empty()) return ref.empty() ? 1.0 : 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    auto [match, total] = clipped(ref, cand, n);
    double p;
    if (n == 1) {
      if (match == 0) return 0.0;
      p = static_cast<double>(match) / total;
    } else {
      p = (match + 1.0) / (total + 1.0);
    }
    log_sum += std::log(p);
  }
  const double bp = std::min(1.0, std::exp(1.0 - static_cast<double>(ref.size()) / cand.size()));
  return bp * std::exp(log_sum / 4.0);
}

double unigram_f1(std::string_view reference, std::string_view candidate) {
  const auto ref = whitespace_split(reference);
  const auto cand = whitespace_split(candidate);
  if (ref.empty() && cand.empty()) return 1.0;
  if (ref.empty() || cand.empty()) return 0.0;
  const auto [match, total] = clipped(ref, cand, 1);
  if (match == 0) return 0.0;
  const double precision = static_cast<double>(match) / total;
  const double recall = static_cast<double>(match) / ref.size();
  return 2.0 * precision * recall / (precision + recall);
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw ProtocolError("embedding dimensions differ");
  const double na = std::sqrt(kernels::dot(a, a));
  const double nb = std::sqrt(kernels::dot(b, b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(kernels::dot(a, b) / (na * nb), -1.0, 1.0);
}

double text_similarity(std::string_view original_output, std::string_view new_output, TextMetric metric,
                       LanguageModel* embedder) {
  switch (metric) {
    case TextMetric::bleu:
      return bleu(original_output, new_output);
    case TextMetric::unigram_f1:
      return unigram_f1(original_output, new_output);
    case TextMetric::embed_cosine: {
      if (embedder == nullptr) throw UnsupportedCapability("embed-cosine needs an embedding backend");
      const auto a = embedder->embed(original_output);
      const auto b = embedder->embed(new_output);
      return (1.0 + cosine(a, b)) / 2.0;
    }
  }
  return 0.0;
}

double logprob_scalarize(const ModelInput& perturbed, std::string_view original_output, LanguageModel& client) {
  const SequenceScore s = client.score_sequence(perturbed, original_output);
  return s.total_logprob / static_cast<double>(std::max<std::size_t>(1, s.per_token.size()));
}

char parse_ab(std::string_view reply) {
  const std::string_view t = trim(reply);
  if (!t.empty()) {
    const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(t.front())));
    if (c == 'A' || c == 'B') return c;
  }
  throw JudgeParseError("judge reply '" + std::string(reply) + "' is neither A nor B");
}

bool parse_yes_no(std::string_view reply) {
  const std::string_view t = trim(reply);
  if (!t.empty()) {
    const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(t.front())));
    if (c == 'y') return true;
    if (c == 'n') return false;
  }
  throw JudgeParseError("judge reply '" + std::string(reply) + "' is neither yes nor no");
}

namespace {

std::string ask(LanguageModel& judge, const std::string& prompt) {
  GenParams gp;
  gp.max_tokens = 8;
  gp.temperature = 0.0;
  gp.seed = 0;
  return judge.generate(ModelInput::plain(prompt), gp).text;
}

}  // namespace

double preference_score(std::string_view prompt, std::string_view response_orig, std::string_view response_pert,
                        LanguageModel& judge) {
  int orig_wins = 0;
  if (parse_ab(ask(judge, prompts::preference(prompt, response_orig, response_pert))) == 'A') ++orig_wins;
  if (parse_ab(ask(judge, prompts::preference(prompt, response_pert, response_orig))) == 'B') ++orig_wins;
  return orig_wins / 2.0;
}

double contradiction_score(std::string_view response_orig, std::string_view response_pert, LanguageModel& judge) {
  return parse_yes_no(ask(judge, prompts::contradiction(response_orig, response_pert))) ? 1.0 : 0.0;
}

double nli_score(std::string_view response_orig, std::string_view response_pert, LanguageModel& judge) {
  return parse_yes_no(ask(judge, prompts::entailment(response_orig, response_pert))) ? 0.0 : 1.0;
}

double cell_bleu_score(std::string_view response_orig, std::string_view response_pert, double edit_fraction,
                       double lambda_edit) {
  return (1.0 - bleu(response_orig, response_pert)) - lambda_edit * edit_fraction;
}

}  // namespace icx
