#include "icx/model_client.hpp"

#include <cmath>

#include "icx/errors.hpp"

namespace icx {

std::string_view role_name(Role role) noexcept {
  switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

Role parse_role(std::string_view name) {
  if (name == "system") return Role::system;
  if (name == "user") return Role::user;
  if (name == "assistant") return Role::assistant;
  throw ProtocolError("unknown chat role '" + std::string(name) + "'");
}

std::vector<ChatMessage> ModelInput::as_messages() const {
  if (is_plain()) return {ChatMessage{Role::user, plain_text()}};
  return messages();
}

std::string ModelInput::as_prompt() const {
  if (is_plain()) return plain_text();
  std::string out;
  for (std::size_t i = 0; i < messages().size(); ++i) {
    if (i > 0) out += '\n';
    out += messages()[i].content;
  }
  return out;
}

ModelInput convert_input(std::string_view raw, const std::optional<ChatTemplate>& tmpl) {
  if (raw.empty()) throw EmptyInput("input text is empty");
  if (!tmpl) return ModelInput::plain(std::string(raw));
  std::vector<ChatMessage> messages;
  if (tmpl->system_prompt && !tmpl->system_prompt->empty()) {
    messages.push_back({Role::system, *tmpl->system_prompt});
  }
  messages.push_back({tmpl->role, std::string(raw)});
  return ModelInput::chat(std::move(messages));
}

void validate(const GeneratedOutput& out) {
  if (out.token_logprobs) {
    if (!out.tokens) throw ProtocolError("token_logprobs present without tokens");
    if (out.tokens->size() != out.token_logprobs->size()) {
      throw ProtocolError("tokens and token_logprobs differ in length");
    }
    for (double lp : *out.token_logprobs) {
      if (!(lp <= 0.0) || std::isnan(lp)) throw ProtocolError("log-probability above zero");
    }
  }
}

void BudgetMeter::charge() {
  if (!cap_) {
    used_.fetch_add(1);
    return;
  }
  std::int64_t cur = used_.load();
  do {
    if (cur >= *cap_) {
      throw BudgetExhausted("query budget of " + std::to_string(*cap_) + " exhausted");
    }
  } while (!used_.compare_exchange_weak(cur, cur + 1));
}

std::optional<std::int64_t> BudgetMeter::remaining() const noexcept {
  if (!cap_) return std::nullopt;
  return *cap_ - used_.load();
}

bool BudgetMeter::can_afford(std::int64_t n) const noexcept {
  return !cap_ || used_.load() + n <= *cap_;
}

void LanguageModel::charge() {
  if (meter_) meter_->charge();
}

GeneratedOutput LanguageModel::generate(const ModelInput& input, const GenParams& params) {
  if (!capabilities().can_generate) throw UnsupportedCapability(name() + " cannot generate");
  charge();
  GeneratedOutput out = do_generate(input, params);
  validate(out);
  return out;
}

SequenceScore LanguageModel::score_sequence(const ModelInput& input, std::string_view continuation) {
  if (!capabilities().can_score) {
    throw UnsupportedCapability(name() + " does not return prompt log-probabilities");
  }
  if (continuation.empty()) return {};
  charge();
  SequenceScore s = do_score(input, continuation);
  double total = 0.0;
  for (const auto& [tok, lp] : s.per_token) {
    if (!(lp <= 0.0)) throw ProtocolError("log-probability above zero for token '" + tok + "'");
    total += lp;
  }
  s.total_logprob = total;
  return s;
}

std::vector<double> LanguageModel::embed(std::string_view text) {
  if (!capabilities().can_embed) throw UnsupportedCapability(name() + " does not serve embeddings");
  charge();
  return do_embed(text);
}

}  // namespace icx
