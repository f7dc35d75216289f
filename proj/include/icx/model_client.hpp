#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace icx {

enum class Role { system, user, assistant };

std::string_view role_name(Role role) noexcept;
Role parse_role(std::string_view name);

struct ChatMessage {
  Role role = Role::user;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

/// How a raw string should be wrapped for a chat endpoint.
struct ChatTemplate {
  std::optional<std::string> system_prompt;
  Role role = Role::user;
};

/// Either a plain prompt or an ordered chat transcript. Exactly one variant is held.
class ModelInput {
 public:
  static ModelInput plain(std::string text) { return ModelInput(std::move(text)); }
  static ModelInput chat(std::vector<ChatMessage> messages) { return ModelInput(std::move(messages)); }

  bool is_plain() const noexcept { return std::holds_alternative<std::string>(value_); }
  const std::string& plain_text() const { return std::get<std::string>(value_); }
  const std::vector<ChatMessage>& messages() const { return std::get<std::vector<ChatMessage>>(value_); }

  /// Messages to send to a chat endpoint; a plain prompt becomes one user message.
  std::vector<ChatMessage> as_messages() const;

  /// Prompt text for a completions endpoint; message contents joined by '\n'.
  std::string as_prompt() const;

  bool operator==(const ModelInput&) const = default;

 private:
  explicit ModelInput(std::string text) : value_(std::move(text)) {}
  explicit ModelInput(std::vector<ChatMessage> messages) : value_(std::move(messages)) {}

  std::variant<std::string, std::vector<ChatMessage>> value_;
};

/// Wraps user text for a backend. Throws EmptyInput on "".
ModelInput convert_input(std::string_view raw, const std::optional<ChatTemplate>& tmpl = std::nullopt);

struct GenParams {
  int max_tokens = 256;
  double temperature = 0.0;
  std::optional<std::int64_t> seed;
  bool logprobs = false;
};

struct GeneratedOutput {
  std::string text;
  std::optional<std::vector<std::string>> tokens;
  std::optional<std::vector<double>> token_logprobs;  // natural log, aligned with tokens
};

/// Checks the GeneratedOutput invariants; throws ProtocolError on violation.
void validate(const GeneratedOutput& out);

struct BackendCapabilities {
  bool can_generate = true;
  bool can_score = true;
  bool can_embed = true;
};

struct SequenceScore {
  double total_logprob = 0.0;
  std::vector<std::pair<std::string, double>> per_token;
};

/// Hard-capped query counter shared by every client participating in one
/// explanation. charge() either reserves a slot or throws BudgetExhausted.
class BudgetMeter {
 public:
  explicit BudgetMeter(std::optional<std::int64_t> cap = std::nullopt) : cap_(cap) {}

  void charge();
  std::int64_t used() const noexcept { return used_.load(); }
  std::optional<std::int64_t> cap() const noexcept { return cap_; }
  /// Remaining queries, or nullopt when uncapped.
  std::optional<std::int64_t> remaining() const noexcept;
  /// True if `n` more queries fit under the cap.
  bool can_afford(std::int64_t n) const noexcept;

 private:
  std::optional<std::int64_t> cap_;
  std::atomic<std::int64_t> used_{0};
};

/// A text-generation backend. The public calls are the single charge point for
/// the attached budget meter; implementations override the do_* hooks.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  virtual BackendCapabilities capabilities() const = 0;

  /// Human-readable backend identifier (endpoint URL for HTTP backends).
  virtual std::string name() const = 0;

  GeneratedOutput generate(const ModelInput& input, const GenParams& params);

  /// Log-probability of `continuation` following `input`, over the backend's
  /// own tokenization. Empty continuation costs no query.
  SequenceScore score_sequence(const ModelInput& input, std::string_view continuation);

  std::vector<double> embed(std::string_view text);

  void attach_meter(std::shared_ptr<BudgetMeter> meter) { meter_ = std::move(meter); }
  const std::shared_ptr<BudgetMeter>& meter() const noexcept { return meter_; }

  /// Number of requests actually sent to the backend (including retries).
  std::int64_t requests_sent() const noexcept { return requests_.load(); }

 protected:
  virtual GeneratedOutput do_generate(const ModelInput& input, const GenParams& params) = 0;
  virtual SequenceScore do_score(const ModelInput& input, std::string_view continuation) = 0;
  virtual std::vector<double> do_embed(std::string_view text) = 0;

  void count_request() noexcept { requests_.fetch_add(1); }

 private:
  void charge();

  std::shared_ptr<BudgetMeter> meter_;
  std::atomic<std::int64_t> requests_{0};
};

}  // namespace icx
