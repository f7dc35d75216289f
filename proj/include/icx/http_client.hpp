#pragma once

#include <atomic>
#include <chrono>
#include <optional>
#include <string>

#include "icx/model_client.hpp"

namespace icx {

struct HttpClientOptions {
  /// Base URL, e.g. "http://127.0.0.1:8080" or "https://host/prefix".
  std::string endpoint;
  std::string model = "default";
  std::optional<std::string> api_key;
  /// Declared capabilities; the client narrows them when the backend answers
  /// 404 or omits log-probabilities.
  BackendCapabilities declared{};
  int max_retries = 1;
  std::chrono::milliseconds retry_delay{200};
  std::chrono::seconds timeout{60};
};

/// Reads a bearer token from the named environment variable, if set and non-empty.
std::optional<std::string> api_key_from_env(const std::string& var = "ICX_API_KEY");

/// Client for an OpenAI-compatible server:
///   generate       -> POST /v1/chat/completions
///   score_sequence -> POST /v1/completions with echo=true, logprobs
///   embed          -> POST /v1/embeddings
class OpenAIClient final : public LanguageModel {
 public:
  explicit OpenAIClient(HttpClientOptions options);

  BackendCapabilities capabilities() const override;
  std::string name() const override { return options_.endpoint; }

 protected:
  GeneratedOutput do_generate(const ModelInput& input, const GenParams& params) override;
  SequenceScore do_score(const ModelInput& input, std::string_view continuation) override;
  std::vector<double> do_embed(std::string_view text) override;

 private:
  std::string post(const std::string& path, const std::string& body);

  HttpClientOptions options_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  std::atomic<bool> score_ok_{true};
  std::atomic<bool> embed_ok_{true};
};

}  // namespace icx
