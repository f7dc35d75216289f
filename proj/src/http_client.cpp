#include "icx/http_client.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "icx/errors.hpp"
#include "icx/text.hpp"

namespace icx {

using nlohmann::json;

std::optional<std::string> api_key_from_env(const std::string& var) {
  const char* v = std::getenv(var.c_str());
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

OpenAIClient::OpenAIClient(HttpClientOptions options) : options_(std::move(options)) {
  std::string ep = options_.endpoint;
  while (!ep.empty() && ep.back() == '/') ep.pop_back();
  const auto scheme = ep.find("://");
  if (scheme == std::string::npos) {
    throw PreconditionError("endpoint must start with http:// or https://: '" + ep + "'");
  }
  const auto slash = ep.find('/', scheme + 3);
  scheme_host_port_ = ep.substr(0, slash);
  if (slash != std::string::npos) path_prefix_ = ep.substr(slash);
  options_.endpoint = ep;
  score_ok_ = options_.declared.can_score;
  embed_ok_ = options_.declared.can_embed;
}

BackendCapabilities OpenAIClient::capabilities() const {
  return {options_.declared.can_generate, score_ok_.load(), embed_ok_.load()};
}

std::string OpenAIClient::post(const std::string& path, const std::string& body) {
  std::string last_error;
  for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(options_.retry_delay);
    httplib::Client cli(scheme_host_port_);
    cli.set_connection_timeout(options_.timeout);
    cli.set_read_timeout(options_.timeout);
    cli.set_write_timeout(options_.timeout);
    httplib::Headers headers;
    if (options_.api_key) headers.emplace("Authorization", "Bearer " + *options_.api_key);
    count_request();
    auto res = cli.Post(path_prefix_ + path, headers, body, "application/json");
    if (!res) {
      last_error = "request to " + options_.endpoint + path + " failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status) + " from " + options_.endpoint + path;
      continue;
    }
    if (res->status == 404) {
      throw UnsupportedCapability(options_.endpoint + path + " is not served (HTTP 404)");
    }
    if (res->status >= 400) {
      throw ProtocolError("HTTP " + std::to_string(res->status) + " from " + options_.endpoint +
                          path + ": " + res->body.substr(0, 200));
    }
    return res->body;
  }
  throw TransportError(last_error);
}

namespace {

json parse_body(const std::string& body) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ProtocolError("response body is not a JSON object");
  return j;
}

const json& first_choice(const json& j) {
  if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
    throw ProtocolError("response has no choices");
  }
  const json& c = j["choices"][0];
  if (!c.is_object()) throw ProtocolError("choice is not an object");
  return c;
}

}  // namespace

GeneratedOutput OpenAIClient::do_generate(const ModelInput& input, const GenParams& params) {
  json req;
  req["model"] = options_.model;
  json msgs = json::array();
  for (const auto& m : input.as_messages()) {
    msgs.push_back({{"role", std::string(role_name(m.role))}, {"content", m.content}});
  }
  req["messages"] = std::move(msgs);
  req["max_tokens"] = params.max_tokens;
  req["temperature"] = params.temperature;
  if (params.seed) req["seed"] = *params.seed;
  if (params.logprobs) req["logprobs"] = true;

  const json j = parse_body(post("/v1/chat/completions", req.dump()));
  const json& choice = first_choice(j);
  if (!choice.contains("message") || !choice["message"].is_object()) {
    throw ProtocolError("choice has no message");
  }
  const json& content = choice["message"].value("content", json());
  GeneratedOutput out;
  if (content.is_string()) {
    out.text = content.get<std::string>();
  } else if (!content.is_null()) {
    throw ProtocolError("message content is not a string");
  }
  if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
      choice["logprobs"].contains("content") && choice["logprobs"]["content"].is_array()) {
    std::vector<std::string> toks;
    std::vector<double> lps;
    for (const auto& e : choice["logprobs"]["content"]) {
      if (!e.is_object() || !e.contains("token") || !e["token"].is_string() ||
          !e.contains("logprob") || !e["logprob"].is_number()) {
        throw ProtocolError("malformed logprobs entry");
      }
      toks.push_back(e["token"].get<std::string>());
      lps.push_back(e["logprob"].get<double>());
    }
    out.tokens = std::move(toks);
    out.token_logprobs = std::move(lps);
  }
  return out;
}

SequenceScore OpenAIClient::do_score(const ModelInput& input, std::string_view continuation) {
  const std::string prefix = input.as_prompt();
  const std::string sep = (prefix.empty() || is_space(prefix.back())) ? "" : " ";
  const std::string prompt = prefix + sep + std::string(continuation);
  const std::size_t region_begin = prefix.size() + sep.size();
  const std::size_t region_end = prompt.size();

  json req;
  req["model"] = options_.model;
  req["prompt"] = prompt;
  req["echo"] = true;
  req["logprobs"] = 1;
  req["max_tokens"] = 1;
  req["temperature"] = 0.0;

  std::string body;
  try {
    body = post("/v1/completions", req.dump());
  } catch (const UnsupportedCapability&) {
    score_ok_ = false;
    throw;
  }
  const json j = parse_body(body);
  const json& choice = first_choice(j);
  const json lp = choice.value("logprobs", json());
  if (!lp.is_object() || !lp.contains("tokens") || !lp.contains("token_logprobs") ||
      !lp.contains("text_offset")) {
    score_ok_ = false;
    throw UnsupportedCapability(options_.endpoint + " returned no prompt log-probabilities");
  }
  const json& toks = lp["tokens"];
  const json& lps = lp["token_logprobs"];
  const json& offs = lp["text_offset"];
  if (!toks.is_array() || !lps.is_array() || !offs.is_array() || toks.size() != lps.size() ||
      toks.size() != offs.size()) {
    throw ProtocolError("logprobs arrays are malformed or misaligned");
  }
  SequenceScore s;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (!toks[i].is_string() || !offs[i].is_number_integer()) {
      throw ProtocolError("malformed token or offset in logprobs");
    }
    const std::string tok = toks[i].get<std::string>();
    const auto off = offs[i].get<std::int64_t>();
    if (off < 0) throw ProtocolError("negative text offset");
    const auto begin = static_cast<std::size_t>(off);
    const std::size_t end = begin + tok.size();
    if (!(end > region_begin && begin < region_end)) continue;
    if (!lps[i].is_number()) throw ProtocolError("missing log-probability inside the scored region");
    s.per_token.emplace_back(tok, lps[i].get<double>());
  }
  return s;
}

std::vector<double> OpenAIClient::do_embed(std::string_view text) {
  json req;
  req["model"] = options_.model;
  req["input"] = std::string(text);
  std::string body;
  try {
    body = post("/v1/embeddings", req.dump());
  } catch (const UnsupportedCapability&) {
    embed_ok_ = false;
    throw;
  }
  const json j = parse_body(body);
  if (!j.contains("data") || !j["data"].is_array() || j["data"].empty() ||
      !j["data"][0].is_object() || !j["data"][0].contains("embedding") ||
      !j["data"][0]["embedding"].is_array()) {
    throw ProtocolError("embeddings response has no data[0].embedding");
  }
  std::vector<double> v;
  for (const auto& x : j["data"][0]["embedding"]) {
    if (!x.is_number()) throw ProtocolError("non-numeric embedding component");
    v.push_back(x.get<double>());
  }
  if (v.empty()) throw ProtocolError("empty embedding");
  return v;
}

}  // namespace icx
