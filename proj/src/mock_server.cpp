#include "icx/mock_server.hpp"

#include <cmath>
#include <sys/socket.h>
#include <unordered_set>

#include <httplib.h>
#include <json.hpp>

#include "icx/errors.hpp"
#include "icx/prompts.hpp"
#include "icx/segmenter.hpp"
#include "icx/text.hpp"

namespace icx::mock {

using nlohmann::json;

double mock_logprob(std::string_view token) noexcept {
  const std::uint64_t h = fnv1a64(token);
  return -(1.0 + static_cast<double>(h % 1000) / 1000.0);
}

std::vector<double> sequence_logprobs(const std::vector<std::string>& tokens) {
  std::vector<double> out;
  out.reserve(tokens.size());
  std::unordered_set<std::string> seen;
  for (const auto& t : tokens) {
    double lp = mock_logprob(t);
    if (!seen.contains(t)) lp -= kNoveltyPenalty;
    seen.insert(t);
    out.push_back(lp);
  }
  return out;
}

std::vector<double> mock_embedding(std::string_view text, std::uint64_t seed) {
  std::uint64_t state = fnv1a64(text) ^ seed;
  std::vector<double> v(kEmbeddingDim);
  double norm = 0.0;
  for (auto& x : v) {
    // splitmix64
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
    x = static_cast<double>(z >> 11) * 0x1.0p-53 * 2.0 - 1.0;
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

char mock_judge(const JudgeRule& rule, std::string_view a, std::string_view b) {
  switch (rule.kind) {
    case JudgeRule::Kind::prefer_longer:
      return b.size() > a.size() ? 'B' : 'A';
    case JudgeRule::Kind::prefer_containing: {
      const bool in_a = a.find(rule.arg) != std::string_view::npos;
      const bool in_b = b.find(rule.arg) != std::string_view::npos;
      return (in_b && !in_a) ? 'B' : 'A';
    }
    case JudgeRule::Kind::fixed:
      return 'A';
  }
  return 'A';
}

MockBehavior MockBehavior::parse(std::string_view spec) {
  MockBehavior b;
  auto rest_after = [&](std::string_view prefix) { return spec.substr(prefix.size()); };
  if (spec == "echo") {
    b.kind = Kind::echo;
  } else if (spec.starts_with("copy-sentence:")) {
    b.kind = Kind::copy_sentence;
    const std::string k(rest_after("copy-sentence:"));
    try {
      std::size_t used = 0;
      const long v = std::stol(k, &used);
      if (used != k.size() || v < 1) throw std::invalid_argument(k);
      b.sentence = static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      throw PreconditionError("copy-sentence expects a positive integer, got '" + k + "'");
    }
  } else if (spec.starts_with("trigger:")) {
    b.kind = Kind::trigger;
    const std::string_view r = rest_after("trigger:");
    const auto c1 = r.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : r.find(',', c1 + 1);
    if (c2 == std::string_view::npos || c1 == 0) {
      throw PreconditionError("trigger expects WORD,HIT,MISS, got '" + std::string(r) + "'");
    }
    b.trigger_word = std::string(r.substr(0, c1));
    b.on_hit = std::string(r.substr(c1 + 1, c2 - c1 - 1));
    b.on_miss = std::string(r.substr(c2 + 1));
  } else if (spec.starts_with("judge:")) {
    b.kind = Kind::judge;
    const std::string_view r = rest_after("judge:");
    if (r == "prefer-longer") {
      b.judge = {JudgeRule::Kind::prefer_longer, ""};
    } else if (r.starts_with("prefer-containing:") && r.size() > 18) {
      b.judge = {JudgeRule::Kind::prefer_containing, std::string(r.substr(18))};
    } else if (r == "fixed-yes") {
      b.judge = {JudgeRule::Kind::fixed, "yes"};
    } else if (r == "fixed-no") {
      b.judge = {JudgeRule::Kind::fixed, "no"};
    } else if (r.starts_with("fixed:")) {
      b.judge = {JudgeRule::Kind::fixed, std::string(r.substr(6))};
    } else {
      throw PreconditionError("unknown judge rule '" + std::string(r) + "'");
    }
  } else {
    throw PreconditionError("unknown mock behavior '" + std::string(spec) + "'");
  }
  return b;
}

std::string MockBehavior::spec() const {
  switch (kind) {
    case Kind::echo: return "echo";
    case Kind::copy_sentence: return "copy-sentence:" + std::to_string(sentence);
    case Kind::trigger: return "trigger:" + trigger_word + "," + on_hit + "," + on_miss;
    case Kind::judge:
      switch (judge.kind) {
        case JudgeRule::Kind::prefer_longer: return "judge:prefer-longer";
        case JudgeRule::Kind::prefer_containing: return "judge:prefer-containing:" + judge.arg;
        case JudgeRule::Kind::fixed: return "judge:fixed:" + judge.arg;
      }
  }
  return "echo";
}

namespace {

// Text between "<tag>\n" and the last "\n</tag>".
std::string_view between(std::string_view prompt, std::string_view tag) {
  const std::string open = "<" + std::string(tag) + ">\n";
  const std::string close = "\n</" + std::string(tag) + ">";
  const auto b = prompt.find(open);
  const auto e = prompt.rfind(close);
  if (b == std::string_view::npos || e == std::string_view::npos || e < b + open.size()) return {};
  return prompt.substr(b + open.size(), e - b - open.size());
}

bool differ(const JudgeRule& rule, std::string_view a, std::string_view b) {
  if (rule.kind == JudgeRule::Kind::prefer_containing) {
    return (a.find(rule.arg) != std::string_view::npos) != (b.find(rule.arg) != std::string_view::npos);
  }
  return a != b;
}

std::string judge_reply(const JudgeRule& rule, std::string_view prompt) {
  const bool pref = prompt.find(prompts::kPreferenceQuestion) != std::string_view::npos;
  const bool contra = prompt.find(prompts::kContradictionQuestion) != std::string_view::npos;
  const bool entail = prompt.find(prompts::kEntailmentQuestion) != std::string_view::npos;
  if (!pref && !contra && !entail) return "";
  if (rule.kind == JudgeRule::Kind::fixed) return rule.arg;
  if (pref) {
    return std::string(1, mock_judge(rule, between(prompt, "response_a"), between(prompt, "response_b")));
  }
  const bool d = differ(rule, between(prompt, "statement_a"), between(prompt, "statement_b"));
  if (contra) return d ? "yes" : "no";
  return d ? "no" : "yes";
}

}  // namespace

std::string respond(const MockBehavior& behavior, std::string_view prompt) {
  switch (behavior.kind) {
    case MockBehavior::Kind::echo:
      return std::string(prompt);
    case MockBehavior::Kind::copy_sentence: {
      const auto s = segment(prompt, Level::sentence);
      if (behavior.sentence > s.size()) return "";
      return s[behavior.sentence - 1].text;
    }
    case MockBehavior::Kind::trigger:
      return prompt.find(behavior.trigger_word) != std::string_view::npos ? behavior.on_hit
                                                                          : behavior.on_miss;
    case MockBehavior::Kind::judge:
      return judge_reply(behavior.judge, prompt);
  }
  return "";
}

std::string truncate_tokens(std::string_view text, int max_tokens) {
  const auto toks = whitespace_tokens(text);
  if (max_tokens < 0 || toks.size() <= static_cast<std::size_t>(max_tokens)) return std::string(text);
  if (max_tokens == 0) return "";
  return std::string(text.substr(0, toks[static_cast<std::size_t>(max_tokens) - 1].end()));
}

struct MockServer::Impl {
  MockOptions options;
  httplib::Server server;
  std::thread thread;
  std::atomic<std::int64_t> requests{0};

  static void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void error(httplib::Response& res, int status, const std::string& msg) {
    reply(res, status, {{"error", {{"message", msg}, {"type", "invalid_request_error"}}}});
  }

  // Every request body must be a JSON object; returns false after replying 400.
  static bool parse(const httplib::Request& req, httplib::Response& res, json& out) {
    out = json::parse(req.body, nullptr, false);
    if (out.is_discarded() || !out.is_object()) {
      error(res, 400, "body is not a JSON object");
      return false;
    }
    return true;
  }

  static int max_tokens_of(const json& body) {
    if (body.contains("max_tokens") && body["max_tokens"].is_number_integer()) {
      return body["max_tokens"].get<int>();
    }
    return -1;
  }

  void chat(const httplib::Request& req, httplib::Response& res) {
    json body;
    if (!parse(req, res, body)) return;
    if (!body.contains("messages") || !body["messages"].is_array()) {
      return error(res, 400, "messages must be an array");
    }
    std::string prompt;
    bool first = true;
    for (const auto& m : body["messages"]) {
      if (!m.is_object() || !m.contains("content") || !m["content"].is_string()) {
        return error(res, 400, "each message needs string content");
      }
      if (!first) prompt += '\n';
      prompt += m["content"].get<std::string>();
      first = false;
    }
    const std::string text = truncate_tokens(respond(options.behavior, prompt), max_tokens_of(body));
    json choice = {{"index", 0},
                   {"message", {{"role", "assistant"}, {"content", text}}},
                   {"finish_reason", "stop"}};
    if (body.value("logprobs", false)) {
      auto ctx = whitespace_split(prompt);
      const auto out_toks = whitespace_split(text);
      const std::size_t n_prompt = ctx.size();
      ctx.insert(ctx.end(), out_toks.begin(), out_toks.end());
      const auto lps = sequence_logprobs(ctx);
      json content = json::array();
      for (std::size_t i = 0; i < out_toks.size(); ++i) {
        content.push_back({{"token", out_toks[i]}, {"logprob", lps[n_prompt + i]}, {"top_logprobs", json::array()}});
      }
      choice["logprobs"] = {{"content", content}};
    } else {
      choice["logprobs"] = nullptr;
    }
    reply(res, 200,
          {{"id", "chatcmpl-mock"},
           {"object", "chat.completion"},
           {"model", body.value("model", "mock")},
           {"choices", json::array({choice})}});
  }

  void completions(const httplib::Request& req, httplib::Response& res) {
    json body;
    if (!parse(req, res, body)) return;
    if (!body.contains("prompt") || !body["prompt"].is_string()) {
      return error(res, 400, "prompt must be a string");
    }
    const std::string prompt = body["prompt"].get<std::string>();
    const bool echo = body.value("echo", false);
    json choice = {{"index", 0}, {"finish_reason", "stop"}};
    // With echo the mock returns the prompt alone, as if max_tokens were 0.
    std::string text = echo ? prompt : truncate_tokens(respond(options.behavior, prompt), max_tokens_of(body));
    choice["text"] = text;
    if (body.contains("logprobs") && body["logprobs"].is_number_integer()) {
      std::vector<TextToken> toks;
      std::vector<std::string> ctx;
      std::size_t skip = 0;
      if (echo) {
        toks = whitespace_tokens(prompt);
      } else {
        const auto p = whitespace_split(prompt);
        ctx = p;
        skip = p.size();
        toks = whitespace_tokens(text);
      }
      for (const auto& t : toks) ctx.push_back(t.text);
      const auto lps = sequence_logprobs(ctx);
      json tokens = json::array(), token_logprobs = json::array(), offsets = json::array();
      for (std::size_t i = 0; i < toks.size(); ++i) {
        tokens.push_back(toks[i].text);
        token_logprobs.push_back(lps[skip + i]);
        offsets.push_back(toks[i].offset);
      }
      choice["logprobs"] = {{"tokens", tokens},
                            {"token_logprobs", token_logprobs},
                            {"text_offset", offsets},
                            {"top_logprobs", nullptr}};
    } else {
      choice["logprobs"] = nullptr;
    }
    reply(res, 200,
          {{"id", "cmpl-mock"},
           {"object", "text_completion"},
           {"model", body.value("model", "mock")},
           {"choices", json::array({choice})}});
  }

  void embeddings(const httplib::Request& req, httplib::Response& res) {
    json body;
    if (!parse(req, res, body)) return;
    if (!body.contains("input") || !body["input"].is_string()) {
      return error(res, 400, "input must be a string");
    }
    const auto v = mock_embedding(body["input"].get<std::string>(), options.seed);
    reply(res, 200,
          {{"object", "list"},
           {"model", body.value("model", "mock")},
           {"data", json::array({{{"object", "embedding"}, {"index", 0}, {"embedding", v}}})}});
  }

  void install() {
    server.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
    });
    auto counted = [this](auto handler, bool enabled) {
      return [this, handler, enabled](const httplib::Request& req, httplib::Response& res) {
        requests.fetch_add(1);
        if (!enabled) return error(res, 404, "endpoint disabled on this mock");
        (this->*handler)(req, res);
      };
    };
    server.Post("/v1/chat/completions", counted(&Impl::chat, true));
    server.Post("/v1/completions", counted(&Impl::completions, options.can_score));
    server.Post("/v1/embeddings", counted(&Impl::embeddings, options.can_embed));
    server.Get("/stats", [this](const httplib::Request&, httplib::Response& res) {
      reply(res, 200, {{"requests", requests.load()}});
    });
  }
};

MockServer::MockServer(MockOptions options) : impl_(std::make_unique<Impl>()) {
  impl_->options = std::move(options);
  impl_->install();
}

MockServer::~MockServer() { stop(); }

void MockServer::start(int port) {
  if (impl_->thread.joinable()) throw PreconditionError("mock server already started");
  if (port == 0) {
    port_ = impl_->server.bind_to_any_port(impl_->options.host);
    if (port_ < 0) throw PortInUse("could not bind any port on " + impl_->options.host);
  } else {
    if (!impl_->server.bind_to_port(impl_->options.host, port)) {
      throw PortInUse("port " + std::to_string(port) + " is in use");
    }
    port_ = port;
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void MockServer::wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

void MockServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::string MockServer::endpoint() const {
  return "http://" + impl_->options.host + ":" + std::to_string(port_);
}

std::int64_t MockServer::requests() const noexcept { return impl_->requests.load(); }

}  // namespace icx::mock
