#pragma once

#include <memory>
#include <string>

#include "icx/http_client.hpp"
#include "icx/mock_server.hpp"

namespace icx::test {

// A mock server on a free loopback port plus a client pointed at it.
struct MockBackend {
  explicit MockBackend(const std::string& behavior, std::uint64_t seed = 0, bool can_score = true,
                       bool can_embed = true)
      : server([&] {
          mock::MockOptions o;
          o.behavior = mock::MockBehavior::parse(behavior);
          o.seed = seed;
          o.can_score = can_score;
          o.can_embed = can_embed;
          return o;
        }()) {
    server.start(0);
    HttpClientOptions opts;
    opts.endpoint = server.endpoint();
    opts.retry_delay = std::chrono::milliseconds(10);
    client = std::make_unique<OpenAIClient>(opts);
  }

  mock::MockServer server;
  std::unique_ptr<OpenAIClient> client;
};

}  // namespace icx::test
