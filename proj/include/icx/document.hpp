#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "icx/cell.hpp"
#include "icx/mexgen.hpp"
#include "icx/segmenter.hpp"
#include "icx/token_highlighter.hpp"

namespace icx::report {

inline constexpr std::string_view kSchemaVersion = "1";

struct UnitEntry {
  std::size_t start = 0;
  std::size_t end = 0;
  Level level = Level::word;
  std::string text;
  double score = 0.0;
  std::vector<UnitEntry> children;

  bool operator==(const UnitEntry&) const = default;
};

struct Metadata {
  std::int64_t n_queries = 0;
  std::uint64_t seed = 0;
  nlohmann::json params = nlohmann::json::object();
  std::string timestamp;
  std::optional<bool> truncated;

  bool operator==(const Metadata&) const = default;
};

/// One schema for every method; `contrastive` is set only for cell / mcell.
struct ExplanationDocument {
  std::string schema_version{kSchemaVersion};
  std::string method;  // mexgen-clime | mexgen-lshap | cell | mcell | token-highlighter
  std::string endpoint;
  std::string input;
  std::string output;
  std::vector<UnitEntry> units;
  std::optional<cell::ContrastiveExplanation> contrastive;
  Metadata metadata;

  bool operator==(const ExplanationDocument&) const = default;
};

/// Canonical form: sorted keys, two-space indent, UTF-8, trailing LF.
/// Non-finite numbers are written as null.
std::string serialize(const ExplanationDocument& doc);

/// Strict parse: unknown fields and wrong types raise SchemaError carrying a
/// JSON pointer to the offending value.
ExplanationDocument parse(std::string_view bytes);

nlohmann::json to_json(const ExplanationDocument& doc);
ExplanationDocument from_json(const nlohmann::json& j);

std::vector<UnitEntry> units_from(const std::vector<mexgen::AttributionNode>& nodes);
std::vector<UnitEntry> units_from(const std::vector<th::UnitScore>& scores);

/// Flattened root-level spans and scores, in document order.
std::vector<UnitSpan> root_spans(const ExplanationDocument& doc);
std::vector<double> root_scores(const ExplanationDocument& doc);

/// Builders; `params` and `timestamp` are the caller's to choose.
ExplanationDocument from_attribution(const mexgen::AttributionResult& r, std::string endpoint,
                                     nlohmann::json params, std::string timestamp);
ExplanationDocument from_contrastive(const cell::ContrastiveExplanation& c, bool myopic, std::string endpoint,
                                     std::uint64_t seed, nlohmann::json params, std::string timestamp);
/// Token-level scores go to metadata.params.token_scores; units carry the
/// aggregated scores.
ExplanationDocument from_saliency(std::string_view input, std::string_view response, const th::SaliencyResult& r,
                                  std::uint64_t seed, nlohmann::json params, std::string timestamp);

}  // namespace icx::report
