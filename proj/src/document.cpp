#include "icx/document.hpp"

#include <cmath>
#include <limits>
#include <set>

#include "icx/errors.hpp"

namespace icx::report {

using nlohmann::json;

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json span_json(const UnitSpan& s) {
  return {{"start", s.start}, {"end", s.end}, {"level", std::string(level_name(s.level))}, {"text", s.text}};
}

json unit_json(const UnitEntry& u) {
  json children = json::array();
  for (const auto& c : u.children) children.push_back(unit_json(c));
  return {{"start", u.start},
          {"end", u.end},
          {"level", std::string(level_name(u.level))},
          {"text", u.text},
          {"score", number_or_null(u.score)},
          {"children", std::move(children)}};
}

json contrastive_json(const cell::ContrastiveExplanation& c) {
  json edits = json::array();
  for (const auto& e : c.edits) {
    json window = json::array();
    for (const auto& w : e.window) window.push_back(span_json(w));
    edits.push_back({{"window", std::move(window)}, {"replacement", e.replacement}});
  }
  json history = json::array();
  for (double h : c.best_history) history.push_back(number_or_null(h));
  return {{"original_prompt", c.original_prompt},
          {"original_response", c.original_response},
          {"contrastive_prompt", c.contrastive_prompt},
          {"contrastive_response", c.contrastive_response},
          {"edits", std::move(edits)},
          {"contrast_score", number_or_null(c.contrast_score)},
          {"queries_used", c.queries_used},
          {"succeeded", c.succeeded},
          {"best_history", std::move(history)}};
}

// --- strict reading -------------------------------------------------------

std::string child(const std::string& ptr, std::string_view key) {
  std::string k(key);
  std::string escaped;
  for (char c : k) {
    if (c == '~') escaped += "~0";
    else if (c == '/') escaped += "~1";
    else escaped += c;
  }
  return ptr + "/" + escaped;
}

std::string child(const std::string& ptr, std::size_t index) { return ptr + "/" + std::to_string(index); }

void require_object(const json& j, const std::string& ptr, std::initializer_list<std::string_view> required,
                    std::initializer_list<std::string_view> optional = {}) {
  if (!j.is_object()) throw SchemaError(ptr.empty() ? "" : ptr, "expected an object");
  std::set<std::string_view> allowed(required);
  allowed.insert(optional.begin(), optional.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.contains(it.key())) throw SchemaError(child(ptr, it.key()), "unknown field");
  }
  for (auto key : required) {
    if (!j.contains(std::string(key))) throw SchemaError(child(ptr, key), "missing required field");
  }
}

const json& at(const json& j, std::string_view key) { return j.at(std::string(key)); }

std::string read_string(const json& j, const std::string& ptr) {
  if (!j.is_string()) throw SchemaError(ptr, "expected a string");
  return j.get<std::string>();
}

double read_number(const json& j, const std::string& ptr, bool null_is_neg_inf = false) {
  if (null_is_neg_inf && j.is_null()) return -std::numeric_limits<double>::infinity();
  if (!j.is_number()) throw SchemaError(ptr, "expected a number");
  return j.get<double>();
}

std::int64_t read_int(const json& j, const std::string& ptr) {
  if (!j.is_number_integer()) throw SchemaError(ptr, "expected an integer");
  return j.get<std::int64_t>();
}

std::size_t read_size(const json& j, const std::string& ptr) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0)) {
    throw SchemaError(ptr, "expected a non-negative integer");
  }
  return j.get<std::size_t>();
}

bool read_bool(const json& j, const std::string& ptr) {
  if (!j.is_boolean()) throw SchemaError(ptr, "expected a boolean");
  return j.get<bool>();
}

const json& read_array(const json& j, const std::string& ptr) {
  if (!j.is_array()) throw SchemaError(ptr, "expected an array");
  return j;
}

Level read_level(const json& j, const std::string& ptr) {
  const std::string s = read_string(j, ptr);
  try {
    return parse_level(s);
  } catch (const PreconditionError&) {
    throw SchemaError(ptr, "unknown level '" + s + "'");
  }
}

UnitSpan read_span(const json& j, const std::string& ptr) {
  require_object(j, ptr, {"start", "end", "level", "text"});
  UnitSpan s;
  s.start = read_size(at(j, "start"), child(ptr, "start"));
  s.end = read_size(at(j, "end"), child(ptr, "end"));
  s.level = read_level(at(j, "level"), child(ptr, "level"));
  s.text = read_string(at(j, "text"), child(ptr, "text"));
  return s;
}

UnitEntry read_unit(const json& j, const std::string& ptr) {
  require_object(j, ptr, {"start", "end", "level", "text", "score", "children"});
  UnitEntry u;
  u.start = read_size(at(j, "start"), child(ptr, "start"));
  u.end = read_size(at(j, "end"), child(ptr, "end"));
  if (u.end < u.start) throw SchemaError(child(ptr, "end"), "end precedes start");
  u.level = read_level(at(j, "level"), child(ptr, "level"));
  u.text = read_string(at(j, "text"), child(ptr, "text"));
  u.score = read_number(at(j, "score"), child(ptr, "score"));
  const std::string cptr = child(ptr, "children");
  const json& cs = read_array(at(j, "children"), cptr);
  for (std::size_t i = 0; i < cs.size(); ++i) u.children.push_back(read_unit(cs[i], child(cptr, i)));
  return u;
}

cell::ContrastiveExplanation read_contrastive(const json& j, const std::string& ptr) {
  require_object(j, ptr,
                 {"original_prompt", "original_response", "contrastive_prompt", "contrastive_response", "edits",
                  "contrast_score", "queries_used", "succeeded", "best_history"});
  cell::ContrastiveExplanation c;
  c.original_prompt = read_string(at(j, "original_prompt"), child(ptr, "original_prompt"));
  c.original_response = read_string(at(j, "original_response"), child(ptr, "original_response"));
  c.contrastive_prompt = read_string(at(j, "contrastive_prompt"), child(ptr, "contrastive_prompt"));
  c.contrastive_response = read_string(at(j, "contrastive_response"), child(ptr, "contrastive_response"));
  const std::string eptr = child(ptr, "edits");
  const json& es = read_array(at(j, "edits"), eptr);
  for (std::size_t i = 0; i < es.size(); ++i) {
    const std::string iptr = child(eptr, i);
    require_object(es[i], iptr, {"window", "replacement"});
    cell::Edit e;
    const std::string wptr = child(iptr, "window");
    const json& ws = read_array(at(es[i], "window"), wptr);
    for (std::size_t k = 0; k < ws.size(); ++k) e.window.push_back(read_span(ws[k], child(wptr, k)));
    e.replacement = read_string(at(es[i], "replacement"), child(iptr, "replacement"));
    c.edits.push_back(std::move(e));
  }
  c.contrast_score = read_number(at(j, "contrast_score"), child(ptr, "contrast_score"), true);
  c.queries_used = read_int(at(j, "queries_used"), child(ptr, "queries_used"));
  c.succeeded = read_bool(at(j, "succeeded"), child(ptr, "succeeded"));
  const std::string hptr = child(ptr, "best_history");
  const json& hs = read_array(at(j, "best_history"), hptr);
  for (std::size_t i = 0; i < hs.size(); ++i) c.best_history.push_back(read_number(hs[i], child(hptr, i), true));
  return c;
}

}  // namespace

json to_json(const ExplanationDocument& doc) {
  json units = json::array();
  for (const auto& u : doc.units) units.push_back(unit_json(u));
  json meta = {{"n_queries", doc.metadata.n_queries},
               {"seed", doc.metadata.seed},
               {"params", doc.metadata.params},
               {"timestamp", doc.metadata.timestamp}};
  if (doc.metadata.truncated) meta["truncated"] = *doc.metadata.truncated;
  json j = {{"schema_version", doc.schema_version},
            {"method", doc.method},
            {"endpoint", doc.endpoint},
            {"input", doc.input},
            {"output", doc.output},
            {"units", std::move(units)},
            {"metadata", std::move(meta)}};
  if (doc.contrastive) j["contrastive"] = contrastive_json(*doc.contrastive);
  return j;
}

ExplanationDocument from_json(const json& j) {
  require_object(j, "", {"schema_version", "method", "endpoint", "input", "output", "units", "metadata"},
                 {"contrastive"});
  ExplanationDocument d;
  d.schema_version = read_string(at(j, "schema_version"), "/schema_version");
  if (d.schema_version != kSchemaVersion) {
    throw SchemaError("/schema_version", "unsupported schema version '" + d.schema_version + "'");
  }
  d.method = read_string(at(j, "method"), "/method");
  static const std::set<std::string> kMethods{"mexgen-clime", "mexgen-lshap", "cell", "mcell", "token-highlighter"};
  if (!kMethods.contains(d.method)) throw SchemaError("/method", "unknown method '" + d.method + "'");
  d.endpoint = read_string(at(j, "endpoint"), "/endpoint");
  d.input = read_string(at(j, "input"), "/input");
  d.output = read_string(at(j, "output"), "/output");
  const json& us = read_array(at(j, "units"), "/units");
  for (std::size_t i = 0; i < us.size(); ++i) d.units.push_back(read_unit(us[i], child(std::string("/units"), i)));
  if (j.contains("contrastive") && !at(j, "contrastive").is_null()) {
    d.contrastive = read_contrastive(at(j, "contrastive"), "/contrastive");
  }
  const json& m = at(j, "metadata");
  require_object(m, "/metadata", {"n_queries", "seed", "params", "timestamp"}, {"truncated"});
  d.metadata.n_queries = read_int(at(m, "n_queries"), "/metadata/n_queries");
  const json& seed = at(m, "seed");
  if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0)) {
    throw SchemaError("/metadata/seed", "expected a non-negative integer");
  }
  d.metadata.seed = seed.get<std::uint64_t>();
  if (!at(m, "params").is_object()) throw SchemaError("/metadata/params", "expected an object");
  d.metadata.params = at(m, "params");
  d.metadata.timestamp = read_string(at(m, "timestamp"), "/metadata/timestamp");
  if (m.contains("truncated")) d.metadata.truncated = read_bool(at(m, "truncated"), "/metadata/truncated");
  return d;
}

std::string serialize(const ExplanationDocument& doc) {
  return to_json(doc).dump(2, ' ', false, json::error_handler_t::replace) + "\n";
}

ExplanationDocument parse(std::string_view bytes) {
  json j = json::parse(bytes, nullptr, false);
  if (j.is_discarded()) throw SchemaError("", "document is not valid JSON");
  return from_json(j);
}

std::vector<UnitEntry> units_from(const std::vector<mexgen::AttributionNode>& nodes) {
  std::vector<UnitEntry> out;
  for (const auto& n : nodes) {
    out.push_back({n.unit.start, n.unit.end, n.unit.level, n.unit.text, n.score, units_from(n.children)});
  }
  return out;
}

std::vector<UnitEntry> units_from(const std::vector<th::UnitScore>& scores) {
  std::vector<UnitEntry> out;
  for (const auto& s : scores) out.push_back({s.unit.start, s.unit.end, s.unit.level, s.unit.text, s.score, {}});
  return out;
}

ExplanationDocument from_attribution(const mexgen::AttributionResult& r, std::string endpoint, json params,
                                     std::string timestamp) {
  ExplanationDocument d;
  d.method = "mexgen-" + std::string(mexgen::method_name(r.method));
  d.endpoint = std::move(endpoint);
  d.input = r.input;
  d.output = r.output;
  d.units = units_from(r.units);
  d.metadata.n_queries = r.n_queries;
  d.metadata.seed = r.seed;
  params["scalarizer"] = r.scalarizer.name();
  d.metadata.params = std::move(params);
  d.metadata.timestamp = std::move(timestamp);
  if (r.truncated) d.metadata.truncated = true;
  return d;
}

ExplanationDocument from_contrastive(const cell::ContrastiveExplanation& c, bool myopic, std::string endpoint,
                                     std::uint64_t seed, json params, std::string timestamp) {
  ExplanationDocument d;
  d.method = myopic ? "mcell" : "cell";
  d.endpoint = std::move(endpoint);
  d.input = c.original_prompt;
  d.output = c.original_response;
  d.contrastive = c;
  d.metadata.n_queries = c.queries_used;
  d.metadata.seed = seed;
  d.metadata.params = std::move(params);
  d.metadata.timestamp = std::move(timestamp);
  return d;
}

ExplanationDocument from_saliency(std::string_view input, std::string_view response, const th::SaliencyResult& r,
                                  std::uint64_t seed, json params, std::string timestamp) {
  ExplanationDocument d;
  d.method = "token-highlighter";
  d.endpoint = "";
  d.input = std::string(input);
  d.output = std::string(response);
  d.units = units_from(r.unit_scores);
  json tokens = json::array();
  for (const auto& t : r.token_scores) {
    tokens.push_back({{"start", t.token.offset}, {"end", t.token.end()}, {"text", t.token.text},
                      {"score", number_or_null(t.score)}});
  }
  params["token_scores"] = std::move(tokens);
  d.metadata.seed = seed;
  d.metadata.params = std::move(params);
  d.metadata.timestamp = std::move(timestamp);
  return d;
}

std::vector<UnitSpan> root_spans(const ExplanationDocument& doc) {
  std::vector<UnitSpan> out;
  for (const auto& u : doc.units) out.push_back({u.start, u.end, u.level, u.text});
  return out;
}

std::vector<double> root_scores(const ExplanationDocument& doc) {
  std::vector<double> out;
  for (const auto& u : doc.units) out.push_back(u.score);
  return out;
}

}  // namespace icx::report
