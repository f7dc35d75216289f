#include "icx/html.hpp"

#include <cmath>
#include <cstdio>

namespace icx::report {

namespace {

constexpr const char* kPage = R"(<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>@TITLE@</title>
<style>
body { font-family: system-ui, sans-serif; max-width: 60rem; margin: 2rem auto; line-height: 1.6; color: #222; }
.text { white-space: pre-wrap; border: 1px solid #ddd; padding: 0.8rem; border-radius: 4px; }
.unit { border-radius: 3px; }
details { margin: 0.4rem 0 0.4rem 1rem; }
summary { cursor: pointer; color: #555; }
table { border-collapse: collapse; }
td, th { border: 1px solid #ddd; padding: 0.2rem 0.6rem; text-align: left; }
.legend span { padding: 0 0.4rem; border-radius: 3px; }
.meta { color: #666; font-size: 0.9em; }
</style>
</head>
<body>
<h1>@TITLE@</h1>
<p class="legend"><span style="background-color: @POS@">supportive</span> <span style="background-color: @NEG@">suppressive</span></p>
@BODY@
</body>
</html>
)";

std::string fmt(double v, const char* pattern = "%.4f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

void replace_all(std::string& s, std::string_view from, const std::string& to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

// Renders `text` (which starts at absolute offset `base`) with each unit
// highlighted; gaps between units are emitted verbatim.
std::string highlighted(std::string_view text, std::size_t base, const std::vector<UnitEntry>& units) {
  const auto op = unit_opacities([&] {
    std::vector<double> s;
    for (const auto& u : units) s.push_back(u.score);
    return s;
  }());
  std::string out;
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < units.size(); ++i) {
    const auto& u = units[i];
    if (u.start < base || u.end > base + text.size() || u.start - base < cursor) continue;
    const std::size_t s = u.start - base;
    out += html_escape(text.substr(cursor, s - cursor));
    out += "<span class=\"unit\" style=\"background-color: " + highlight_color(u.score, op[i]) + "\" title=\"" +
           fmt(u.score, "%.6g") + "\">" + html_escape(text.substr(s, u.end - u.start)) + "</span>";
    cursor = u.end - base;
  }
  out += html_escape(text.substr(cursor));
  return out;
}

void nested(std::string& out, std::string_view input, const std::vector<UnitEntry>& units) {
  for (const auto& u : units) {
    if (u.children.empty() || u.end > input.size()) continue;
    out += "<details><summary>" + html_escape(u.text.size() > 60 ? u.text.substr(0, 57) + "..." : u.text) +
           " (" + fmt(u.score, "%.4g") + ")</summary>\n<div class=\"text\">" +
           highlighted(input.substr(u.start, u.end - u.start), u.start, u.children) + "</div>\n";
    nested(out, input, u.children);
    out += "</details>\n";
  }
}

}  // namespace

std::vector<double> unit_opacities(const std::vector<double>& scores) {
  double mx = 0.0;
  for (double s : scores) {
    if (std::isfinite(s)) mx = std::max(mx, std::abs(s));
  }
  std::vector<double> out(scores.size(), 0.0);
  if (mx == 0.0) return out;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::isfinite(scores[i]) ? std::abs(scores[i]) / mx : 0.0;
  }
  return out;
}

std::string html_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string highlight_color(double score, double opacity) {
  const char* rgb = score >= 0 ? "30, 110, 230" : "220, 50, 40";
  return std::string("rgba(") + rgb + ", " + fmt(opacity) + ")";
}

std::string render_html(const ExplanationDocument& doc) {
  std::string body;
  body += "<p class=\"meta\">method " + html_escape(doc.method) + ", " + std::to_string(doc.metadata.n_queries) +
          " queries, seed " + std::to_string(doc.metadata.seed);
  if (doc.metadata.truncated.value_or(false)) body += ", truncated by budget";
  body += "</p>\n<h2>Input</h2>\n<div class=\"text\">" + highlighted(doc.input, 0, doc.units) + "</div>\n";
  nested(body, doc.input, doc.units);
  body += "<h2>Output</h2>\n<div class=\"text\">" + html_escape(doc.output) + "</div>\n";

  if (doc.contrastive) {
    const auto& c = *doc.contrastive;
    body += "<h2>Contrastive prompt</h2>\n<p class=\"meta\">" + std::string(c.succeeded ? "succeeded" : "not found") +
            ", contrast score " + (std::isfinite(c.contrast_score) ? fmt(c.contrast_score) : "n/a") + ", " +
            std::to_string(c.queries_used) + " queries</p>\n<div class=\"text\">" + html_escape(c.contrastive_prompt) +
            "</div>\n<h2>Contrastive response</h2>\n<div class=\"text\">" + html_escape(c.contrastive_response) +
            "</div>\n";
    if (!c.edits.empty()) {
      body += "<h3>Edits</h3>\n<table>\n<tr><th>#</th><th>replaced</th><th>with</th></tr>\n";
      for (std::size_t i = 0; i < c.edits.size(); ++i) {
        std::string before;
        for (const auto& w : c.edits[i].window) before += (before.empty() ? "" : " ") + w.text;
        body += "<tr><td>" + std::to_string(i + 1) + "</td><td>" + html_escape(before) + "</td><td>" +
                html_escape(c.edits[i].replacement) + "</td></tr>\n";
      }
      body += "</table>\n";
    }
  }

  std::string page = kPage;
  replace_all(page, "@TITLE@", "Explanation: " + html_escape(doc.method));
  replace_all(page, "@POS@", highlight_color(1.0, 0.6));
  replace_all(page, "@NEG@", highlight_color(-1.0, 0.6));
  replace_all(page, "@BODY@", body);
  return page;
}

}  // namespace icx::report
