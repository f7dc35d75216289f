#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "icx/document.hpp"

namespace icx::report {

/// |score| / max |score| over one sibling list; all zeros when the max is 0.
std::vector<double> unit_opacities(const std::vector<double>& scores);

std::string html_escape(std::string_view text);

/// Background colour for a score at the given opacity. Supportive (>= 0) and
/// suppressive (< 0) scores use different hues.
std::string highlight_color(double score, double opacity);

/// Self-contained page: inline CSS, no scripts, no external resources.
std::string render_html(const ExplanationDocument& doc);

}  // namespace icx::report
