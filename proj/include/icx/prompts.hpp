#pragma once

#include <string>
#include <string_view>

// Versioned prompt templates. The mock server recognizes judge prompts by the
// question lines below, so both sides share these constants.
namespace icx::prompts {

inline constexpr std::string_view kVersion = "1";

inline constexpr std::string_view kPreferenceQuestion =
    "Which response better answers the prompt? Answer with a single letter: A or B.";
inline constexpr std::string_view kContradictionQuestion =
    "Does statement B contradict statement A? Answer yes or no.";
inline constexpr std::string_view kEntailmentQuestion =
    "Does statement A entail statement B? Answer yes or no.";
inline constexpr std::string_view kInfillInstruction =
    "Replace the text between <mask> and </mask> with a different but fluent alternative of "
    "similar length. Return only the replacement.";

inline constexpr std::string_view kMaskOpen = "<mask>";
inline constexpr std::string_view kMaskClose = "</mask>";

std::string preference(std::string_view prompt, std::string_view response_a, std::string_view response_b);
std::string contradiction(std::string_view statement_a, std::string_view statement_b);
std::string entailment(std::string_view statement_a, std::string_view statement_b);
/// `masked_text` already carries the <mask>...</mask> sentinels.
std::string infill(std::string_view masked_text);

/// All templates rendered with placeholder arguments, for --show-prompts.
std::string describe_all();

}  // namespace icx::prompts
