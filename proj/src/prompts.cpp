#include "icx/prompts.hpp"

namespace icx::prompts {
namespace {

std::string tagged(std::string_view tag, std::string_view body) {
  std::string out;
  out += '<';
  out += tag;
  out += ">\n";
  out += body;
  out += "\n</";
  out += tag;
  out += ">\n";
  return out;
}

std::string statements(std::string_view a, std::string_view b, std::string_view question) {
  return tagged("statement_a", a) + tagged("statement_b", b) + std::string(question);
}

}  // namespace

std::string preference(std::string_view prompt, std::string_view response_a, std::string_view response_b) {
  return "You will compare two responses to the same prompt.\n" + tagged("prompt", prompt) +
         tagged("response_a", response_a) + tagged("response_b", response_b) +
         std::string(kPreferenceQuestion);
}

std::string contradiction(std::string_view statement_a, std::string_view statement_b) {
  return statements(statement_a, statement_b, kContradictionQuestion);
}

std::string entailment(std::string_view statement_a, std::string_view statement_b) {
  return statements(statement_a, statement_b, kEntailmentQuestion);
}

std::string infill(std::string_view masked_text) {
  return std::string(kInfillInstruction) + "\n\n" + std::string(masked_text);
}

std::string describe_all() {
  std::string out = "# prompt templates, version " + std::string(kVersion) + "\n\n";
  out += "## preference judge\n" + preference("{prompt}", "{response_a}", "{response_b}") + "\n\n";
  out += "## contradiction judge\n" + contradiction("{statement_a}", "{statement_b}") + "\n\n";
  out += "## entailment judge\n" + entailment("{statement_a}", "{statement_b}") + "\n\n";
  out += "## infill\n" + infill("{text before}<mask>{window}</mask>{text after}") + "\n";
  return out;
}

}  // namespace icx::prompts
