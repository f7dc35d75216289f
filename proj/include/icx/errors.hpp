#pragma once

#include <stdexcept>
#include <string>

namespace icx {

/// Base of every error the library raises. `kind()` is the stable name used in
/// CLI diagnostics ("UnsupportedCapability", "BudgetExhausted", ...).
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define ICX_DEFINE_ERROR(Name)                                              \
  class Name : public Error {                                               \
   public:                                                                  \
    explicit Name(const std::string& message) : Error(#Name, message) {}    \
  }

// model-client
ICX_DEFINE_ERROR(EmptyInput);
ICX_DEFINE_ERROR(TransportError);
ICX_DEFINE_ERROR(ProtocolError);
ICX_DEFINE_ERROR(BudgetExhausted);
ICX_DEFINE_ERROR(UnsupportedCapability);
// mock server
ICX_DEFINE_ERROR(PortInUse);
// segmenter / perturber
ICX_DEFINE_ERROR(InvalidLevelOrder);
ICX_DEFINE_ERROR(MaskLengthMismatch);
ICX_DEFINE_ERROR(AllCandidatesDegenerate);
// scalarizers / estimators
ICX_DEFINE_ERROR(JudgeParseError);
ICX_DEFINE_ERROR(DegenerateDesign);
// token highlighter
ICX_DEFINE_ERROR(EmptyResponse);
// contract violations on arguments
ICX_DEFINE_ERROR(PreconditionError);

#undef ICX_DEFINE_ERROR

/// Raised by document parsing; `pointer()` is a JSON pointer to the offending value.
class SchemaError : public Error {
 public:
  SchemaError(std::string pointer, const std::string& message)
      : Error("SchemaError", message + " at \"" + pointer + "\""), pointer_(std::move(pointer)) {}

  const std::string& pointer() const noexcept { return pointer_; }

 private:
  std::string pointer_;
};

}  // namespace icx
