#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace thermadapt {

enum class ErrorCode {
  // dataset
  MalformedXml,
  MissingField,
  DegenerateBox,
  InvalidBox,
  BoxOutOfFrame,
  MissingAnnotation,
  DimensionMismatch,
  DuplicateId,
  EmptyIntersection,
  UnsupportedImage,
  Io,
  // imagegen
  MissingTranslation,
  IdCollision,
  // evalmetrics
  UndefinedAP,
  NoDefinedClasses,
  InvalidDetection,
  // ablation
  InvalidCombination,
  InvalidConfig,
  HookFailed,
  HookTimeout,
  MissingOutput,
  UnresolvedPlaceholder,
  // synth
  PlacementFailure,
  InvalidParams,
};

std::string_view to_string(ErrorCode code);

// Every domain failure surfaces as an Error; the code is what callers and
// tests branch on, the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace thermadapt
