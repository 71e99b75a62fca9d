#include "thermadapt/error.hpp"

namespace thermadapt {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedXml: return "MalformedXml";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::DegenerateBox: return "DegenerateBox";
    case ErrorCode::InvalidBox: return "InvalidBox";
    case ErrorCode::BoxOutOfFrame: return "BoxOutOfFrame";
    case ErrorCode::MissingAnnotation: return "MissingAnnotation";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::EmptyIntersection: return "EmptyIntersection";
    case ErrorCode::UnsupportedImage: return "UnsupportedImage";
    case ErrorCode::Io: return "Io";
    case ErrorCode::MissingTranslation: return "MissingTranslation";
    case ErrorCode::IdCollision: return "IdCollision";
    case ErrorCode::UndefinedAP: return "UndefinedAP";
    case ErrorCode::NoDefinedClasses: return "NoDefinedClasses";
    case ErrorCode::InvalidDetection: return "InvalidDetection";
    case ErrorCode::InvalidCombination: return "InvalidCombination";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::HookFailed: return "HookFailed";
    case ErrorCode::HookTimeout: return "HookTimeout";
    case ErrorCode::MissingOutput: return "MissingOutput";
    case ErrorCode::UnresolvedPlaceholder: return "UnresolvedPlaceholder";
    case ErrorCode::PlacementFailure: return "PlacementFailure";
    case ErrorCode::InvalidParams: return "InvalidParams";
  }
  return "Unknown";
}

}  // namespace thermadapt
