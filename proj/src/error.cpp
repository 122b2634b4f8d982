#include "atomcal/error.hpp"

namespace atomcal {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::UnknownBackend: return "UnknownBackend";
    case ErrorCode::TransportError: return "TransportError";
    case ErrorCode::BackendRefusal: return "BackendRefusal";
    case ErrorCode::CacheMissInStrictReplay: return "CacheMissInStrictReplay";
    case ErrorCode::ImageNotFound: return "ImageNotFound";
    case ErrorCode::MissingProbabilities: return "MissingProbabilities";
    case ErrorCode::NoAnswerToken: return "NoAnswerToken";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::UnknownCategory: return "UnknownCategory";
    case ErrorCode::EmptyTupleList: return "EmptyTupleList";
    case ErrorCode::ValidationFailure: return "ValidationFailure";
    case ErrorCode::TooFewParaphrases: return "TooFewParaphrases";
    case ErrorCode::NoNumberedList: return "NoNumberedList";
    case ErrorCode::NoParseableSamples: return "NoParseableSamples";
    case ErrorCode::EmptySampleSet: return "EmptySampleSet";
    case ErrorCode::MissingProbability: return "MissingProbability";
    case ErrorCode::EmptyRefinement: return "EmptyRefinement";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::MalformedGrouping: return "MalformedGrouping";
    case ErrorCode::MissingGroupKey: return "MissingGroupKey";
    case ErrorCode::EmptyAnnotation: return "EmptyAnnotation";
    case ErrorCode::IdMismatch: return "IdMismatch";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::ZeroVariancePair: return "ZeroVariancePair";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::MissingGold: return "MissingGold";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::UnknownScenario: return "UnknownScenario";
  }
  return "Unknown";
}

}  // namespace atomcal
