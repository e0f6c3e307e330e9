#pragma once

#include <stdexcept>
#include <string>

namespace gscls {

enum class ErrorCode {
  // gs_ply
  MalformedHeader,
  MissingProperty,
  TruncatedBody,
  NonFiniteValue,
  DegenerateQuaternion,
  // geometry
  ZeroRadius,
  NonUnitQuaternion,
  // sampling
  EmptyInput,
  IndexOutOfRange,
  // tensor
  ShapeMismatch,
  InvalidLabel,
  DetachedGraph,
  // classifier / evaluation
  ChannelMismatch,
  EmptyDataset,
  EmptyTestSet,
  InconsistentClassSets,
  // datasets
  EmptyClass,
  UnreadableFile,
  ClassTooSmall,
  // embedding
  DegenerateData,
  PerplexityInfeasible,
  // misc
  BadCheckpoint,
  InvalidArgument,
  IoError,
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::MissingProperty: return "MissingProperty";
    case ErrorCode::TruncatedBody: return "TruncatedBody";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::DegenerateQuaternion: return "DegenerateQuaternion";
    case ErrorCode::ZeroRadius: return "ZeroRadius";
    case ErrorCode::NonUnitQuaternion: return "NonUnitQuaternion";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::InvalidLabel: return "InvalidLabel";
    case ErrorCode::DetachedGraph: return "DetachedGraph";
    case ErrorCode::ChannelMismatch: return "ChannelMismatch";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::EmptyTestSet: return "EmptyTestSet";
    case ErrorCode::InconsistentClassSets: return "InconsistentClassSets";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::UnreadableFile: return "UnreadableFile";
    case ErrorCode::ClassTooSmall: return "ClassTooSmall";
    case ErrorCode::DegenerateData: return "DegenerateData";
    case ErrorCode::PerplexityInfeasible: return "PerplexityInfeasible";
    case ErrorCode::BadCheckpoint: return "BadCheckpoint";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Exception carrying a machine-parsable error code; what() is "<Code>: <message>".
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const { return code_; }
  const char* code_name() const { return error_code_name(code_); }

 private:
  ErrorCode code_;
};

}  // namespace gscls
