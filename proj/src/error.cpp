#include "assr/error.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

#include "assr/log.hpp"

namespace assr {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kVersionMismatch: return "VersionMismatch";
    case ErrorCode::kTruncated: return "Truncated";
    case ErrorCode::kMalformedField: return "MalformedField";
    case ErrorCode::kUnknownCode: return "UnknownCode";
    case ErrorCode::kEmpty: return "Empty";
    case ErrorCode::kChannelNotFound: return "ChannelNotFound";
    case ErrorCode::kInsufficientPatients: return "InsufficientPatients";
    case ErrorCode::kInvalidFrequency: return "InvalidFrequency";
    case ErrorCode::kInvalidBand: return "InvalidBand";
    case ErrorCode::kExcludedLabel: return "ExcludedLabel";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kTooLarge: return "TooLarge";
    case ErrorCode::kEmptyData: return "EmptyData";
    case ErrorCode::kEmptyCandidates: return "EmptyCandidates";
    case ErrorCode::kSingleClass: return "SingleClass";
    case ErrorCode::kMissingState: return "MissingState";
    case ErrorCode::kEmptySequence: return "EmptySequence";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kWrongCount: return "WrongCount";
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kSchemaMismatch: return "SchemaMismatch";
  }
  return "Unknown";
}

namespace log {
namespace {
std::atomic<Level> g_level{Level::kWarn};
std::mutex g_mutex;
}  // namespace

void SetLevel(Level level) { g_level = level; }
Level GetLevel() { return g_level; }

void Warn(std::string_view message) {
  if (g_level < Level::kWarn) return;
  std::lock_guard lock(g_mutex);
  std::clog << "[assr] warning: " << message << '\n';
}

void Info(std::string_view message) {
  if (g_level < Level::kInfo) return;
  std::lock_guard lock(g_mutex);
  std::clog << "[assr] " << message << '\n';
}

}  // namespace log
}  // namespace assr
