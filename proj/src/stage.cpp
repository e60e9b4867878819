#include "assr/stage.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include "assr/error.hpp"

namespace assr {

std::string_view StageName(Stage s) {
  switch (s) {
    case Stage::kAwake: return "Awake";
    case Stage::kNrem1: return "NREM1";
    case Stage::kNrem2: return "NREM2";
    case Stage::kSws: return "SWS";
    case Stage::kRem: return "REM";
    case Stage::kNrem3: return "NREM3";
    case Stage::kNrem4: return "NREM4";
    case Stage::kExcluded: return "Excluded";
  }
  return "?";
}

std::optional<Stage> ParseStageName(std::string_view name) {
  std::string upper(name);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  for (int i = 0; i <= static_cast<int>(Stage::kExcluded); ++i) {
    std::string candidate(StageName(static_cast<Stage>(i)));
    std::transform(candidate.begin(), candidate.end(), candidate.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    if (candidate == upper) return static_cast<Stage>(i);
  }
  return std::nullopt;
}

Stage MergeStage(Stage s) {
  switch (s) {
    case Stage::kNrem3:
    case Stage::kNrem4:
      return Stage::kSws;
    case Stage::kExcluded:
      throw Error(ErrorCode::kExcludedLabel, "cannot merge an Excluded epoch");
    default:
      return s;
  }
}

}  // namespace assr
