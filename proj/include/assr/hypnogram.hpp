#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "assr/stage.hpp"

namespace assr {

inline constexpr double kEpochSeconds = 30.0;

struct Hypnogram {
  std::vector<Stage> stages;
  double epoch_duration_s = kEpochSeconds;
};

// Integer stage code in the label file -> stage.
using StageMapping = std::map<int, Stage>;

// 0 Awake, 1 REM, 2 NREM1, 3 NREM2, 4 NREM3, 5 NREM4, 6-8 Excluded.
StageMapping DefaultStageMapping();

// One integer code per non-empty line. Throws UnknownCode, Empty, MalformedField.
Hypnogram ParseHypnogram(std::string_view text, const StageMapping& mapping);

// Inverse of ParseHypnogram for the given mapping (first code per stage).
std::string FormatHypnogram(const Hypnogram& hyp, const StageMapping& mapping);

std::string ReadTextFile(const std::string& path);
void WriteTextFile(const std::string& path, std::string_view text);

}  // namespace assr
