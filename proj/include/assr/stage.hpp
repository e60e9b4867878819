#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace assr {

// Sleep stage labels. The first five values are the post-merge classes and
// their numeric order is the fixed tie-break order used everywhere.
enum class Stage : int {
  kAwake = 0,
  kNrem1 = 1,
  kNrem2 = 2,
  kSws = 3,
  kRem = 4,
  kNrem3 = 5,
  kNrem4 = 6,
  kExcluded = 7,
};

inline constexpr std::size_t kNumClasses = 5;

inline constexpr std::array<Stage, kNumClasses> kClasses = {
    Stage::kAwake, Stage::kNrem1, Stage::kNrem2, Stage::kSws, Stage::kRem};

// Index into a 5-class probability vector; only valid for merged classes.
constexpr std::size_t ClassIndex(Stage s) { return static_cast<std::size_t>(s); }
constexpr Stage ClassAt(std::size_t i) { return static_cast<Stage>(i); }

constexpr bool IsClass(Stage s) {
  return static_cast<int>(s) >= 0 && static_cast<int>(s) < static_cast<int>(kNumClasses);
}

std::string_view StageName(Stage s);
std::optional<Stage> ParseStageName(std::string_view name);

// NREM3/NREM4 -> SWS; other classes unchanged. Throws ExcludedLabel.
Stage MergeStage(Stage s);

}  // namespace assr
