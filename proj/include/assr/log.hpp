#pragma once

#include <string_view>

namespace assr::log {

enum class Level { kQuiet = 0, kWarn = 1, kInfo = 2 };

void SetLevel(Level level);
Level GetLevel();

void Warn(std::string_view message);
void Info(std::string_view message);

}  // namespace assr::log
