#include "assr/hypnogram.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "assr/error.hpp"
#include "assr/text.hpp"

namespace assr {

StageMapping DefaultStageMapping() {
  return {{0, Stage::kAwake}, {1, Stage::kRem},      {2, Stage::kNrem1},
          {3, Stage::kNrem2}, {4, Stage::kNrem3},    {5, Stage::kNrem4},
          {6, Stage::kExcluded}, {7, Stage::kExcluded}, {8, Stage::kExcluded}};
}

Hypnogram ParseHypnogram(std::string_view text, const StageMapping& mapping) {
  Hypnogram hyp;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const std::string_view line = Trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty()) continue;
    int code = 0;
    auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), code);
    if (ec != std::errc() || ptr != line.data() + line.size()) {
      throw Error(ErrorCode::kMalformedField,
                  "line " + std::to_string(line_no) + " is not an integer code");
    }
    const auto it = mapping.find(code);
    if (it == mapping.end()) {
      throw Error(ErrorCode::kUnknownCode,
                  "code " + std::to_string(code) + " on line " + std::to_string(line_no));
    }
    hyp.stages.push_back(it->second);
  }
  if (hyp.stages.empty()) throw Error(ErrorCode::kEmpty, "hypnogram has no epochs");
  return hyp;
}

std::string FormatHypnogram(const Hypnogram& hyp, const StageMapping& mapping) {
  std::string out;
  for (Stage s : hyp.stages) {
    bool found = false;
    for (const auto& [code, stage] : mapping) {
      if (stage == s) {
        out += std::to_string(code);
        out += '\n';
        found = true;
        break;
      }
    }
    if (!found) {
      throw Error(ErrorCode::kUnknownCode, "stage " + std::string(StageName(s)) + " has no code");
    }
  }
  return out;
}

std::string ReadTextFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteTextFile(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::kIoFailure, "short write to " + path);
}

}  // namespace assr
