#include "assr/edf.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>

#include "assr/error.hpp"
#include "assr/text.hpp"

namespace assr {
namespace {

class FieldReader {
 public:
  explicit FieldReader(std::span<const std::byte> bytes) : bytes_(bytes) {}

  std::string Take(std::size_t width) {
    std::string out(width, ' ');
    for (std::size_t i = 0; i < width; ++i) {
      out[i] = static_cast<char>(bytes_[pos_ + i]);
    }
    pos_ += width;
    return out;
  }

  std::size_t pos() const { return pos_; }

 private:
  std::span<const std::byte> bytes_;
  std::size_t pos_ = 0;
};

int64_t ParseIntField(std::string_view raw, std::string_view what) {
  const std::string_view s = Trim(raw);
  int64_t value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::kMalformedField,
                std::string(what) + " is not an integer: '" + std::string(raw) + "'");
  }
  return value;
}

double ParseRealField(std::string_view raw, std::string_view what) {
  std::string_view s = Trim(raw);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(value)) {
    throw Error(ErrorCode::kMalformedField,
                std::string(what) + " is not a number: '" + std::string(raw) + "'");
  }
  return value;
}

// "dd.mm.yy" or "hh.mm.ss" -> three integers.
std::array<int, 3> ParseTriple(std::string_view raw, std::string_view what) {
  std::array<int, 3> out{};
  if (raw.size() != 8 || raw[2] != '.' || raw[5] != '.') {
    throw Error(ErrorCode::kMalformedField,
                std::string(what) + " is malformed: '" + std::string(raw) + "'");
  }
  for (int i = 0; i < 3; ++i) {
    out[i] = static_cast<int>(ParseIntField(raw.substr(3 * i, 2), what));
  }
  return out;
}

std::string PadField(std::string_view value, std::size_t width, std::string_view what) {
  if (value.size() > width) {
    throw Error(ErrorCode::kMalformedField,
                std::string(what) + " does not fit in " + std::to_string(width) + " bytes");
  }
  for (char c : value) {
    if (c < 32 || c > 126) {
      throw Error(ErrorCode::kMalformedField, std::string(what) + " has non-ASCII bytes");
    }
  }
  std::string out(value);
  out.resize(width, ' ');
  return out;
}

std::string FormatInt(int64_t v, std::size_t width, std::string_view what) {
  return PadField(std::to_string(v), width, what);
}

// Shortest decimal text of at most `width` characters that parses back to
// the value when possible, otherwise the closest that fits.
std::string FormatReal(double v, std::size_t width, std::string_view what) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, ptr);
  if (s.size() <= width) return PadField(s, width, what);
  for (int precision = static_cast<int>(width); precision >= 1; --precision) {
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    if (std::string_view(buf).size() <= width) return PadField(buf, width, what);
  }
  throw Error(ErrorCode::kMalformedField, std::string(what) + " cannot be represented");
}

std::string FormatTriple(int a, int b, int c) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%02d.%02d.%02d", a, b, c);
  return std::string(buf, 8);
}

}  // namespace

double DigitalToPhysical(const SignalSpec& spec, int digital) {
  const double t = static_cast<double>(digital - spec.digital_min) /
                   static_cast<double>(spec.digital_max - spec.digital_min);
  return (1.0 - t) * spec.physical_min + t * spec.physical_max;
}

int16_t PhysicalToDigital(const SignalSpec& spec, double physical) {
  const double t = (physical - spec.physical_min) / (spec.physical_max - spec.physical_min);
  double d = std::round(spec.digital_min + t * (spec.digital_max - spec.digital_min));
  d = std::clamp(d, static_cast<double>(spec.digital_min), static_cast<double>(spec.digital_max));
  return static_cast<int16_t>(d);
}

EdfRaw ParseEdfRaw(std::span<const std::byte> bytes) {
  if (bytes.size() < kEdfFixedHeaderBytes) {
    throw Error(ErrorCode::kTruncated, "EDF content shorter than the 256-byte header");
  }
  FieldReader in(bytes);
  EdfRaw edf;
  EdfHeader& h = edf.header;

  const std::string version = in.Take(8);
  if (version != "0       ") {
    throw Error(ErrorCode::kVersionMismatch, "version field is '" + version + "'");
  }
  h.version_tag = "0";
  h.patient_id = std::string(TrimRight(in.Take(80)));
  h.recording_id = std::string(TrimRight(in.Take(80)));
  const auto date = ParseTriple(in.Take(8), "start date");
  const auto time = ParseTriple(in.Take(8), "start time");
  h.start_datetime = {date[2] >= 85 ? 1900 + date[2] : 2000 + date[2], date[1], date[0],
                      time[0], time[1], time[2]};
  const int64_t header_bytes = ParseIntField(in.Take(8), "header byte count");
  in.Take(44);  // reserved
  h.num_records = ParseIntField(in.Take(8), "number of data records");
  h.record_duration_s = ParseRealField(in.Take(8), "record duration");
  const int64_t ns = ParseIntField(in.Take(4), "number of signals");
  if (ns < 0) throw Error(ErrorCode::kMalformedField, "negative signal count");
  const std::size_t expected_header =
      kEdfFixedHeaderBytes + static_cast<std::size_t>(ns) * kEdfSignalHeaderBytes;
  if (bytes.size() < expected_header) {
    throw Error(ErrorCode::kTruncated, "signal header block is incomplete");
  }
  if (header_bytes != static_cast<int64_t>(expected_header)) {
    throw Error(ErrorCode::kMalformedField, "header byte count " + std::to_string(header_bytes) +
                                                " disagrees with signal count");
  }

  const auto n = static_cast<std::size_t>(ns);
  h.signals.resize(n);
  for (auto& s : h.signals) s.label = std::string(TrimRight(in.Take(16)));
  for (auto& s : h.signals) s.transducer = std::string(TrimRight(in.Take(80)));
  for (auto& s : h.signals) s.physical_dimension = std::string(TrimRight(in.Take(8)));
  for (auto& s : h.signals) s.physical_min = ParseRealField(in.Take(8), "physical minimum");
  for (auto& s : h.signals) s.physical_max = ParseRealField(in.Take(8), "physical maximum");
  for (auto& s : h.signals) {
    s.digital_min = static_cast<int>(ParseIntField(in.Take(8), "digital minimum"));
  }
  for (auto& s : h.signals) {
    s.digital_max = static_cast<int>(ParseIntField(in.Take(8), "digital maximum"));
  }
  for (auto& s : h.signals) s.prefilter = std::string(TrimRight(in.Take(80)));
  for (auto& s : h.signals) {
    s.samples_per_record = static_cast<int>(ParseIntField(in.Take(8), "samples per record"));
  }
  for (std::size_t i = 0; i < n; ++i) in.Take(32);

  std::size_t record_samples = 0;
  for (const auto& s : h.signals) {
    if (s.digital_min >= s.digital_max) {
      throw Error(ErrorCode::kMalformedField, "digital range of '" + s.label + "' is empty");
    }
    if (s.physical_min == s.physical_max) {
      throw Error(ErrorCode::kMalformedField, "physical range of '" + s.label + "' is empty");
    }
    if (s.samples_per_record < 0) {
      throw Error(ErrorCode::kMalformedField, "negative samples per record");
    }
    record_samples += static_cast<std::size_t>(s.samples_per_record);
  }
  const std::size_t record_bytes = 2 * record_samples;
  const std::size_t data_bytes = bytes.size() - expected_header;
  if (h.num_records < 0) {
    // -1 marks an unknown record count (interrupted recording).
    h.num_records = record_bytes == 0 ? 0 : static_cast<int64_t>(data_bytes / record_bytes);
  }
  const auto num_records = static_cast<std::size_t>(h.num_records);
  if (data_bytes < num_records * record_bytes) {
    throw Error(ErrorCode::kTruncated, "data section holds " + std::to_string(data_bytes) +
                                           " bytes, header promises " +
                                           std::to_string(num_records * record_bytes));
  }

  edf.digital.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    edf.digital[i].reserve(num_records * static_cast<std::size_t>(h.signals[i].samples_per_record));
  }
  std::size_t pos = expected_header;
  for (std::size_t r = 0; r < num_records; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      auto& out = edf.digital[i];
      for (int k = 0; k < h.signals[i].samples_per_record; ++k) {
        const auto lo = static_cast<uint16_t>(bytes[pos]);
        const auto hi = static_cast<uint16_t>(bytes[pos + 1]);
        out.push_back(static_cast<int16_t>(static_cast<uint16_t>(lo | (hi << 8))));
        pos += 2;
      }
    }
  }
  return edf;
}

std::vector<std::byte> WriteEdfRaw(const EdfRaw& edf) {
  const EdfHeader& h = edf.header;
  const std::size_t n = h.signals.size();
  if (edf.digital.size() != n) {
    throw Error(ErrorCode::kDimensionMismatch, "digital sample sets do not match signal count");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t expected =
        static_cast<std::size_t>(h.num_records) * static_cast<std::size_t>(h.signals[i].samples_per_record);
    if (edf.digital[i].size() != expected) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "signal '" + h.signals[i].label + "' has " + std::to_string(edf.digital[i].size()) +
                      " samples, header implies " + std::to_string(expected));
    }
  }

  std::string text;
  text += PadField(h.version_tag, 8, "version");
  text += PadField(h.patient_id, 80, "patient id");
  text += PadField(h.recording_id, 80, "recording id");
  const auto& t = h.start_datetime;
  text += FormatTriple(t.day, t.month, t.year % 100);
  text += FormatTriple(t.hour, t.minute, t.second);
  text += FormatInt(static_cast<int64_t>(kEdfFixedHeaderBytes + n * kEdfSignalHeaderBytes), 8,
                    "header bytes");
  text += std::string(44, ' ');
  text += FormatInt(h.num_records, 8, "number of records");
  text += FormatReal(h.record_duration_s, 8, "record duration");
  text += FormatInt(static_cast<int64_t>(n), 4, "number of signals");
  for (const auto& s : h.signals) text += PadField(s.label, 16, "label");
  for (const auto& s : h.signals) text += PadField(s.transducer, 80, "transducer");
  for (const auto& s : h.signals) text += PadField(s.physical_dimension, 8, "physical dimension");
  for (const auto& s : h.signals) text += FormatReal(s.physical_min, 8, "physical minimum");
  for (const auto& s : h.signals) text += FormatReal(s.physical_max, 8, "physical maximum");
  for (const auto& s : h.signals) text += FormatInt(s.digital_min, 8, "digital minimum");
  for (const auto& s : h.signals) text += FormatInt(s.digital_max, 8, "digital maximum");
  for (const auto& s : h.signals) text += PadField(s.prefilter, 80, "prefilter");
  for (const auto& s : h.signals) text += FormatInt(s.samples_per_record, 8, "samples per record");
  for (std::size_t i = 0; i < n; ++i) text += std::string(32, ' ');

  std::vector<std::byte> out;
  out.reserve(text.size());
  for (char c : text) out.push_back(static_cast<std::byte>(c));
  for (int64_t r = 0; r < h.num_records; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto spr = static_cast<std::size_t>(h.signals[i].samples_per_record);
      const auto* src = edf.digital[i].data() + static_cast<std::size_t>(r) * spr;
      for (std::size_t k = 0; k < spr; ++k) {
        const auto u = static_cast<uint16_t>(src[k]);
        out.push_back(static_cast<std::byte>(u & 0xFF));
        out.push_back(static_cast<std::byte>(u >> 8));
      }
    }
  }
  return out;
}

std::pair<EdfHeader, std::vector<Recording>> ParseEdf(std::span<const std::byte> bytes) {
  EdfRaw raw = ParseEdfRaw(bytes);
  std::vector<Recording> recordings;
  recordings.reserve(raw.header.signals.size());
  for (std::size_t i = 0; i < raw.header.signals.size(); ++i) {
    const SignalSpec& spec = raw.header.signals[i];
    Recording rec;
    rec.patient_id = std::string(Trim(raw.header.patient_id));
    rec.channel_label = spec.label;
    rec.fs = spec.samples_per_record / raw.header.record_duration_s;
    rec.samples.reserve(raw.digital[i].size());
    for (int16_t d : raw.digital[i]) rec.samples.push_back(DigitalToPhysical(spec, d));
    recordings.push_back(std::move(rec));
  }
  return {std::move(raw.header), std::move(recordings)};
}

std::vector<std::byte> WriteEdf(const EdfHeader& header, const std::vector<Recording>& recordings) {
  if (recordings.size() != header.signals.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "one recording per header signal is required");
  }
  EdfRaw raw{header, {}};
  raw.digital.resize(recordings.size());
  for (std::size_t i = 0; i < recordings.size(); ++i) {
    auto& out = raw.digital[i];
    out.reserve(recordings[i].samples.size());
    for (double v : recordings[i].samples) out.push_back(PhysicalToDigital(header.signals[i], v));
  }
  return WriteEdfRaw(raw);
}

Recording SelectChannel(const std::vector<Recording>& recordings, std::string_view label) {
  const std::string wanted = ToLower(Trim(label));
  for (const auto& rec : recordings) {
    if (ToLower(Trim(rec.channel_label)) == wanted) return rec;
  }
  throw Error(ErrorCode::kChannelNotFound, "no channel labelled '" + std::string(label) + "'");
}

std::vector<std::byte> ReadFileBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open " + path);
  std::vector<char> chars((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::byte> out(chars.size());
  std::transform(chars.begin(), chars.end(), out.begin(), [](char c) { return static_cast<std::byte>(c); });
  return out;
}

void WriteFileBytes(const std::string& path, std::span<const std::byte> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIoFailure, "short write to " + path);
}

}  // namespace assr
