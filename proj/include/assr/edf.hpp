#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace assr {

struct CalendarTime {
  int year = 1985;
  int month = 1;
  int day = 1;
  int hour = 0;
  int minute = 0;
  int second = 0;

  friend bool operator==(const CalendarTime&, const CalendarTime&) = default;
};

struct SignalSpec {
  std::string label;
  std::string transducer;
  std::string physical_dimension;
  double physical_min = -1.0;
  double physical_max = 1.0;
  int digital_min = -32768;
  int digital_max = 32767;
  std::string prefilter;
  int samples_per_record = 0;

  friend bool operator==(const SignalSpec&, const SignalSpec&) = default;
};

struct EdfHeader {
  std::string version_tag = "0";
  std::string patient_id;
  std::string recording_id;
  CalendarTime start_datetime;
  int64_t num_records = 0;
  double record_duration_s = 1.0;
  std::vector<SignalSpec> signals;

  friend bool operator==(const EdfHeader&, const EdfHeader&) = default;
};

// One channel of continuous samples in physical units.
struct Recording {
  std::string patient_id;
  std::string channel_label;
  std::vector<double> samples;
  double fs = 0.0;
};

// Header plus the raw 16-bit digital samples of every signal.
struct EdfRaw {
  EdfHeader header;
  std::vector<std::vector<int16_t>> digital;
};

// Size of the fixed and per-signal header blocks.
inline constexpr std::size_t kEdfFixedHeaderBytes = 256;
inline constexpr std::size_t kEdfSignalHeaderBytes = 256;

EdfRaw ParseEdfRaw(std::span<const std::byte> bytes);
std::vector<std::byte> WriteEdfRaw(const EdfRaw& edf);

// Affine digital -> physical calibration. Endpoints map exactly.
double DigitalToPhysical(const SignalSpec& spec, int digital);
int16_t PhysicalToDigital(const SignalSpec& spec, double physical);

std::pair<EdfHeader, std::vector<Recording>> ParseEdf(std::span<const std::byte> bytes);

// Writes recordings as EDF. `header.signals[i]` describes recordings[i];
// samples_per_record and num_records must already be consistent with the
// sample counts.
std::vector<std::byte> WriteEdf(const EdfHeader& header, const std::vector<Recording>& recordings);

// Whitespace-trimmed, case-insensitive label match. Throws ChannelNotFound.
Recording SelectChannel(const std::vector<Recording>& recordings, std::string_view label);

std::vector<std::byte> ReadFileBytes(const std::string& path);
void WriteFileBytes(const std::string& path, std::span<const std::byte> bytes);

}  // namespace assr
