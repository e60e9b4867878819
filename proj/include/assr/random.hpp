#pragma once

#include <cstdint>

namespace assr {

// SplitMix64 finalizer; derives independent stream seeds from one seed.
constexpr uint64_t MixSeed(uint64_t seed, uint64_t stream) {
  uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Stream identifiers; one per consumer of randomness in the pipeline.
enum SeedStream : uint64_t {
  kStreamSplit = 1,
  kStreamBalance = 2,
  kStreamDbn = 3,
  kStreamArchSearch = 4,
  kStreamFineTune = 5,
  kStreamGp = 6,
  kStreamRf = 7,
  kStreamSynth = 8,
};

}  // namespace assr
