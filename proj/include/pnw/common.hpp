#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

namespace pnw {

/// Failure categories used across the library. Every thrown error carries one
/// of these codes so callers can branch on the cause without parsing messages.
enum class ErrorCode {
  PartitionOverlap,
  PartitionIncomplete,
  TooManyClasses,
  ZeroDimension,
  ShapeMismatch,
  BadTarget,
  EmptyClass,
  DoubleLabelDetected,
  RoundLimitExceeded,
  FullTrainCheckFailed,
  ParseError,
  LabelRangeError,
  CountMismatch,
  VersionMismatch,
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::PartitionOverlap: return "PartitionOverlap";
    case ErrorCode::PartitionIncomplete: return "PartitionIncomplete";
    case ErrorCode::TooManyClasses: return "TooManyClasses";
    case ErrorCode::ZeroDimension: return "ZeroDimension";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::BadTarget: return "BadTarget";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::DoubleLabelDetected: return "DoubleLabelDetected";
    case ErrorCode::RoundLimitExceeded: return "RoundLimitExceeded";
    case ErrorCode::FullTrainCheckFailed: return "FullTrainCheckFailed";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::LabelRangeError: return "LabelRangeError";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

/// SplitMix64 step; used only for deriving seeds, never as the main stream.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent child seed from a base seed and a (stream, index)
/// pair. Parallel consumers each get their own derived seed so results do not
/// depend on scheduling. The chain is fixed: changing it changes every
/// reproducible artifact downstream.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream,
                                 std::uint64_t index = 0) {
  return splitmix64(splitmix64(base ^ splitmix64(stream)) + index);
}

// Stream tags for derive_seed. One tag per independent consumer.
namespace seed_stream {
constexpr std::uint64_t kAnnInit = 1;
constexpr std::uint64_t kExpatDraw = 2;
constexpr std::uint64_t kSgdShuffle = 3;
constexpr std::uint64_t kGdtShuffle = 4;
constexpr std::uint64_t kEvalTie = 5;
}  // namespace seed_stream

/// Deterministic pseudo-random source. The raw stream is std::mt19937_64,
/// whose output sequence is fixed by the C++ standard and therefore identical
/// on every platform. The bounded and real samplers below are implemented
/// here because the standard <random> distributions are not portable.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform index in [0, n). Unbiased via rejection sampling.
  std::size_t uniform_index(std::size_t n) {
    if (n == 0) fail(ErrorCode::BadTarget, "uniform_index over empty range");
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t threshold = (0 - bound) % bound;  // 2^64 mod n
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return static_cast<std::size_t>(r % bound);
    }
  }

  /// Uniform double in [0, 1), 53 bits of precision.
  double uniform_real() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi).
  double uniform_range(double lo, double hi) {
    return lo + (hi - lo) * uniform_real();
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace pnw
