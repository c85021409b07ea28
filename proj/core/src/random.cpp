#include "sqseg/random.hpp"

namespace sqseg {

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t RngStream::next_u64() noexcept {
  // Two rounds so that nearby keys and counters decorrelate.
  return mix64(mix64(key_) ^ (counter_++ * 0xD1B54A32D192ED03ull));
}

double RngStream::uniform() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::int64_t RngStream::uniform_int(std::int64_t lo, std::int64_t hi) noexcept {
  if (hi <= lo) return lo;
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  // Rejection keeps the draw unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
  std::uint64_t r;
  do {
    r = next_u64();
  } while (r >= limit);
  return lo + static_cast<std::int64_t>(r % span);
}

RngStream RngStream::derive(std::uint64_t tag) const noexcept {
  return RngStream(mix64(key_ ^ mix64(tag + 0x632BE59BD9B4E019ull)));
}

}  // namespace sqseg
