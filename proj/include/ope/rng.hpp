#pragma once

#include <cstdint>

namespace ope {

/// Counter-based generator: the i-th draw of stream `stream` under `seed` is a
/// pure function of (seed, stream, i). Records and Monte-Carlo trials each get
/// their own stream, so results do not depend on evaluation order.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept;

  std::uint64_t next_u64() noexcept;
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Standard normal via Box-Muller.
  double normal() noexcept;

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace ope
