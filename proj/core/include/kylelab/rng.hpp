#pragma once

#include <array>
#include <cstdint>

namespace kylelab {

// Philox4x32-10 block function (Salmon et al. counter-based generator).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

// One independent substream keyed by (seed, stream, index). The n-th draw of a
// substream depends only on those three values and n, never on which thread
// produced it or how many other substreams exist.
class Substream {
 public:
  Substream(std::uint64_t seed, std::uint32_t stream, std::uint64_t index)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream), index_(index) {}

  // Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform();
  double normal();

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::uint32_t stream_;
  std::uint64_t index_;
  std::uint32_t block_ = 0;
  std::array<std::uint32_t, 4> buf_{};
  int used_ = 4;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace kylelab
