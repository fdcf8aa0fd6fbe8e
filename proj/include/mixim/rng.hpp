#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace mixim {

/// Counter-based random stream (Philox4x32-10).
///
/// The 64-bit seed is the Philox key; the stream id occupies the upper half of
/// the 128-bit counter, so distinct stream ids walk disjoint counter ranges and
/// yield independent sequences. A stream is cheap to copy and fully determined
/// by (seed, stream_id, position).
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed = 0, std::uint64_t stream_id = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return next_u64(); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  /// Independent child stream; deterministic in (seed, stream_id, key).
  RngStream substream(std::uint64_t key) const;

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  /// Uniform on the open interval (0, 1) with 53 bits of resolution.
  double uniform();
  double normal();
  double exponential();
  /// Gamma(shape, 1).
  double gamma(double shape);
  double chi_square(double df);

  /// Raw Philox4x32-10 block function, exposed for known-answer tests.
  static std::array<std::uint32_t, 4> philox(std::array<std::uint32_t, 4> ctr,
                                             std::array<std::uint32_t, 2> key);

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace mixim
