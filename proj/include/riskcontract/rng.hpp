#ifndef RISKCONTRACT_RNG_HPP
#define RISKCONTRACT_RNG_HPP

// Counter-based normal draws. Philox4x32-10 (Salmon et al., "Parallel random
// numbers: as easy as 1, 2, 3") keyed by the seed and addressed by
// (path, step, block). Any draw can be regenerated in isolation, so paths can
// run in any order and paired runs see identical Brownian increments.

#include <array>
#include <cmath>
#include <cstdint>

#include <Eigen/Dense>

namespace riskcontract {

class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      ctr = single_round(ctr, key);
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static Counter single_round(const Counter& c, const Key& k) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

/// Standard normal vectors addressed by (path, step).
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

  /// Fills `out` with iid N(0, 1) draws for the given path and step.
  void fill(std::uint64_t path, std::uint64_t step, Eigen::Ref<Eigen::VectorXd> out) const {
    const auto n = out.size();
    for (Eigen::Index block = 0; 2 * block < n; ++block) {
      const Philox4x32::Counter ctr{static_cast<std::uint32_t>(step),
                                    static_cast<std::uint32_t>(step >> 32),
                                    static_cast<std::uint32_t>(path),
                                    static_cast<std::uint32_t>((path >> 32) << 16 |
                                                               static_cast<std::uint64_t>(block))};
      const auto w = Philox4x32::generate(ctr, key_);
      // Two 53-bit uniforms, u1 in (0, 1], u2 in [0, 1).
      const std::uint64_t a = (static_cast<std::uint64_t>(w[0]) << 32 | w[1]) >> 11;
      const std::uint64_t b = (static_cast<std::uint64_t>(w[2]) << 32 | w[3]) >> 11;
      const double u1 = (static_cast<double>(a) + 1.0) * 0x1.0p-53;
      const double u2 = static_cast<double>(b) * 0x1.0p-53;
      const double radius = std::sqrt(-2.0 * std::log(u1));
      const double angle = 2.0 * M_PI * u2;
      out(2 * block) = radius * std::cos(angle);
      if (2 * block + 1 < n) out(2 * block + 1) = radius * std::sin(angle);
    }
  }

  Eigen::VectorXd draw(std::uint64_t path, std::uint64_t step, Eigen::Index n) const {
    Eigen::VectorXd v(n);
    fill(path, step, v);
    return v;
  }

 private:
  Philox4x32::Key key_;
};

}  // namespace riskcontract

#endif  // RISKCONTRACT_RNG_HPP
