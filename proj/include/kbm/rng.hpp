#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace kbm {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Chosen over
// <random> engines because path streams must be keyed by (seed, path_index)
// and produce identical output regardless of the order in which paths are
// simulated across workers.
struct Philox4x32 {
    static constexpr uint32_t kMult0 = 0xD2511F53u;
    static constexpr uint32_t kMult1 = 0xCD9E8D57u;
    static constexpr uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr uint32_t kWeyl1 = 0xBB67AE85u;

    static std::array<uint32_t, 4> block(const std::array<uint32_t, 4>& ctr,
                                         const std::array<uint32_t, 2>& key) {
        std::array<uint32_t, 4> x = ctr;
        uint32_t k0 = key[0], k1 = key[1];
        for (int round = 0; round < 10; ++round) {
            const uint64_t p0 = static_cast<uint64_t>(kMult0) * x[0];
            const uint64_t p1 = static_cast<uint64_t>(kMult1) * x[2];
            const uint32_t hi0 = static_cast<uint32_t>(p0 >> 32);
            const uint32_t lo0 = static_cast<uint32_t>(p0);
            const uint32_t hi1 = static_cast<uint32_t>(p1 >> 32);
            const uint32_t lo1 = static_cast<uint32_t>(p1);
            x = {hi1 ^ x[1] ^ k0, lo1, hi0 ^ x[3] ^ k1, lo0};
            k0 += kWeyl0;
            k1 += kWeyl1;
        }
        return x;
    }
};

// Inverse of the standard normal CDF, Wichura's PPND16 (AS 241), relative
// error below 1e-15. Rational approximations only; log/sqrt in the tails.
inline double inverse_normal_cdf(double p) {
    const double q = p - 0.5;
    if (q >= -0.425 && q <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                     6.7265770927008700853e+4) * r +
                    4.5921953931549871457e+4) * r +
                   1.3731693765509461125e+4) * r +
                  1.9715909503065514427e+3) * r +
                 1.3314166789178437745e+2) * r +
                3.3871328727963666080e+0) /
               (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                     3.9307895800092710610e+4) * r +
                    2.1213794301586595867e+4) * r +
                   5.3941960214247511077e+3) * r +
                  6.8718700749205790830e+2) * r +
                 4.2313330701600911252e+1) * r +
                1.0);
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                    2.41780725177450611770e-1) * r +
                   1.27045825245236838258e+0) * r +
                  3.64784832476320460504e+0) * r +
                 5.76949722146069140550e+0) * r +
                4.63033784615654529590e+0) * r +
               1.42343711074968357734e+0) /
              (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                    1.51986665636164571966e-2) * r +
                   1.48103976427480074590e-1) * r +
                  6.89767334985100004550e-1) * r +
                 1.67638483018380384940e+0) * r +
                2.05319162663775882187e+0) * r +
               1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                    1.24266094738807843860e-3) * r +
                   2.65321895265761230930e-2) * r +
                  2.96560571828504891230e-1) * r +
                 1.78482653991729133580e+0) * r +
                5.46378491116411436990e+0) * r +
               6.65790464350110377720e+0) /
              (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                    1.84631831751005468180e-5) * r +
                   7.86869131145613259100e-4) * r +
                  1.48753612908506148525e-2) * r +
                 1.36929880922735805310e-1) * r +
                5.99832206555887937690e-1) * r +
               1.0);
    }
    return q < 0.0 ? -val : val;
}

// One reproducible random stream. Streams are identified by a 64-bit id;
// the id goes into the counter, the seed into the key, so any (seed, id)
// pair yields an independent sequence that does not depend on how many
// draws other streams consumed.
class RandomStream {
  public:
    RandomStream(uint64_t seed, uint64_t stream_id)
        : key_{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)},
          id_lo_(static_cast<uint32_t>(stream_id)),
          id_hi_(static_cast<uint32_t>(stream_id >> 32)) {}

    // Uniform on [0, 1), 53-bit resolution.
    double uniform() {
        refill_if_needed();
        const uint64_t hi = buf_[pos_], lo = buf_[pos_ + 1];
        pos_ += 2;
        const uint64_t bits = (hi << 32) | lo;
        return static_cast<double>(bits >> 11) * 0x1.0p-53;
    }

    // Standard normal by inverse-CDF: exactly one uniform per draw, so the
    // stream position is a simple function of the draw count. p is placed on
    // the cell-midpoint grid (k+1/2)*2^-52, keeping it strictly inside (0,1).
    double normal() {
        refill_if_needed();
        const uint64_t hi = buf_[pos_], lo = buf_[pos_ + 1];
        pos_ += 2;
        const uint64_t bits = (hi << 32) | lo;
        const double p = (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
        return inverse_normal_cdf(p);
    }

    // Uniform integer in [0, n).
    uint64_t uniform_index(uint64_t n) {
        refill_if_needed();
        const uint64_t hi = buf_[pos_], lo = buf_[pos_ + 1];
        pos_ += 2;
        return ((hi << 32) | lo) % n;
    }

  private:
    void refill_if_needed() {
        if (pos_ + 1 < 4) return;
        const auto out = Philox4x32::block({block_lo_, block_hi_, id_lo_, id_hi_}, key_);
        buf_ = out;
        pos_ = 0;
        if (++block_lo_ == 0) ++block_hi_;
    }

    std::array<uint32_t, 2> key_;
    uint32_t id_lo_, id_hi_;
    uint32_t block_lo_ = 0, block_hi_ = 0;
    std::array<uint32_t, 4> buf_{};
    unsigned pos_ = 4;  // force refill on first draw
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Stream-id layout used across the project, kept in one place so that the
// different consumers can never collide.
namespace stream_ids {
inline constexpr uint64_t kSolverSalt = 0x0100000000000000ull;   // per (node, replicate)
inline constexpr uint64_t kFinalSweepSalt = 0x0200000000000000ull;
inline constexpr uint64_t kBarrierSalt = 0x0300000000000000ull;
inline constexpr uint64_t kVerifySalt = 0x0400000000000000ull;
inline constexpr uint64_t kSamplerSalt = 0x0500000000000000ull;
inline constexpr uint64_t kCheckerSalt = 0x0600000000000000ull;
inline constexpr uint64_t kOracleSalt = 0x0700000000000000ull;
}  // namespace stream_ids

}  // namespace kbm
