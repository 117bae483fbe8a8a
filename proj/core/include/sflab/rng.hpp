#pragma once

#include <cmath>
#include <cstdint>

namespace sflab {

/// Counter-based random numbers (Philox4x32-10).
///
/// Every draw is a pure function of (seed, stream, path, step, slot), so
/// ensembles are reproducible under any parallel schedule and increments can
/// be regenerated on demand instead of being stored. `step` is a signed
/// absolute index on the global time grid, which makes flows started at
/// different times share their Brownian increments on overlapping windows.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) {
        std::uint64_t z = seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1));
        std::uint64_t k = splitmix(z);
        key0_ = static_cast<std::uint32_t>(k);
        key1_ = static_cast<std::uint32_t>(k >> 32);
    }

    /// Two iid standard normals for pair index `slot` of (path, step).
    void normal_pair(std::int64_t path, std::int64_t step, std::uint32_t slot,
                     double& z0, double& z1) const {
        std::uint32_t c[4];
        block(path, step, slot, c);
        z0 = normal_quantile(to_open_unit((static_cast<std::uint64_t>(c[0]) << 32) | c[1]));
        z1 = normal_quantile(to_open_unit((static_cast<std::uint64_t>(c[2]) << 32) | c[3]));
    }

    /// Inverse standard normal CDF (Wichura's AS241 rational approximation,
    /// accurate to full double precision).
    static double normal_quantile(double u) {
        const double q = u - 0.5;
        if (std::abs(q) <= 0.425) {
            const double r = 0.180625 - q * q;
            const double num =
                q * (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                           6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
                         1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
                       1.3314166789178437745e+2) * r + 3.3871328727963666080e+0);
            const double den =
                ((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                     3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
                   5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
                 4.2313330701600911252e+1) * r + 1.0;
            return num / den;
        }
        double r = (q < 0.0) ? u : 1.0 - u;
        r = std::sqrt(-std::log(r));
        double z;
        if (r <= 5.0) {
            r -= 1.6;
            const double num =
                ((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                     2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
                   3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
                 4.63033784615654529590e+0) * r + 1.42343711074968357734e+0;
            const double den =
                ((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                     1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                   6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
                 2.05319162663775882187e+0) * r + 1.0;
            z = num / den;
        } else {
            r -= 5.0;
            const double num =
                ((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                     1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                   2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
                 5.46378491116411436990e+0) * r + 6.65790464350110377720e+0;
            const double den =
                ((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                     1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                   1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
                 5.99832206555887937690e-1) * r + 1.0;
            z = num / den;
        }
        return (q < 0.0) ? -z : z;
    }

    /// First n standard normals of (path, step).
    void fill_normals(std::int64_t path, std::int64_t step, int n, double* out) const {
        for (int i = 0; i < n; i += 2) {
            double z0, z1;
            normal_pair(path, step, static_cast<std::uint32_t>(i / 2), z0, z1);
            out[i] = z0;
            if (i + 1 < n) out[i + 1] = z1;
        }
    }

    /// One uniform in (0,1) for (path, step, slot).
    double uniform(std::int64_t path, std::int64_t step, std::uint32_t slot) const {
        std::uint32_t c[4];
        block(path, step, slot, c);
        return to_open_unit((static_cast<std::uint64_t>(c[0]) << 32) | c[1]);
    }

private:
    std::uint32_t key0_, key1_;

    static std::uint64_t splitmix(std::uint64_t& x) {
        x += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    static void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
        const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
        hi = static_cast<std::uint32_t>(p >> 32);
        lo = static_cast<std::uint32_t>(p);
    }

    void block(std::int64_t path, std::int64_t step, std::uint32_t slot, std::uint32_t out[4]) const {
        const std::uint64_t us = static_cast<std::uint64_t>(step);
        const std::uint64_t up = static_cast<std::uint64_t>(path);
        std::uint32_t c0 = static_cast<std::uint32_t>(us);
        std::uint32_t c1 = static_cast<std::uint32_t>(us >> 32);
        std::uint32_t c2 = static_cast<std::uint32_t>(up);
        std::uint32_t c3 = slot ^ (static_cast<std::uint32_t>(up >> 32) << 16);
        std::uint32_t k0 = key0_, k1 = key1_;
        for (int round = 0; round < 10; ++round) {
            std::uint32_t hi0, lo0, hi1, lo1;
            mulhilo(0xD2511F53u, c0, hi0, lo0);
            mulhilo(0xCD9E8D57u, c2, hi1, lo1);
            const std::uint32_t n0 = hi1 ^ c1 ^ k0;
            const std::uint32_t n1 = lo1;
            const std::uint32_t n2 = hi0 ^ c3 ^ k1;
            const std::uint32_t n3 = lo0;
            c0 = n0; c1 = n1; c2 = n2; c3 = n3;
            k0 += 0x9E3779B9u;
            k1 += 0xBB67AE85u;
        }
        out[0] = c0; out[1] = c1; out[2] = c2; out[3] = c3;
    }

    static double to_open_unit(std::uint64_t x) {
        // 52 mantissa bits, shifted off zero so log() is always finite
        return (static_cast<double>(x >> 12) + 0.5) * 0x1.0p-52;
    }
};

} // namespace sflab
