#ifndef MSA_DISORDER_HPP
#define MSA_DISORDER_HPP

#include <cstdint>
#include <functional>
#include <stdexcept>

#include "msa/lattice.hpp"

// Deterministic random potential. Values are a pure function of
// (master seed, site coordinates) so the field restricted to any sub-box is
// well-defined without materializing anything: omega is the SAME across all
// nested scales of one experiment.

namespace msa {

struct Distribution {
    enum class Kind { Bernoulli, Uniform, Point };
    Kind kind = Kind::Bernoulli;
    double v0 = 0, v1 = 1;  // Bernoulli support; Point uses v0
    double q = 0.5;         // P(value = v1)
    double a = 0, b = 1;    // Uniform bounds
    double lambda = 1;      // coupling

    static Distribution bernoulli(double v0, double v1, double q, double lambda) {
        if (!(q > 0 && q < 1)) throw std::invalid_argument("Distribution: Bernoulli weight must lie in (0,1)");
        if (v0 == v1) throw std::invalid_argument("Distribution: Bernoulli support needs two points");
        Distribution d;
        d.kind = Kind::Bernoulli;
        d.v0 = v0; d.v1 = v1; d.q = q; d.lambda = lambda;
        return d;
    }
    static Distribution uniform(double a, double b, double lambda) {
        if (!(a < b)) throw std::invalid_argument("Distribution: Uniform needs a < b");
        Distribution d;
        d.kind = Kind::Uniform;
        d.a = a; d.b = b; d.lambda = lambda;
        return d;
    }
    static Distribution point(double v0, double lambda) {
        Distribution d;
        d.kind = Kind::Point;
        d.v0 = v0; d.lambda = lambda;
        return d;
    }

    double max_abs_support() const {
        switch (kind) {
            case Kind::Bernoulli: return std::max(std::abs(v0), std::abs(v1));
            case Kind::Uniform: return std::max(std::abs(a), std::abs(b));
            case Kind::Point: return std::abs(v0);
        }
        return 0;
    }
};

namespace detail {

inline uint64_t splitmix64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// counter-based: hash of (seed, coords), no stream state
inline uint64_t site_hash(uint64_t seed, const Site& s) {
    uint64_t h = splitmix64(seed);
    for (int c : s) h = splitmix64(h ^ uint64_t(int64_t(c)));
    return h;
}

inline double to_unit(uint64_t h) {
    return double(h >> 11) * 0x1.0p-53;  // [0,1)
}

}  // namespace detail

struct DisorderField {
    uint64_t seed = 0;
    Distribution dist;

    DisorderField() = default;
    DisorderField(uint64_t seed_, Distribution d) : seed(seed_), dist(std::move(d)) {}

    double potential_at(const Site& site) const {
        double u = detail::to_unit(detail::site_hash(seed, site));
        double v = 0;
        switch (dist.kind) {
            case Distribution::Kind::Bernoulli: v = (u < dist.q) ? dist.v1 : dist.v0; break;
            case Distribution::Kind::Uniform: v = dist.a + u * (dist.b - dist.a); break;
            case Distribution::Kind::Point: v = dist.v0; break;
        }
        return dist.lambda * v;
    }

    // independent field with a derived seed, for exterior rerandomization
    DisorderField reseeded(uint64_t salt) const {
        return DisorderField(detail::splitmix64(seed ^ salt ^ 0xa5a5a5a5a5a5a5a5ULL), dist);
    }
};

// derived seed for Monte Carlo sample `index` of a run keyed by `master`
inline uint64_t sample_seed(uint64_t master, uint64_t index) {
    return detail::splitmix64(detail::splitmix64(master) ^ index);
}

using PotentialFn = std::function<double(const Site&)>;

// F_Lambda-measurability harness: true iff the statistic is unchanged when
// the potential outside `box` is rerandomized `trials` times.
inline bool event_sigma_algebra_check(const DisorderField& field, const Box& box,
                                      const std::function<double(const PotentialFn&)>& statistic,
                                      int trials = 100) {
    PotentialFn base = [&](const Site& s) { return field.potential_at(s); };
    double ref = statistic(base);
    for (int t = 1; t <= trials; ++t) {
        DisorderField ext = field.reseeded(uint64_t(t));
        PotentialFn mixed = [&](const Site& s) {
            return box.contains(s) ? field.potential_at(s) : ext.potential_at(s);
        };
        if (statistic(mixed) != ref) return false;
    }
    return true;
}

}  // namespace msa

#endif
