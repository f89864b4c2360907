#ifndef MSA_LATTICE_HPP
#define MSA_LATTICE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

// Integer-lattice geometry: boxes, annuli, boundaries, coarse lattices and
// polynomial weights. Everything here is immutable after construction.

namespace msa {

using Site = std::vector<int>;

inline int sup_norm(const Site& x) {
    int m = 0;
    for (int c : x) m = std::max(m, std::abs(c));
    return m;
}

inline double euclid_norm(const Site& x) {
    double s = 0;
    for (int c : x) s += double(c) * c;
    return std::sqrt(s);
}

inline Site sub(const Site& a, const Site& b) {
    if (a.size() != b.size()) throw std::invalid_argument("site dimension mismatch");
    Site r(a.size());
    for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

// bracket <x> = (1 + |x|^2)^{1/2}, Euclidean
inline double bracket(const Site& x) {
    double s = 1;
    for (int c : x) s += double(c) * c;
    return std::sqrt(s);
}

enum class BoxNorm { Sup, Euclid };

// Half-open cube: y in Lambda_L(x) iff |y-x| < L/2 in the chosen norm.
// Sup-norm is the default; see the membership-norm switch below.
struct Box {
    Site center;
    double side = 0;  // L
    int dim = 0;
    BoxNorm norm = BoxNorm::Sup;

    Box() = default;
    Box(Site c, double L, BoxNorm n = BoxNorm::Sup)
        : center(std::move(c)), side(L), dim(int(center.size())), norm(n) {
        if (dim < 1) throw std::invalid_argument("Box: dimension must be >= 1");
        if (side < 1) throw std::invalid_argument("Box: side must be >= 1");
    }

    bool contains(const Site& y) const {
        if (int(y.size()) != dim) throw std::invalid_argument("Box::contains: dimension mismatch");
        Site r = sub(y, center);
        if (norm == BoxNorm::Sup) return sup_norm(r) < side / 2.0;
        return euclid_norm(r) < side / 2.0;
    }

    // largest integer coordinate offset strictly below L/2
    int radius() const { return int(std::ceil(side / 2.0)) - 1; }
};

struct Annulus {
    Site center;
    double outer = 0;  // L2
    double inner = 0;  // L1 < L2
    int dim = 0;
    BoxNorm norm = BoxNorm::Sup;

    Annulus() = default;
    Annulus(Site c, double L2, double L1, BoxNorm n = BoxNorm::Sup)
        : center(std::move(c)), outer(L2), inner(L1), dim(int(center.size())), norm(n) {
        if (!(inner < outer)) throw std::invalid_argument("Annulus: need L1 < L2");
    }

    Box outer_box() const { return Box(center, outer, norm); }
    Box inner_box() const { return Box(center, inner, norm); }

    bool contains(const Site& y) const {
        return outer_box().contains(y) && !inner_box().contains(y);
    }
};

// coarse spacing alpha_l = floor(3l/5)
inline int coarse_step(double l) {
    if (l <= 2) throw std::invalid_argument("coarse_step: scale too small");
    return int(std::floor(3.0 * l / 5.0));
}

namespace detail {

template <typename Pred>
void enumerate_lex(const Site& lo, const Site& hi, const Pred& emit) {
    int d = int(lo.size());
    Site cur = lo;
    while (true) {
        emit(cur);
        int i = d - 1;
        while (i >= 0) {
            if (cur[i] < hi[i]) {
                ++cur[i];
                break;
            }
            cur[i] = lo[i];
            --i;
        }
        if (i < 0) break;
    }
}

}  // namespace detail

// All lattice sites of the box in lexicographic order (first coordinate
// slowest). This order is the matrix index order used everywhere else.
inline std::vector<Site> box_sites(const Box& box) {
    int k = box.radius();
    Site lo(box.dim), hi(box.dim);
    for (int i = 0; i < box.dim; ++i) {
        lo[i] = box.center[i] - k;
        hi[i] = box.center[i] + k;
    }
    std::vector<Site> out;
    detail::enumerate_lex(lo, hi, [&](const Site& s) {
        if (box.norm == BoxNorm::Sup || box.contains(s)) out.push_back(s);
    });
    if (out.empty()) throw std::logic_error("box_sites: empty box");
    return out;
}

inline std::vector<Site> annulus_sites(const Annulus& a) {
    std::vector<Site> out;
    Box inner = a.inner_box();
    for (auto& s : box_sites(a.outer_box()))
        if (!inner.contains(s)) out.push_back(std::move(s));
    return out;
}

// (inner, outer) nearest-neighbor pairs across the box boundary.
inline std::vector<std::pair<Site, Site>> boundary_pairs(const Box& box) {
    std::vector<std::pair<Site, Site>> out;
    for (const auto& y : box_sites(box)) {
        for (int i = 0; i < box.dim; ++i) {
            for (int sgn : {+1, -1}) {
                Site yp = y;
                yp[i] += sgn;
                if (!box.contains(yp)) out.emplace_back(y, yp);
            }
        }
    }
    return out;
}

// Nodes of (alpha_l Z)^d inside a region. Coarse-scale statements require l > 10; probes
// running below that scale pass allow_small_scale explicitly.
template <typename Region>
std::vector<Site> coarse_nodes(double l, const Region& region, bool allow_small_scale = false) {
    if (l <= 10 && !allow_small_scale) throw std::invalid_argument("coarse_nodes: scale l must exceed 10");
    int step = coarse_step(l);
    int d = region.dim;
    double R = 0;
    if constexpr (std::is_same_v<Region, Annulus>) R = region.outer / 2.0;
    else R = region.side / 2.0;
    Site lo(d), hi(d);
    for (int i = 0; i < d; ++i) {
        lo[i] = int(std::floor((region.center[i] - R) / step));
        hi[i] = int(std::ceil((region.center[i] + R) / step));
    }
    std::vector<Site> out;
    detail::enumerate_lex(lo, hi, [&](const Site& t) {
        Site q(d);
        for (int i = 0; i < d; ++i) q[i] = t[i] * step;
        if (region.contains(q)) out.push_back(std::move(q));
    });
    return out;
}

// T_x weight: (T_a phi)(y) = <y-a>^nu phi(y)
struct Weight {
    double nu = 0;
    Site anchor;

    Weight(double nu_, Site anchor_) : nu(nu_), anchor(std::move(anchor_)) {
        if (nu <= double(anchor.size()) / 2.0)
            throw std::invalid_argument("Weight: need nu > d/2");
    }

    double at(const Site& y) const { return std::pow(bracket(sub(y, anchor)), nu); }
};

inline Eigen::VectorXd apply_weight(const Weight& w, const Eigen::VectorXd& v,
                                    const std::vector<Site>& sites, bool inverted = false) {
    if (v.size() != Eigen::Index(sites.size()))
        throw std::invalid_argument("apply_weight: vector/site-sequence size mismatch");
    Eigen::VectorXd out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        double wi = w.at(sites[size_t(i)]);
        out[i] = inverted ? v[i] / wi : v[i] * wi;
    }
    return out;
}

}  // namespace msa

#endif
