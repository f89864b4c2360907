#ifndef MSA_PERCOLATION_HPP
#define MSA_PERCOLATION_HPP

#include <deque>
#include <optional>
#include <stdexcept>
#include <vector>

#include "msa/modes.hpp"
#include "msa/resolvent.hpp"

// Coarse-lattice good/bad node fields on annuli, bad-path detection,
// good-shell extraction, and the shell -> spectrum distance bound.
//
// Shell nodes are restricted to the coarse nodes whose fattened box
// Lambda_{l+2}(r) stays inside the annulus, mirroring the bad-path endpoints
// (from the L1+l+2 edge to the L2-l-2 edge) used in the probability lemma.
// Bad connectivity uses *-adjacency (the 3^d - 1 coarse neighbors); a shell
// is valid when removing it *-disconnects the inner region from the outer
// one.

namespace msa {

struct ShellInvariantViolated : std::logic_error {
    using std::logic_error::logic_error;
};

// Eligible coarse geometry of an annulus. Tests may also build these
// synthetically (explicit node list with ring flags).
struct CoarseAnnulus {
    Site center;
    double l = 0;
    int step = 0;  // alpha_l
    double L1 = 0, L2 = 0;
    int dim = 0;
    std::vector<Site> nodes;       // eligible shell nodes, lexicographic
    std::vector<char> inner_ring;  // touches the inner eligibility edge
    std::vector<char> outer_ring;  // touches the outer eligibility edge

    int index_of(const Site& s) const {
        auto it = std::lower_bound(nodes.begin(), nodes.end(), s);
        if (it == nodes.end() || *it != s) return -1;
        return int(it - nodes.begin());
    }

    // the 3^d - 1 coarse neighbor positions of q
    std::vector<Site> star_neighbors(const Site& q) const {
        std::vector<Site> out;
        Site delta(size_t(dim), -1);
        while (true) {
            bool zero = true;
            for (int c : delta) zero = zero && (c == 0);
            if (!zero) {
                Site nb = q;
                for (int i = 0; i < dim; ++i) nb[i] += delta[i] * step;
                out.push_back(std::move(nb));
            }
            int i = dim - 1;
            while (i >= 0 && delta[i] == 1) delta[i--] = -1;
            if (i < 0) break;
            ++delta[i];
        }
        return out;
    }
};

// fattened box Lambda_{l+2}(r) subset of the annulus region
inline bool fattened_box_contained(const Site& r, double l, const Annulus& ann) {
    Box fat(r, l + 2, ann.norm);
    int k = fat.radius();
    Box outer = ann.outer_box(), inner = ann.inner_box();
    // check the extreme corners plus the inward-most point; for sup-norm
    // regions containment is determined per coordinate, so scan corners
    Site lo(size_t(ann.dim)), hi(size_t(ann.dim));
    for (int i = 0; i < ann.dim; ++i) {
        lo[i] = r[i] - k;
        hi[i] = r[i] + k;
    }
    // all corners must be in the outer box
    for (unsigned mask = 0; mask < (1u << ann.dim); ++mask) {
        Site corner(size_t(ann.dim));
        for (int i = 0; i < ann.dim; ++i) corner[i] = (mask >> i & 1) ? hi[i] : lo[i];
        if (!outer.contains(corner)) return false;
    }
    // the point of the fattened box closest to the center must avoid the inner box
    Site closest(size_t(ann.dim));
    for (int i = 0; i < ann.dim; ++i)
        closest[i] = std::clamp(ann.center[i], lo[i], hi[i]);
    return !inner.contains(closest);
}

inline CoarseAnnulus make_coarse_annulus(const Annulus& ann, double l,
                                         bool allow_small_scale = false) {
    CoarseAnnulus ca;
    ca.center = ann.center;
    ca.l = l;
    ca.step = coarse_step(l);
    ca.L1 = ann.inner;
    ca.L2 = ann.outer;
    ca.dim = ann.dim;
    for (auto& q : coarse_nodes(l, ann, allow_small_scale))
        if (fattened_box_contained(q, l, ann)) ca.nodes.push_back(std::move(q));
    if (ca.nodes.empty())
        throw std::invalid_argument("make_coarse_annulus: annulus holds no eligible coarse ring");
    ca.inner_ring.assign(ca.nodes.size(), 0);
    ca.outer_ring.assign(ca.nodes.size(), 0);
    for (size_t i = 0; i < ca.nodes.size(); ++i) {
        int ri = sup_norm(sub(ca.nodes[i], ca.center));
        for (const auto& nb : ca.star_neighbors(ca.nodes[i])) {
            if (ca.index_of(nb) >= 0) continue;
            int rn = sup_norm(sub(nb, ca.center));
            if (rn < ri) ca.inner_ring[i] = 1;
            if (rn > ri) ca.outer_ring[i] = 1;
        }
    }
    return ca;
}

enum class NodeKind { Good, Pgood };

struct NodeField {
    CoarseAnnulus geom;
    std::vector<char> good;
    // provenance
    double E0 = 0, m = 0, eta = 0, fraction = 0.01;
    NodeKind kind = NodeKind::Good;
    int near_singular_incidents = 0;
};

// pgood: every sub-box Lambda_{l'}(r'), r' in C_{l'} cap Lambda_l(r), good,
// with l' = l^{1/(1+r_ratio)}
inline bool pgood_box(const Box& box, const DisorderField& field, double E, double m,
                      double eta, double fraction, double r_ratio) {
    double lp = std::pow(box.side, 1.0 / (1.0 + r_ratio));
    for (const auto& rp : coarse_nodes(lp, box, /*allow_small_scale=*/true)) {
        FiniteHamiltonian fh = assemble(Box(rp, lp, box.norm), field);
        try {
            if (!classify_box(fh, E, m, eta, fraction).good) return false;
        } catch (const NearSingular&) {
            return false;
        }
    }
    return true;
}

inline NodeField label_nodes(const Annulus& ann, double l, const DisorderField& field,
                             double E0, double m, double eta, double fraction = 0.01,
                             NodeKind kind = NodeKind::Good, double r_ratio = 0.2,
                             bool allow_small_scale = false) {
    NodeField nf;
    nf.geom = make_coarse_annulus(ann, l, allow_small_scale);
    nf.E0 = E0;
    nf.m = m;
    nf.eta = eta;
    nf.fraction = fraction;
    nf.kind = kind;
    nf.good.assign(nf.geom.nodes.size(), 0);
    for (size_t i = 0; i < nf.geom.nodes.size(); ++i) {
        Box node_box(nf.geom.nodes[i], l, ann.norm);
        if (kind == NodeKind::Pgood) {
            nf.good[i] = pgood_box(node_box, field, E0, m, eta, fraction, r_ratio) ? 1 : 0;
        } else {
            try {
                nf.good[i] = classify_box(assemble(node_box, field), E0, m, eta, fraction).good ? 1 : 0;
            } catch (const NearSingular&) {
                nf.good[i] = 0;
                ++nf.near_singular_incidents;
            }
        }
    }
    return nf;
}

struct BadPath {
    bool exists = false;
    std::vector<Site> witness;
};

// *-connected chain of bad nodes joining the innermost eligible ring to the
// outermost one
inline BadPath bad_path_exists(const NodeField& nf) {
    const CoarseAnnulus& g = nf.geom;
    size_t n = g.nodes.size();
    std::vector<int> prev(n, -2);  // -2 unvisited, -1 root
    std::deque<size_t> queue;
    for (size_t i = 0; i < n; ++i)
        if (!nf.good[i] && g.inner_ring[i]) {
            prev[i] = -1;
            queue.push_back(i);
        }
    while (!queue.empty()) {
        size_t cur = queue.front();
        queue.pop_front();
        if (g.outer_ring[cur]) {
            BadPath bp;
            bp.exists = true;
            for (int i = int(cur); i >= 0; i = prev[size_t(i)])
                bp.witness.push_back(g.nodes[size_t(i)]);
            std::reverse(bp.witness.begin(), bp.witness.end());
            return bp;
        }
        for (const auto& nb : g.star_neighbors(g.nodes[cur])) {
            int j = g.index_of(nb);
            if (j >= 0 && !nf.good[size_t(j)] && prev[size_t(j)] == -2) {
                prev[size_t(j)] = int(cur);
                queue.push_back(size_t(j));
            }
        }
    }
    return {};
}

struct Shell {
    std::vector<Site> nodes;       // A: the good contour
    std::vector<Site> inner_part;  // B: eligible nodes on the inner side (excl. A)
    std::vector<Site> outer_part;  // C: eligible nodes on the outer side
    double min_separation = 0;     // min Euclidean distance between B and C
    bool fully_contained = true;   // by eligibility construction
};

namespace detail {

// Component structure of the eligible nodes minus a tentative shell A,
// seeded from the inner ring; returns false if inner and outer regions stay
// *-connected (A fails to separate).
inline bool shell_separates(const CoarseAnnulus& g, const std::vector<char>& in_shell,
                            std::vector<char>& inner_side) {
    size_t n = g.nodes.size();
    inner_side.assign(n, 0);
    std::deque<size_t> queue;
    for (size_t i = 0; i < n; ++i)
        if (!in_shell[i] && g.inner_ring[i]) {
            inner_side[i] = 1;
            queue.push_back(i);
        }
    while (!queue.empty()) {
        size_t cur = queue.front();
        queue.pop_front();
        if (g.outer_ring[cur]) return false;
        for (const auto& nb : g.star_neighbors(g.nodes[cur])) {
            int j = g.index_of(nb);
            if (j >= 0 && !in_shell[size_t(j)] && !inner_side[size_t(j)]) {
                inner_side[size_t(j)] = 1;
                queue.push_back(size_t(j));
            }
        }
    }
    return true;
}

}  // namespace detail

// Absent iff a bad path crosses; otherwise the outer contour of the inner
// bad-cluster region. Shell invariants are verified post-hoc; a failure is an
// internal geometry error, never silently returned.
inline std::optional<Shell> extract_shell(const NodeField& nf) {
    if (bad_path_exists(nf).exists) return std::nullopt;
    const CoarseAnnulus& g = nf.geom;
    size_t n = g.nodes.size();
    // B* = bad *-clusters touching the inner ring; the hole is implicitly part
    // of the inner region through the inner_ring flags
    std::vector<char> bstar(n, 0);
    std::deque<size_t> queue;
    for (size_t i = 0; i < n; ++i)
        if (!nf.good[i] && g.inner_ring[i]) {
            bstar[i] = 1;
            queue.push_back(i);
        }
    while (!queue.empty()) {
        size_t cur = queue.front();
        queue.pop_front();
        for (const auto& nb : g.star_neighbors(g.nodes[cur])) {
            int j = g.index_of(nb);
            if (j >= 0 && !nf.good[size_t(j)] && !bstar[size_t(j)]) {
                bstar[size_t(j)] = 1;
                queue.push_back(size_t(j));
            }
        }
    }
    // A = good nodes at *-distance 1 from B* or on the inner ring
    std::vector<char> in_shell(n, 0);
    for (size_t i = 0; i < n; ++i) {
        if (!nf.good[i]) continue;
        if (g.inner_ring[i]) {
            in_shell[i] = 1;
            continue;
        }
        for (const auto& nb : g.star_neighbors(g.nodes[i])) {
            int j = g.index_of(nb);
            if (j >= 0 && bstar[size_t(j)]) {
                in_shell[i] = 1;
                break;
            }
        }
    }
    Shell shell;
    for (size_t i = 0; i < n; ++i) {
        if (in_shell[i]) {
            if (!nf.good[i]) throw ShellInvariantViolated("extract_shell: bad node in shell");
            shell.nodes.push_back(g.nodes[i]);
        }
    }
    if (shell.nodes.empty()) throw ShellInvariantViolated("extract_shell: empty contour");
    std::vector<char> inner_side;
    if (!detail::shell_separates(g, in_shell, inner_side))
        throw ShellInvariantViolated("extract_shell: contour does not separate inner from outer");
    shell.min_separation = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < n; ++i) {
        if (in_shell[i]) continue;
        if (inner_side[i]) shell.inner_part.push_back(g.nodes[i]);
        else shell.outer_part.push_back(g.nodes[i]);
    }
    for (const auto& b : shell.inner_part)
        for (const auto& c : shell.outer_part)
            shell.min_separation = std::min(shell.min_separation, euclid_norm(sub(b, c)));
    // eligibility already guarantees Lambda_{l+2}(node) inside the annulus
    shell.fully_contained = true;
    return shell;
}

struct ShellDistanceBound {
    double lhs = 0;  // dist(E, sigma^I(H_{L2})) * W(x0;E)
    double rhs = 0;  // L2^{2nu} e^{-m l / 3}
    bool holds = false;
    double dist = 0;
    double w = 0;
};

inline ShellDistanceBound shell_distance_bound(const Shell& shell, const EigenSystem& sys_L2,
                                               const Interval& I, double E, const ModeProxy& proxy,
                                               const Site& x0, double m, double nu, double l,
                                               double L2) {
    (void)shell;  // validity is the caller's precondition (extract_shell verified it)
    ShellDistanceBound out;
    double dist = std::numeric_limits<double>::infinity();
    for (double ev : eigenvalues_in_interval(sys_L2, I)) dist = std::min(dist, std::abs(E - ev));
    out.dist = dist;
    out.w = w_point(proxy, x0);
    out.lhs = (std::isinf(dist)) ? std::numeric_limits<double>::infinity() : dist * out.w;
    if (out.w == 0) out.lhs = 0;
    out.rhs = std::pow(L2, 2 * nu) * std::exp(-m * l / 3.0);
    out.holds = out.lhs <= out.rhs;
    return out;
}

struct WilsonInterval {
    double estimate = 0, lo = 0, hi = 0;
};

inline WilsonInterval wilson_interval(int successes, int trials, double z = 1.959963984540054) {
    WilsonInterval w;
    if (trials <= 0) return w;
    double p = double(successes) / trials;
    double z2 = z * z;
    double denom = 1.0 + z2 / trials;
    double mid = (p + z2 / (2.0 * trials)) / denom;
    double half = z / denom * std::sqrt(p * (1 - p) / trials + z2 / (4.0 * trials * trials));
    w.estimate = p;
    w.lo = std::max(0.0, mid - half);
    w.hi = std::min(1.0, mid + half);
    return w;
}

struct ShellProbability {
    WilsonInterval shell_prob;
    WilsonInterval node_bad_prob;
    double nominal_bound = 0;   // lower bound from the path-counting lemma
    double measured_p = 0;    // p with node bad prob = l^{-pd}
    int samples = 0;
};

// Monte Carlo estimate of P{good shell in Lambda_{L2,L1}}, reported alongside
// the path-counting lower bound evaluated at the measured per-node bad
// probability.
inline ShellProbability shell_probability(const Distribution& dist, uint64_t master_seed,
                                          int d, double l, double L1, double L2, double E0,
                                          double m, double eta, int nsamples,
                                          double fraction = 0.01,
                                          bool allow_small_scale = false) {
    Site origin(size_t(d), 0);
    Annulus ann(origin, L2, L1);
    ShellProbability out;
    out.samples = nsamples;
    int shells = 0, bad_nodes = 0, total_nodes = 0;
    for (int s = 0; s < nsamples; ++s) {
        DisorderField field(master_seed + uint64_t(s), dist);
        NodeField nf = label_nodes(ann, l, field, E0, m, eta, fraction, NodeKind::Good, 0.2,
                                   allow_small_scale);
        if (!bad_path_exists(nf).exists) ++shells;
        for (char g : nf.good) {
            if (!g) ++bad_nodes;
            ++total_nodes;
        }
    }
    out.shell_prob = wilson_interval(shells, nsamples);
    out.node_bad_prob = wilson_interval(bad_nodes, total_nodes);
    double q = std::max(out.node_bad_prob.estimate, 1e-12);
    out.measured_p = -std::log(q) / (d * std::log(l));
    double C = 2.0 * d;
    double crossings = (L2 - L1 - l) / l;
    out.nominal_bound = 1.0 - C * std::pow((L1 + 3 * l) / l, d - 1) *
                              std::pow(std::pow(2.0, d), crossings) *
                              std::pow(l, -out.measured_p * d * crossings / (std::pow(3.0, d) - 1.0));
    return out;
}

}  // namespace msa

#endif
