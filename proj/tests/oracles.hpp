#ifndef MSA_TEST_ORACLES_HPP
#define MSA_TEST_ORACLES_HPP

#include <Eigen/Eigenvalues>
#include <deque>

#include <msa/percolation.hpp>
#include <msa/reduction.hpp>

// Brute-force reference implementations, test-tree only.  They share only the
// lattice/site primitives with the fast paths: exponential subset search for
// shells, bitmask-memoized determinants for Green entries, and Eigen's dense
// solver (not the LAPACK path) for the reduced spectrum.

namespace msa::oracle {

// --- shell existence by subset enumeration -------------------------------

namespace detail {

inline bool star_adjacent(const Site& a, const Site& b, int step) {
    if (a == b) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (std::abs(a[i] - b[i]) > step) return false;
    return true;
}

// inner ring reaches outer ring through nodes NOT in `removed`
inline bool crossing_exists(const CoarseAnnulus& g, const std::vector<char>& removed) {
    size_t n = g.nodes.size();
    std::vector<char> seen(n, 0);
    std::deque<size_t> q;
    for (size_t i = 0; i < n; ++i)
        if (g.inner_ring[i] && !removed[i]) {
            seen[i] = 1;
            q.push_back(i);
        }
    while (!q.empty()) {
        size_t i = q.front();
        q.pop_front();
        if (g.outer_ring[i]) return true;
        for (size_t j = 0; j < n; ++j)
            if (!seen[j] && !removed[j] && star_adjacent(g.nodes[i], g.nodes[j], g.step)) {
                seen[j] = 1;
                q.push_back(j);
            }
    }
    return false;
}

}  // namespace detail

// Enumerates every subset of the good nodes and checks the separation
// definition verbatim: removing the subset must disconnect the inner eligible
// ring from the outer one in the *-graph.  True iff some subset qualifies.
inline bool brute_shell_search(const NodeField& nf) {
    size_t n = nf.geom.nodes.size();
    if (n > 25) throw std::invalid_argument("brute_shell_search: instance too large");
    std::vector<size_t> good_idx;
    for (size_t i = 0; i < n; ++i)
        if (nf.good[i]) good_idx.push_back(i);
    size_t g = good_idx.size();
    for (size_t mask = 0; mask < (size_t(1) << g); ++mask) {
        std::vector<char> removed(n, 0);
        for (size_t b = 0; b < g; ++b)
            if (mask & (size_t(1) << b)) removed[good_idx[b]] = 1;
        if (!detail::crossing_exists(nf.geom, removed)) return true;
    }
    // no crossing at all even with nothing removed counts too (empty annulus
    // side): covered above by mask = 0 when crossing_exists is false
    return false;
}

// --- Green entry by Cramer's rule ----------------------------------------

namespace detail {

// det of A restricted to rows `rows` and the lowest popcount(mask) columns of
// `cols`, by Laplace expansion memoized over column subsets
inline double det_memo(const Eigen::MatrixXd& A, const std::vector<int>& rows,
                       const std::vector<int>& cols, uint32_t mask,
                       std::vector<double>& memo, std::vector<char>& have) {
    if (mask == 0) return 1.0;
    if (have[mask]) return memo[mask];
    int k = __builtin_popcount(mask);
    int row = rows[size_t(k) - 1];  // expand along the last active row
    double acc = 0;
    int sign = (k % 2 == 0) ? -1 : 1;  // (-1)^{k-1+j} with j counted below
    int j = 0;
    for (size_t c = 0; c < cols.size(); ++c) {
        if (!(mask & (1u << c))) continue;
        double a = A(row, cols[c]);
        if (a != 0)
            acc += sign * a * det_memo(A, rows, cols, mask & ~(1u << c), memo, have);
        sign = -sign;
        ++j;
    }
    (void)j;
    have[mask] = 1;
    memo[mask] = acc;
    return acc;
}

inline double det_laplace(const Eigen::MatrixXd& A, const std::vector<int>& rows,
                          const std::vector<int>& cols) {
    uint32_t full = (cols.size() == 32) ? 0xffffffffu : ((1u << cols.size()) - 1);
    std::vector<double> memo(size_t(full) + 1, 0);
    std::vector<char> have(size_t(full) + 1, 0);
    return det_memo(A, rows, cols, full, memo, have);
}

}  // namespace detail

// Entry (x,y) of (H - E)^{-1} for the matrix of `fh`, via cofactor / det.
inline double brute_green_entry(const FiniteHamiltonian& fh, double E, const Site& x,
                                const Site& y) {
    int n = fh.dim();
    if (n > 12) throw std::invalid_argument("brute_green_entry: dim > 12");
    Eigen::MatrixXd A = fh.H - E * Eigen::MatrixXd::Identity(n, n);
    auto idx = [&](const Site& s) {
        for (int i = 0; i < n; ++i)
            if (fh.sites[size_t(i)] == s) return i;
        throw std::invalid_argument("brute_green_entry: site not in box");
    };
    int xi = idx(x), yi = idx(y);
    std::vector<int> all(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) all[size_t(i)] = i;
    double det = detail::det_laplace(A, all, all);
    if (det == 0) throw std::runtime_error("brute_green_entry: singular matrix");
    // (A^{-1})_{xy} = (-1)^{x+y} det(A without row y, column x) / det A
    std::vector<int> rows, cols;
    for (int i = 0; i < n; ++i) {
        if (i != yi) rows.push_back(i);
        if (i != xi) cols.push_back(i);
    }
    double minor = rows.empty() ? 1.0 : detail::det_laplace(A, rows, cols);
    double sign = ((xi + yi) % 2 == 0) ? 1.0 : -1.0;
    return sign * minor / det;
}

// --- reduced spectrum, naive ---------------------------------------------

// Recomputes the survival test with its own assembly (dense Eigen solver) and
// explicit pairwise distance loops.
inline std::vector<double> brute_reduced_spectrum(const DisorderField& field, const Site& x0,
                                                  double L, const Interval& I,
                                                  const ConstantsLedger& led, double theta) {
    auto spectrum_of = [&](double side) {
        Box box(x0, side);
        std::vector<Site> sites = box_sites(box);
        int n = int(sites.size());
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
        for (int i = 0; i < n; ++i) {
            H(i, i) = -2.0 * box.dim + field.potential_at(sites[size_t(i)]);
            for (int j = 0; j < n; ++j) {
                Site diff = sub(sites[size_t(i)], sites[size_t(j)]);
                int s1 = 0;
                for (int c : diff) s1 += std::abs(c);
                if (s1 == 1) H(i, j) = 1.0;
            }
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H, Eigen::EigenvaluesOnly);
        std::vector<double> evs;
        for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
            double e = es.eigenvalues()[k];
            if (I.lo <= e && e <= I.hi) evs.push_back(e);
        }
        return evs;
    };
    std::vector<double> base = spectrum_of(L);
    std::vector<std::vector<double>> inner;
    for (int n = 1; n <= led.N2; ++n) inner.push_back(spectrum_of(std::pow(L, std::pow(led.rho, n))));
    std::vector<double> out;
    for (double E : base) {
        bool ok = true;
        for (int n = 1; n <= led.N2; ++n) {
            double thr = 2.0 * std::exp(-theta * std::pow(L, std::pow(led.rho, n)));
            bool close = false;
            for (double Ep : inner[size_t(n - 1)])
                if (std::abs(E - Ep) <= thr) close = true;
            if (!close) {
                ok = false;
                break;
            }
        }
        if (ok) out.push_back(E);
    }
    return out;
}

}  // namespace msa::oracle

#endif
