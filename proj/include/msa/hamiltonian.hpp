#ifndef MSA_HAMILTONIAN_HPP
#define MSA_HAMILTONIAN_HPP

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <lapacke.h>

#include "msa/disorder.hpp"
#include "msa/lattice.hpp"

// Finite-volume Anderson Hamiltonian H_{omega,Lambda} and its spectrum.
// (H phi)(n) = sum_{|m-n|=1, m in box} phi(m) + (-2d + V(n)) phi(n),
// i.e. the simple restriction chi* H chi: the diagonal keeps the full -2d
// even at boundary sites.

namespace msa {

struct EigensolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Interval {
    double lo = 0, hi = 0;
    bool contains(double E) const { return lo <= E && E <= hi; }
};

struct FiniteHamiltonian {
    Box box;
    std::vector<Site> sites;  // lexicographic, the global index order
    Eigen::MatrixXd H;

    int dim() const { return int(sites.size()); }
};

inline FiniteHamiltonian assemble(const Box& box, const PotentialFn& potential) {
    FiniteHamiltonian fh;
    fh.box = box;
    fh.sites = box_sites(box);
    int n = fh.dim();
    int d = box.dim;
    fh.H = Eigen::MatrixXd::Zero(n, n);
    // site -> index map via lexicographic search
    auto index_of = [&](const Site& s) -> int {
        auto it = std::lower_bound(fh.sites.begin(), fh.sites.end(), s);
        if (it == fh.sites.end() || *it != s) return -1;
        return int(it - fh.sites.begin());
    };
    for (int i = 0; i < n; ++i) {
        fh.H(i, i) = -2.0 * d + potential(fh.sites[i]);
        for (int k = 0; k < d; ++k) {
            for (int sgn : {+1, -1}) {
                Site nb = fh.sites[i];
                nb[k] += sgn;
                if (!box.contains(nb)) continue;
                int j = index_of(nb);
                if (j >= 0) fh.H(i, j) = 1.0;
            }
        }
    }
    return fh;
}

inline FiniteHamiltonian assemble(const Box& box, const DisorderField& field) {
    return assemble(box, PotentialFn([&](const Site& s) { return field.potential_at(s); }));
}

struct EigenSystem {
    Eigen::VectorXd evals;  // ascending
    Eigen::MatrixXd evecs;  // orthonormal columns, site order

    double spectral_radius() const {
        if (evals.size() == 0) return 0;
        return std::max(std::abs(evals[0]), std::abs(evals[evals.size() - 1]));
    }
    double dist_to_spectrum(double E) const {
        double d = std::numeric_limits<double>::infinity();
        for (Eigen::Index k = 0; k < evals.size(); ++k) d = std::min(d, std::abs(E - evals[k]));
        return d;
    }
};

namespace detail {

inline void fix_eigenvector_signs(Eigen::MatrixXd& V) {
    for (Eigen::Index j = 0; j < V.cols(); ++j) {
        Eigen::Index imax = 0;
        V.col(j).cwiseAbs().maxCoeff(&imax);
        if (V(imax, j) < 0) V.col(j) = -V.col(j);
    }
}

inline bool is_tridiagonal(const Eigen::MatrixXd& H) {
    int n = int(H.rows());
    for (int i = 0; i < n; ++i)
        for (int j = i + 2; j < n; ++j)
            if (H(i, j) != 0.0 || H(j, i) != 0.0) return false;
    return true;
}

}  // namespace detail

// Full symmetric eigendecomposition. d=1 boxes are tridiagonal in
// lexicographic order and get the O(n^2) LAPACK path; everything else goes
// through dsyevd.
inline EigenSystem diagonalize(const FiniteHamiltonian& fh) {
    int n = fh.dim();
    if (n < 1) throw std::invalid_argument("diagonalize: empty matrix");
    EigenSystem sys;
    if (fh.box.dim == 1 || (n <= 64 && detail::is_tridiagonal(fh.H))) {
        std::vector<double> diag(n), off(std::max(n - 1, 1));
        for (int i = 0; i < n; ++i) diag[size_t(i)] = fh.H(i, i);
        for (int i = 0; i + 1 < n; ++i) off[size_t(i)] = fh.H(i, i + 1);
        Eigen::MatrixXd Z(n, n);
        int info = LAPACKE_dstevd(LAPACK_COL_MAJOR, 'V', n, diag.data(), off.data(), Z.data(), n);
        if (info != 0) throw EigensolverError("dstevd failed, info=" + std::to_string(info));
        sys.evals = Eigen::Map<Eigen::VectorXd>(diag.data(), n);
        sys.evecs = std::move(Z);
    } else {
        Eigen::MatrixXd A = fh.H;  // overwritten with eigenvectors
        Eigen::VectorXd w(n);
        int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, A.data(), n, w.data());
        if (info != 0) throw EigensolverError("dsyevd failed, info=" + std::to_string(info));
        sys.evals = std::move(w);
        sys.evecs = std::move(A);
    }
    detail::fix_eigenvector_signs(sys.evecs);
    return sys;
}

// indices of eigenpairs with E_k in I, ascending
inline std::vector<int> spectrum_in_interval(const EigenSystem& sys, const Interval& I) {
    std::vector<int> out;
    for (Eigen::Index k = 0; k < sys.evals.size(); ++k)
        if (I.contains(sys.evals[k])) out.push_back(int(k));
    return out;
}

inline std::vector<double> eigenvalues_in_interval(const EigenSystem& sys, const Interval& I) {
    std::vector<double> out;
    for (int k : spectrum_in_interval(sys, I)) out.push_back(sys.evals[k]);
    return out;
}

// finite-volume mu_omega(I) = Tr(T^{-1} 1_I(H) T^{-1}) over the box,
// anchor at the origin
inline double weighted_trace(const EigenSystem& sys, const std::vector<Site>& sites,
                             const Interval& I, double nu) {
    auto ks = spectrum_in_interval(sys, I);
    double tr = 0;
    for (size_t i = 0; i < sites.size(); ++i) {
        double w = std::pow(bracket(sites[i]), -2.0 * nu);
        double mass = 0;
        for (int k : ks) mass += sys.evecs(Eigen::Index(i), k) * sys.evecs(Eigen::Index(i), k);
        tr += w * mass;
    }
    return tr;
}

// coordinate-format dump (row, col, value) for external cross-checks
inline std::string dump_coordinate_format(const FiniteHamiltonian& fh) {
    std::string out;
    char buf[64];
    for (int i = 0; i < fh.dim(); ++i)
        for (int j = 0; j < fh.dim(); ++j)
            if (fh.H(i, j) != 0.0) {
                std::snprintf(buf, sizeof buf, "%d %d %.17g\n", i, j, fh.H(i, j));
                out += buf;
            }
    return out;
}

}  // namespace msa

#endif
