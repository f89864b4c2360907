#ifndef MSA_RESOLVENT_HPP
#define MSA_RESOLVENT_HPP

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "msa/hamiltonian.hpp"

// Green functions, the regular/good/jgood predicates of the multiscale
// analysis, and the deterministic operator identities (resolvent, geometric
// resolvent, Poisson).

namespace msa {

struct NearSingular : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GreenFunction {
    Eigen::MatrixXd G;       // (H - E)^{-1}
    double dist_to_spectrum = 0;
    double norm = 0;         // = 1/dist for symmetric H
};

// G = V diag(1/(E_k - E)) V^T; NearSingular when E is numerically in sigma(H)
inline GreenFunction green(const EigenSystem& sys, double E) {
    double dist = sys.dist_to_spectrum(E);
    double scale = std::max(sys.spectral_radius(), 1.0);
    if (dist < 1e-12 * scale)
        throw NearSingular("green: E within 1e-12*||H|| of the spectrum");
    Eigen::VectorXd inv = (sys.evals.array() - E).inverse();
    GreenFunction g;
    g.G = sys.evecs * inv.asDiagonal() * sys.evecs.transpose();
    g.dist_to_spectrum = dist;
    g.norm = 1.0 / dist;
    return g;
}

inline GreenFunction green(const FiniteHamiltonian& fh, double E) {
    return green(diagonalize(fh), E);
}

struct GoodnessReport {
    bool regular = false;
    bool good = false;
    bool jgood = false;
    double decay_margin = 0;   // min over tested pairs of (-log|G(x,y)|/|x-y| - m)
    double green_norm = 0;     // ||G||
    double dist_to_spectrum = 0;
    double m = 0, eta = 0, fraction = 0;
    int pairs_tested = 0;
};

// Def: Lambda_L is (omega,E,m)-regular if |G(x,y)| <= e^{-m|x-y|} for all
// pairs with Euclidean |x-y| >= f*L (nominal f = 1/100); good adds
// ||G|| <= e^{L^{1-eta}}, jgood allows the factor-2 slack.
inline GoodnessReport classify_box(const FiniteHamiltonian& fh, const EigenSystem& sys,
                                   double E, double m, double eta, double fraction = 0.01) {
    if (!(m > 0)) throw std::invalid_argument("classify_box: m must be positive");
    if (!(eta > 0 && eta < 1)) throw std::invalid_argument("classify_box: eta must lie in (0,1)");
    if (!(fraction > 0 && fraction <= 1)) throw std::invalid_argument("classify_box: fraction must lie in (0,1]");
    GreenFunction g = green(sys, E);
    double L = fh.box.side;
    GoodnessReport rep;
    rep.m = m;
    rep.eta = eta;
    rep.fraction = fraction;
    rep.green_norm = g.norm;
    rep.dist_to_spectrum = g.dist_to_spectrum;
    rep.regular = true;
    rep.decay_margin = std::numeric_limits<double>::infinity();
    int n = fh.dim();
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            double r = euclid_norm(sub(fh.sites[size_t(i)], fh.sites[size_t(j)]));
            if (r < fraction * L) continue;
            ++rep.pairs_tested;
            double a = std::abs(g.G(i, j));
            double rate = (a == 0) ? std::numeric_limits<double>::infinity() : -std::log(a) / r;
            rep.decay_margin = std::min(rep.decay_margin, rate - m);
            if (a > std::exp(-m * r)) rep.regular = false;
        }
    }
    double norm_bound = std::exp(std::pow(L, 1.0 - eta));
    rep.good = rep.regular && g.norm <= norm_bound;
    rep.jgood = rep.regular && g.norm <= 2.0 * norm_bound;
    return rep;
}

inline GoodnessReport classify_box(const FiniteHamiltonian& fh, double E, double m,
                                   double eta, double fraction = 0.01) {
    return classify_box(fh, diagonalize(fh), E, m, eta, fraction);
}

// ||G_E - G_E0 - (E-E0) G_E G_E0||_max, with G_z = (H - z)^{-1}
inline double check_resolvent_identity(const FiniteHamiltonian& fh, double E, double E0) {
    EigenSystem sys = diagonalize(fh);
    GreenFunction gE = green(sys, E), g0 = green(sys, E0);
    Eigen::MatrixXd res = gE.G - g0.G - (E - E0) * (gE.G * g0.G);
    return res.cwiseAbs().maxCoeff();
}

// residual of G_Lambda(x,y) = G_Lambda'(x,y)[y in Lambda']
//   - sum_{u in Lambda', v in Lambda\Lambda', |u-v|=1} G_Lambda'(x,u) G_Lambda(v,y)
inline double check_geometric_resolvent(const FiniteHamiltonian& big, const FiniteHamiltonian& sub_box,
                                        double E, const Site& x, const Site& y) {
    for (const auto& s : sub_box.sites)
        if (!big.box.contains(s))
            throw std::invalid_argument("check_geometric_resolvent: Lambda' not contained in Lambda");
    if (!sub_box.box.contains(x)) throw std::invalid_argument("check_geometric_resolvent: x must lie in Lambda'");
    auto idx = [](const std::vector<Site>& sites, const Site& s) {
        auto it = std::lower_bound(sites.begin(), sites.end(), s);
        if (it == sites.end() || *it != s) return -1;
        return int(it - sites.begin());
    };
    GreenFunction Gb = green(big, E), Gs = green(sub_box, E);
    int xi_s = idx(sub_box.sites, x);
    int yi_b = idx(big.sites, y);
    if (yi_b < 0) throw std::invalid_argument("check_geometric_resolvent: y must lie in Lambda");
    double lhs = Gb.G(idx(big.sites, x), yi_b);
    int yi_s = idx(sub_box.sites, y);
    double rhs = (yi_s >= 0) ? Gs.G(xi_s, yi_s) : 0.0;
    for (const auto& [u, v] : boundary_pairs(sub_box.box)) {
        int vi = idx(big.sites, v);
        if (vi < 0) continue;  // outer neighbor fell outside the big box
        rhs -= Gs.G(xi_s, idx(sub_box.sites, u)) * Gb.G(vi, yi_b);
    }
    return std::abs(lhs - rhs);
}

// Poisson formula: for an eigenpair (E, psi) of the big box and an interior
// sub-box Lambda, psi(x) = -sum_{(y,y') in dLambda, y in Lambda} G_Lambda(x,y) psi(y').
// Returns the max residual over x in Lambda.
inline double check_poisson(const FiniteHamiltonian& big, const EigenSystem& big_sys,
                            int eig_index, const Box& sub_box,
                            const DisorderField& field) {
    auto bpairs = boundary_pairs(sub_box);
    auto idx = [](const std::vector<Site>& sites, const Site& s) {
        auto it = std::lower_bound(sites.begin(), sites.end(), s);
        if (it == sites.end() || *it != s) return -1;
        return int(it - sites.begin());
    };
    for (const auto& [y, yp] : bpairs)
        if (idx(big.sites, yp) < 0)
            throw std::invalid_argument("check_poisson: sub-box boundary exits the big box");
    double E = big_sys.evals[eig_index];
    FiniteHamiltonian sub = assemble(sub_box, field);
    GreenFunction Gs = green(sub, E);
    Eigen::VectorXd psi = big_sys.evecs.col(eig_index);
    double worst = 0;
    for (int xi = 0; xi < sub.dim(); ++xi) {
        double rhs = 0;
        for (const auto& [y, yp] : bpairs)
            rhs -= Gs.G(xi, idx(sub.sites, y)) * psi[idx(big.sites, yp)];
        worst = std::max(worst, std::abs(psi[idx(big.sites, sub.sites[size_t(xi)])] - rhs));
    }
    return worst;
}

struct StabilityProbe {
    std::vector<double> energies;
    std::vector<GoodnessReport> reports;
    bool all_jgood = true;
};

// Stability of goodness: a box good at E0 stays jgood (with the weaker rate m)
// on the grid |E - E0| <= e^{-m' L}.
inline StabilityProbe stability_probe(const FiniteHamiltonian& fh, double E0, double m,
                                      double m_prime, double eta, int grid_points = 21) {
    if (!(m < m_prime)) throw std::invalid_argument("stability_probe: need m < m'");
    EigenSystem sys = diagonalize(fh);
    double radius = std::exp(-m_prime * fh.box.side);
    StabilityProbe out;
    for (int i = 0; i < grid_points; ++i) {
        double E = (grid_points == 1) ? E0
                 : E0 - radius + 2.0 * radius * double(i) / double(grid_points - 1);
        GoodnessReport rep = classify_box(fh, sys, E, m, eta);
        out.all_jgood = out.all_jgood && rep.jgood;
        out.energies.push_back(E);
        out.reports.push_back(rep);
    }
    return out;
}

}  // namespace msa

#endif
