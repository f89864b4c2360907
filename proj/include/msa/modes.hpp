#ifndef MSA_MODES_HPP
#define MSA_MODES_HPP

#include <cmath>
#include <vector>

#include "msa/resolvent.hpp"

// Finite-volume W-quantities. Generalized eigenfunctions are not computable,
// so the proxy set for energy E is the host-box eigenfunctions with
// |E_k - E| <= delta_E; the host is taken much larger than any probed scale
// and the boundary mass of each mode is reported so contaminated modes can
// be filtered.

namespace msa {

struct ModeProxy {
    const EigenSystem* sys = nullptr;
    const std::vector<Site>* sites = nullptr;
    std::vector<int> modes;      // host eigenpairs within delta_E of E
    double nu = 0;
    double delta_E = 1e-6;

    bool empty() const { return modes.empty(); }
};

inline ModeProxy proxy_for_energy(const EigenSystem& sys, const std::vector<Site>& sites,
                                  double E, double nu, double delta_E = 1e-6) {
    ModeProxy p;
    p.sys = &sys;
    p.sites = &sites;
    p.nu = nu;
    p.delta_E = delta_E;
    for (Eigen::Index k = 0; k < sys.evals.size(); ++k)
        if (std::abs(sys.evals[k] - E) <= delta_E) p.modes.push_back(int(k));
    return p;
}

// ||T_x^{-1} psi|| over the host box
inline double weighted_mode_norm(const ModeProxy& p, int mode, const Site& x) {
    double s = 0;
    for (size_t i = 0; i < p.sites->size(); ++i) {
        double w = std::pow(bracket(sub((*p.sites)[i], x)), -p.nu);
        double v = p.sys->evecs(Eigen::Index(i), mode) * w;
        s += v * v;
    }
    return std::sqrt(s);
}

// fraction of mode mass in the outer 10% shell of the host box
inline double boundary_mass(const ModeProxy& p, int mode, const Box& host) {
    Box core(host.center, 0.9 * host.side, host.norm);
    double out = 0;
    for (size_t i = 0; i < p.sites->size(); ++i)
        if (!core.contains((*p.sites)[i]))
            out += p.sys->evecs(Eigen::Index(i), mode) * p.sys->evecs(Eigen::Index(i), mode);
    return out;
}

// W_omega(x;E): sup over the proxy set of |psi(x)| / ||T_x^{-1} psi||; 0 if empty
inline double w_point(const ModeProxy& p, const Site& x) {
    if (p.empty()) return 0;
    auto it = std::lower_bound(p.sites->begin(), p.sites->end(), x);
    if (it == p.sites->end() || *it != x)
        throw std::invalid_argument("w_point: anchor outside host box");
    Eigen::Index xi = it - p.sites->begin();
    double best = 0;
    for (int k : p.modes) {
        double denom = weighted_mode_norm(p, k, x);
        if (denom > 0) best = std::max(best, std::abs(p.sys->evecs(xi, k)) / denom);
    }
    return best;
}

// W_{omega,L}(x;E): sup of ||psi||_{l2(Lambda_{2L,L}(x))} / ||T_x^{-1} psi||
inline double w_annulus(const ModeProxy& p, const Site& x, double L, const Box& host) {
    if (p.empty()) return 0;
    Annulus ann(x, 2 * L, L, host.norm);
    for (const auto& s : annulus_sites(ann))
        if (!host.contains(s))
            throw std::invalid_argument("w_annulus: annulus exceeds the host box");
    Box outer = ann.outer_box(), inner = ann.inner_box();
    double best = 0;
    for (int k : p.modes) {
        double mass = 0;
        for (size_t i = 0; i < p.sites->size(); ++i) {
            const Site& s = (*p.sites)[i];
            if (outer.contains(s) && !inner.contains(s))
                mass += p.sys->evecs(Eigen::Index(i), k) * p.sys->evecs(Eigen::Index(i), k);
        }
        double denom = weighted_mode_norm(p, k, x);
        if (denom > 0) best = std::max(best, std::sqrt(mass) / denom);
    }
    return best;
}

struct TrapReport {
    bool event_holds = false;       // all coarse boxes in the corridor good at E0
    int boxes_checked = 0;
    int bad_boxes = 0;
    bool bound_verified = true;     // w_annulus <= e^{-(m*gamma)L*theta} on the grid
    double threshold = 0;
    double worst_w = 0;
    std::vector<double> energies;
    std::vector<double> w_values;
};

// Fixed-energy trap R_{L,x0}^{(E0)}: all Lambda_{gamma L}(r) good for coarse
// r in the corridor Lambda_{2L-,L+}(x0); when the event holds, W_{omega,L}
// is exponentially small for all E near E0.
inline TrapReport trap_check(const DisorderField& field, const Site& x0, double L,
                             double E0, double m, double m_prime, double gamma,
                             double eta, const EigenSystem& host_sys,
                             const std::vector<Site>& host_sites,
                             const Box& host, double nu, double theta_adj = 1.0,
                             int grid_points = 7, double delta_E = 1e-6) {
    if (!(m < m_prime)) throw std::invalid_argument("trap_check: need m < m'");
    double l = gamma * L;
    double Lplus = L + gamma * L, Lminus = L - gamma * L;
    Annulus corridor(x0, 2 * Lminus, Lplus);
    TrapReport rep;
    rep.event_holds = true;
    for (const auto& r : coarse_nodes(l, corridor, /*allow_small_scale=*/true)) {
        FiniteHamiltonian fh = assemble(Box(r, l), field);
        GoodnessReport g;
        try {
            g = classify_box(fh, E0, m_prime, eta);
        } catch (const NearSingular&) {
            g.good = false;
        }
        ++rep.boxes_checked;
        if (!g.good) {
            ++rep.bad_boxes;
            rep.event_holds = false;
        }
    }
    if (!rep.event_holds) return rep;  // not in R: report only, no assertion
    rep.threshold = std::exp(-(m * gamma) * L * theta_adj);
    double radius = std::exp(-(m_prime * gamma) * L * theta_adj);
    for (int i = 0; i < grid_points; ++i) {
        double E = (grid_points == 1) ? E0
                 : E0 - radius + 2.0 * radius * double(i) / double(grid_points - 1);
        ModeProxy p = proxy_for_energy(host_sys, host_sites, E, nu, delta_E);
        double w = w_annulus(p, x0, L, host);
        rep.energies.push_back(E);
        rep.w_values.push_back(w);
        rep.worst_w = std::max(rep.worst_w, w);
        if (w > rep.threshold) rep.bound_verified = false;
    }
    return rep;
}

struct DecayScanRow {
    double L = 0;
    double mean_stat = 0;  // E{ sup_E (w_point * w_annulus)^s }
    int seeds = 0;
};

struct DecayScan {
    std::vector<DecayScanRow> rows;
    double fitted_exponent = 0;  // slope of log(mean) vs log(L)
};

inline DecayScan product_decay_scan(const Distribution& dist, uint64_t master_seed, int d,
                                    const Interval& I, const std::vector<int>& dyadic_k,
                                    double s, double nu, int seeds, int energy_grid,
                                    double host_factor = 3.0, double delta_E = 1e-6) {
    DecayScan scan;
    int kmax = *std::max_element(dyadic_k.begin(), dyadic_k.end());
    double host_L = host_factor * std::pow(2.0, kmax) * 2.0;
    Site origin(size_t(d), 0);
    Box host(origin, host_L);
    for (int k : dyadic_k) {
        double L = std::pow(2.0, k);
        DecayScanRow row;
        row.L = L;
        for (int seed = 0; seed < seeds; ++seed) {
            DisorderField field(master_seed + uint64_t(seed), dist);
            FiniteHamiltonian fh = assemble(host, field);
            EigenSystem sys = diagonalize(fh);
            double sup = 0;
            for (int gi = 0; gi < energy_grid; ++gi) {
                double E = I.lo + (I.hi - I.lo) * (gi + 0.5) / energy_grid;
                ModeProxy p = proxy_for_energy(sys, fh.sites, E, nu, delta_E);
                if (p.empty()) continue;
                sup = std::max(sup, w_point(p, origin) * w_annulus(p, origin, L, host));
            }
            row.mean_stat += (s == 0.0) ? 1.0 : std::pow(sup, s);
        }
        row.mean_stat /= seeds;
        row.seeds = seeds;
        scan.rows.push_back(row);
    }
    // log-log least squares slope
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (const auto& r : scan.rows) {
        if (r.mean_stat <= 0) continue;
        double x = std::log(r.L), y = std::log(r.mean_stat);
        sx += x; sy += y; sxx += x * x; sxy += x * y;
        ++n;
    }
    scan.fitted_exponent = (n >= 2) ? (n * sxy - sx * sy) / (n * sxx - sx * sx) : 0.0;
    return scan;
}

}  // namespace msa

#endif
