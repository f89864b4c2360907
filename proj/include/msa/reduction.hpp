#ifndef MSA_REDUCTION_HPP
#define MSA_REDUCTION_HPP

#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "msa/percolation.hpp"

// The constants ledger of the spectral-reduction machinery, the reduced
// spectrum, notsobad annuli with singular sets, and membership probes for the
// two reduction events.
//
// The proof-scale exponents (e.g. e^{-30ML/K} with M = m0/30^{N1+2}) are
// numerically indistinguishable from zero at desk scale, so every probe
// accepts an override exponent theta replacing 30M/K; reports always carry
// both values.

namespace msa {

struct InfeasibleConstants : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConstantsLedger {
    // inputs
    double m0 = 1, eta0 = 0.5, p0 = 0.4, p = 0.3, b = 1;
    int d = 1;
    double rho = 0.75;
    double J = 2;  // nominal floor 3^{d+3} b; desk runs override downward
    // derived
    int N1 = 0;
    double M = 0;
    double r = 0;  // (1+r)^{N1} = 2
    double K = 0;  // 1 + 2 J N1
    int N2 = 0;
    double beta = 0;
    double c = 0;       // 15 M / K
    double mu_exp = 0;  // beta / 2
    double J_nominal_floor = 0;

    double nominal_theta() const { return 30.0 * M / K; }
};

inline ConstantsLedger derive_constants(double m0, double eta0, double p0, double p,
                                        double b, int d, double rho = 0.75,
                                        double J = -1, int N2_override = -1) {
    if (!(p0 > 0 && p > 0 && p < p0)) throw std::invalid_argument("derive_constants: need 0 < p < p0");
    if (!(eta0 > 0 && eta0 < 1)) throw std::invalid_argument("derive_constants: need 0 < eta0 < 1");
    if (!(m0 > 0)) throw std::invalid_argument("derive_constants: need m0 > 0");
    if (!(b >= 1)) throw std::invalid_argument("derive_constants: need b >= 1");
    ConstantsLedger led;
    led.m0 = m0;
    led.eta0 = eta0;
    led.p0 = p0;
    led.p = p;
    led.b = b;
    led.d = d;
    led.N1 = 1;
    while (!(std::pow(2.0, 1.0 / led.N1) - 1.0 < p0)) {
        ++led.N1;
        if (led.N1 > 64) throw InfeasibleConstants("derive_constants: no N1 satisfies 2^{1/n}-1 < p0");
    }
    led.M = m0 / std::pow(30.0, led.N1 + 2);
    led.r = std::pow(2.0, 1.0 / led.N1) - 1.0;
    led.J_nominal_floor = std::pow(3.0, d + 3) * b;
    led.J = (J > 0) ? J : led.J_nominal_floor;
    led.K = 1.0 + 2.0 * led.J * led.N1;
    if (!(1.0 / (1.0 + p0) < rho && rho < 1.0))
        throw InfeasibleConstants("derive_constants: rho must lie in ((1+p0)^{-1}, 1)");
    led.rho = rho;
    // (7d) only requires (N2+1) rho^{N2} < p0 - p; rho and N2 are chosen
    // jointly, so an explicit N2 is accepted if it satisfies the inequality
    double gap = p0 - p;
    if (N2_override > 0) {
        if (!((N2_override + 1) * std::pow(rho, N2_override) < gap))
            throw InfeasibleConstants("derive_constants: requested N2 violates (N2+1) rho^N2 < p0 - p");
        led.N2 = N2_override;
    } else {
        int n = 1;
        double best = std::numeric_limits<double>::infinity();
        while (true) {
            double val = (n + 1) * std::pow(rho, n);
            best = std::min(best, val);
            if (val < gap) break;
            if (++n > 100000)
                throw InfeasibleConstants("derive_constants: p0 - p too small for this rho; best gap " +
                                          std::to_string(best));
        }
        led.N2 = n;
    }
    led.beta = std::pow(rho, led.N2);
    led.c = 15.0 * led.M / led.K;
    led.mu_exp = led.beta / 2.0;
    return led;
}

struct ReducedSpectrum {
    std::vector<double> base;       // sigma^I(H_{Lambda_L})
    std::vector<double> survivors;  // the reduced spectrum
    std::vector<double> scales;     // L_n = L^{rho^n}, n = 1..N2
    std::vector<double> thresholds; // 2 e^{-theta L_n}
    // audit[i][n-1] = dist(base[i], sigma^I(H_{Lambda_{L_n}}))
    std::vector<std::vector<double>> audit;
    double theta = 0;
    double nominal_theta = 0;
};

// Survival criterion: dist(E, sigma^I(H_{Lambda_{L_n}})) <= 2 e^{-theta L_n}
// for every n = 1..N2.
inline ReducedSpectrum reduced_spectrum(const DisorderField& field, const Site& x0, double L,
                                        const Interval& I, const ConstantsLedger& led,
                                        double theta_override = -1) {
    ReducedSpectrum out;
    out.nominal_theta = led.nominal_theta();
    out.theta = (theta_override > 0) ? theta_override : out.nominal_theta;
    if (std::pow(L, std::pow(led.rho, led.N2)) < 2)
        throw std::invalid_argument("reduced_spectrum: smallest scale below 2");
    EigenSystem big = diagonalize(assemble(Box(x0, L), field));
    out.base = eigenvalues_in_interval(big, I);
    std::vector<std::vector<double>> inner_spectra;
    for (int n = 1; n <= led.N2; ++n) {
        double Ln = std::pow(L, std::pow(led.rho, n));
        out.scales.push_back(Ln);
        out.thresholds.push_back(2.0 * std::exp(-out.theta * Ln));
        EigenSystem sys = diagonalize(assemble(Box(x0, Ln), field));
        inner_spectra.push_back(eigenvalues_in_interval(sys, I));
    }
    for (double E : out.base) {
        std::vector<double> dists;
        bool survives = true;
        for (int n = 0; n < led.N2; ++n) {
            double dist = std::numeric_limits<double>::infinity();
            for (double Ep : inner_spectra[size_t(n)]) dist = std::min(dist, std::abs(E - Ep));
            dists.push_back(dist);
            if (!(dist <= out.thresholds[size_t(n)])) survives = false;
        }
        out.audit.push_back(std::move(dists));
        if (survives) out.survivors.push_back(E);
    }
    return out;
}

struct CountBound {
    size_t count = 0;
    double bound = 0;
    bool holds = false;
};

inline CountBound count_bound_check(const ReducedSpectrum& red, const ConstantsLedger& led,
                                    double L, double C) {
    CountBound cb;
    cb.count = red.survivors.size();
    cb.bound = C * std::pow(L, (led.N2 + 1) * led.beta * led.d);
    cb.holds = double(cb.count) <= cb.bound;
    return cb;
}

struct SingularSet {
    std::vector<Site> centers;  // at most K2 coarse centers r_i
    double cover_side = 0;      // 3 L_{N2}
};

struct NotsobadReport {
    bool is_notsobad = false;
    SingularSet singular;
    size_t uncovered_points = 0;
    size_t clusters_needed = 0;
};

// Annulus Lambda_{L,L'}(x0) is notsobad if outside at most K2 boxes
// Lambda_{3 L_{N2}}(r_i) every point x has, at some level n in 1..N2, a good
// box Lambda_{L_n}(r) with Lambda_{L_n/5}(x) cap annulus subset Lambda_{L_n}(r).
inline NotsobadReport notsobad_check(const DisorderField& field, const Site& x0, double L,
                                     double Lp, double E, int K2, const ConstantsLedger& led,
                                     double fraction = 0.01) {
    if (!(std::pow(L, led.rho) < (L - Lp) / 7.0))
        throw std::invalid_argument("notsobad_check: need L^rho < (L - L')/7");
    Annulus ann(x0, L, Lp);
    Box big(x0, L);
    std::vector<double> level_scales;
    for (int n = 1; n <= led.N2; ++n) level_scales.push_back(std::pow(L, std::pow(led.rho, n)));
    // goodness cache per (level, node)
    std::vector<std::vector<Site>> level_nodes;
    std::vector<std::vector<char>> level_good;
    for (double Ln : level_scales) {
        std::vector<Site> nodes = coarse_nodes(Ln, big, /*allow_small_scale=*/true);
        std::vector<char> good(nodes.size(), 0);
        for (size_t i = 0; i < nodes.size(); ++i) {
            try {
                good[i] = classify_box(assemble(Box(nodes[i], Ln), field), E, led.m0, led.eta0,
                                       fraction).good ? 1 : 0;
            } catch (const NearSingular&) {
                good[i] = 0;
            }
        }
        level_nodes.push_back(std::move(nodes));
        level_good.push_back(std::move(good));
    }
    auto covered = [&](const Site& x) {
        for (size_t li = 0; li < level_scales.size(); ++li) {
            double Ln = level_scales[li];
            Box probe(x, Ln / 5.0 >= 1 ? Ln / 5.0 : 1.0);
            for (size_t ni = 0; ni < level_nodes[li].size(); ++ni) {
                if (!level_good[li][ni]) continue;
                Box node_box(level_nodes[li][ni], Ln);
                bool inside = true;
                for (const auto& y : box_sites(probe)) {
                    if (!ann.contains(y)) continue;
                    if (!node_box.contains(y)) {
                        inside = false;
                        break;
                    }
                }
                if (inside) return true;
            }
        }
        return false;
    };
    NotsobadReport rep;
    std::vector<Site> uncovered;
    for (const auto& x : annulus_sites(ann))
        if (!covered(x)) uncovered.push_back(x);
    rep.uncovered_points = uncovered.size();
    // greedy clustering: lexicographic scan, open a center at the first
    // uncovered point, absorb everything within Lambda_{3 L_{N2}}
    double cover_side = 3.0 * level_scales.back();
    rep.singular.cover_side = cover_side;
    std::vector<char> absorbed(uncovered.size(), 0);
    for (size_t i = 0; i < uncovered.size(); ++i) {
        if (absorbed[i]) continue;
        Box cluster(uncovered[i], cover_side);
        rep.singular.centers.push_back(uncovered[i]);
        for (size_t j = i; j < uncovered.size(); ++j)
            if (!absorbed[j] && cluster.contains(uncovered[j])) absorbed[j] = 1;
    }
    rep.clusters_needed = rep.singular.centers.size();
    rep.is_notsobad = rep.clusters_needed <= size_t(K2);
    if (!rep.is_notsobad) rep.singular.centers.clear();
    return rep;
}

struct FirstReductionLayer {
    int k = 0;
    double scale_l = 0;        // l_k
    double inner_L = 0;        // L_{k-1}
    double outer_L = 0;        // L_k
    size_t energies_checked = 0;
    size_t shells_found = 0;
    double worst_dist = 0;     // max over layer energies of dist(E, sigma^I inner)
};

struct FirstReductionReport {
    bool member = false;  // all required shells exist
    std::vector<FirstReductionLayer> layers;
    std::vector<double> layer_scales_L;   // L_0..L_{N1}
    double w_at_x0 = 0;
    bool w_above_threshold = false;
    double final_dist = 0;   // dist(E, sigma^I(H_{Lambda_L}))
    double final_threshold = 0;  // e^{-theta L}
    bool final_bound_holds = false;
    std::vector<double> per_layer_dist;  // dist(E, sigma^I(H_{Lambda_{L_k}}))
    double theta = 0, nominal_theta = 0;
};

// Membership probe for the first-reduction event O_{L,x0} = cap_k Y_k built
// from layered annuli, then evaluation of the distance conclusion for one
// probe energy E.
inline FirstReductionReport first_reduction_probe(const DisorderField& field, const Site& x0,
                                                  double L0, const ConstantsLedger& led,
                                                  double E, const Interval& I, double nu,
                                                  const EigenSystem& host_sys,
                                                  const std::vector<Site>& host_sites,
                                                  double theta_override = -1,
                                                  double grid_spacing_override = -1,
                                                  double delta_E = 1e-6) {
    FirstReductionReport rep;
    rep.nominal_theta = 30.0 * led.M / led.K;
    rep.theta = (theta_override > 0) ? theta_override : rep.nominal_theta;
    double l0 = std::sqrt(L0);
    std::vector<double> ls{l0}, Ls{L0};
    for (int k = 1; k <= led.N1; ++k) {
        ls.push_back(std::pow(ls.back(), 1.0 + led.r));
        Ls.push_back(Ls.back() + 2.0 * led.J * ls.back());
    }
    rep.layer_scales_L = Ls;
    rep.member = true;
    std::vector<EigenSystem> layer_sys;
    for (int k = 0; k <= led.N1; ++k)
        layer_sys.push_back(diagonalize(assemble(Box(x0, Ls[size_t(k)]), field)));

    for (int k = 0; k <= led.N1; ++k) {
        FirstReductionLayer layer;
        layer.k = k;
        layer.scale_l = ls[size_t(k)];
        layer.inner_L = (k == 0) ? std::sqrt(L0) : Ls[size_t(k - 1)];
        layer.outer_L = Ls[size_t(k)];
        std::vector<double> energies;
        if (k == 0) {
            double spacing = (grid_spacing_override > 0)
                                 ? grid_spacing_override
                                 : 2.0 * std::exp(-led.m0 * l0);
            for (double e = I.lo + spacing / 2; e <= I.hi; e += spacing) energies.push_back(e);
            if (energies.empty()) energies.push_back((I.lo + I.hi) / 2);
        } else {
            energies = eigenvalues_in_interval(layer_sys[size_t(k - 1)], I);
        }
        Annulus ann(x0, layer.outer_L, layer.inner_L);
        for (double E0 : energies) {
            ++layer.energies_checked;
            bool have_shell = false;
            try {
                NodeField nf = label_nodes(ann, layer.scale_l, field, E0, led.m0, led.eta0, 0.01,
                                           NodeKind::Good, led.r, /*allow_small_scale=*/true);
                have_shell = extract_shell(nf).has_value();
            } catch (const std::invalid_argument&) {
                have_shell = false;  // annulus too thin for an eligible ring
            }
            if (have_shell) ++layer.shells_found;
            else rep.member = false;
        }
        rep.layers.push_back(layer);
    }
    // per-layer distances for the probe energy
    for (int k = 0; k <= led.N1; ++k) {
        double dist = std::numeric_limits<double>::infinity();
        for (double ev : eigenvalues_in_interval(layer_sys[size_t(k)], I))
            dist = std::min(dist, std::abs(E - ev));
        rep.per_layer_dist.push_back(dist);
    }
    ModeProxy proxy = proxy_for_energy(host_sys, host_sites, E, nu, delta_E);
    rep.w_at_x0 = w_point(proxy, x0);
    double L = Ls.back();
    rep.w_above_threshold = rep.w_at_x0 >= std::exp(-rep.theta * std::sqrt(L));
    rep.final_dist = rep.per_layer_dist.back();
    rep.final_threshold = std::exp(-rep.theta * L);
    rep.final_bound_holds = rep.final_dist <= rep.final_threshold;
    return rep;
}

struct KeyTheoremReport {
    size_t grid_points = 0;
    size_t implication_violations = 0;  // W > thr_w but W_L > e^{-theta L}
    size_t product_violations = 0;      // W * W_L >= e^{-theta L^mu / 2}
    double violation_rate = 0;
    double product_violation_rate = 0;
    double theta = 0, nominal_c = 0, mu = 0;
    std::vector<double> products;
};

// Probes the Key-Theorem implication W > e^{-theta L^mu} => W_L <= e^{-theta L}
// and the product bound W * W_L < e^{-theta L^mu / 2} over an energy grid
// with margin from the interval edge.
inline KeyTheoremReport key_theorem_probe(const DisorderField& field, const Site& x0, double L,
                                          const Interval& I, const ConstantsLedger& led,
                                          double nu, int grid_points,
                                          double theta_override = -1, double delta_E = 1e-6,
                                          double host_factor = 3.0) {
    KeyTheoremReport rep;
    rep.nominal_c = led.c;
    rep.theta = (theta_override > 0) ? theta_override : led.c;
    rep.mu = led.mu_exp;
    Box host(x0, host_factor * L);
    FiniteHamiltonian fh = assemble(host, field);
    EigenSystem sys = diagonalize(fh);
    double margin = std::exp(-rep.theta * std::pow(L, rep.mu));
    double lo = I.lo + margin, hi = I.hi - margin;
    double thr_w = std::exp(-rep.theta * std::pow(L, rep.mu));
    double thr_wl = std::exp(-rep.theta * L);
    double thr_prod = std::exp(-0.5 * rep.theta * std::pow(L, rep.mu));
    for (int i = 0; i < grid_points; ++i) {
        double E = lo + (hi - lo) * (i + 0.5) / grid_points;
        ModeProxy p = proxy_for_energy(sys, fh.sites, E, nu, delta_E);
        double W = w_point(p, x0);
        double WL = p.empty() ? 0.0 : w_annulus(p, x0, L, host);
        ++rep.grid_points;
        if (W > thr_w && WL > thr_wl) ++rep.implication_violations;
        if (W * WL >= thr_prod) ++rep.product_violations;
        rep.products.push_back(W * WL);
    }
    if (rep.grid_points > 0) {
        rep.violation_rate = double(rep.implication_violations) / double(rep.grid_points);
        rep.product_violation_rate = double(rep.product_violations) / double(rep.grid_points);
    }
    return rep;
}

}  // namespace msa

#endif
