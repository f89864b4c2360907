#ifndef MSA_DYNAMICS_HPP
#define MSA_DYNAMICS_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "msa/hamiltonian.hpp"

// Spectrally filtered unitary evolution psi_t = e^{-itH} P_I delta_{x0} on a
// finite host box, weighted-moment statistics, and the disorder-averaged
// sup-moment statistic with bootstrap CI.

namespace msa {

inline std::vector<double> log_time_grid(double t_min, double t_max, int n) {
    if (!(t_min > 0 && t_max > t_min && n >= 2))
        throw std::invalid_argument("log_time_grid: need 0 < t_min < t_max, n >= 2");
    std::vector<double> t(static_cast<size_t>(n));
    double a = std::log(t_min), b = std::log(t_max);
    for (int i = 0; i < n; ++i) t[size_t(i)] = std::exp(a + (b - a) * i / (n - 1));
    return t;
}

struct EvolutionPlan {
    Interval filter{-1e9, 1e9};
    Site x0;                       // initial state delta_{x0}
    std::vector<double> times;     // sorted, log-spaced by convention
    std::vector<double> moment_orders{1.0};
    double leak_tolerance = 0.01;  // fraction of filtered mass allowed in the outer shell
};

// Precomputed spectral data for one (host, x0, I) triple.
struct Propagator {
    const FiniteHamiltonian* fh = nullptr;
    const EigenSystem* sys = nullptr;
    std::vector<int> modes;        // indices with E_k in I
    std::vector<double> amp0;      // <phi_k, delta_{x0}>
    double filtered_mass = 0;      // ||P_I delta_{x0}||^2
    std::vector<char> in_shell;    // outer 10% shell marker per site
};

inline Propagator make_propagator(const FiniteHamiltonian& fh, const EigenSystem& sys,
                                  const EvolutionPlan& plan) {
    Propagator p;
    p.fh = &fh;
    p.sys = &sys;
    p.modes = spectrum_in_interval(sys, plan.filter);
    Eigen::Index ix = -1;
    for (size_t i = 0; i < fh.sites.size(); ++i)
        if (fh.sites[i] == plan.x0) { ix = Eigen::Index(i); break; }
    if (ix < 0) throw std::invalid_argument("make_propagator: x0 not in host box");
    for (int k : p.modes) {
        double a = sys.evecs(ix, Eigen::Index(k));
        p.amp0.push_back(a);
        p.filtered_mass += a * a;
    }
    double shell_lo = 0.9 * (fh.box.side / 2.0);
    p.in_shell.assign(fh.sites.size(), 0);
    for (size_t i = 0; i < fh.sites.size(); ++i)
        if (double(sup_norm(sub(fh.sites[i], fh.box.center))) >= shell_lo) p.in_shell[i] = 1;
    return p;
}

// psi_t = sum_{E_k in I} e^{-i E_k t} <phi_k, delta_{x0}> phi_k
inline Eigen::VectorXcd evolve(const Propagator& p, double t) {
    Eigen::Index n = p.sys->evecs.rows();
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(n);
    for (size_t k = 0; k < p.modes.size(); ++k) {
        std::complex<double> phase = std::exp(std::complex<double>(0, -p.sys->evals[p.modes[k]] * t));
        psi += (p.amp0[k] * phase) *
               p.sys->evecs.col(Eigen::Index(p.modes[k])).cast<std::complex<double>>();
    }
    return psi;
}

// || <X>^q psi ||_{l2} over the host box, <x> = sqrt(1 + |x|^2).
inline double moment(const Eigen::VectorXcd& psi, const std::vector<Site>& sites, double q) {
    if (q < 0) throw std::invalid_argument("moment: q >= 0 required");
    double acc = 0;
    for (size_t i = 0; i < sites.size(); ++i)
        acc += std::pow(bracket(sites[i]), 2.0 * q) * std::norm(psi[Eigen::Index(i)]);
    return std::sqrt(acc);
}

inline double shell_mass(const Propagator& p, const Eigen::VectorXcd& psi) {
    double m = 0;
    for (size_t i = 0; i < p.in_shell.size(); ++i)
        if (p.in_shell[i]) m += std::norm(psi[Eigen::Index(i)]);
    return m;
}

struct Trajectory {
    std::vector<double> times;
    std::vector<double> moments;   // moment(psi_t, q) per time
    double sup_moment = 0;
    double filtered_mass = 0;
    bool leak_flag = false;        // outer-shell mass exceeded tolerance * filtered mass
    double max_norm_drift = 0;     // max | ||psi_t|| - ||P_I delta_{x0}|| |
};

inline Trajectory run_trajectory(const FiniteHamiltonian& fh, const EigenSystem& sys,
                                 const EvolutionPlan& plan, double q) {
    Propagator p = make_propagator(fh, sys, plan);
    Trajectory tr;
    tr.times = plan.times;
    tr.filtered_mass = p.filtered_mass;
    double ref_norm = std::sqrt(p.filtered_mass);
    for (double t : plan.times) {
        Eigen::VectorXcd psi = evolve(p, t);
        double mq = moment(psi, fh.sites, q);
        tr.moments.push_back(mq);
        tr.sup_moment = std::max(tr.sup_moment, mq);
        tr.max_norm_drift = std::max(tr.max_norm_drift, std::abs(psi.norm() - ref_norm));
        if (p.filtered_mass > 0 && shell_mass(p, psi) > plan.leak_tolerance * p.filtered_mass)
            tr.leak_flag = true;
    }
    return tr;
}

struct SdlStatistic {
    double mean = 0;               // mean over seeds of (sup_t moment_q)^s
    double ci_lo = 0, ci_hi = 0;   // bootstrap percentile CI
    std::vector<double> per_seed;  // per-seed sup^s values
    std::vector<Trajectory> trajectories;
    size_t leak_count = 0;
};

// Per seed: sup over the time grid of moment(psi_t, q)^s; then the disorder
// mean with a bootstrap percentile CI.  Leaking trajectories are kept in the
// output but counted, so callers can decide whether the host was big enough.
template <typename MakeField>
SdlStatistic sdl_statistic(MakeField&& make_field, const Box& host, const EvolutionPlan& plan,
                           double q, double s, int nseeds, int bootstrap = 400,
                           std::uint64_t boot_seed = 1234) {
    if (!(s > 0) || nseeds < 2) throw std::invalid_argument("sdl_statistic: need s > 0, seeds >= 2");
    SdlStatistic out;
    for (int seed = 0; seed < nseeds; ++seed) {
        FiniteHamiltonian fh = assemble(host, make_field(seed));
        EigenSystem sys = diagonalize(fh);
        Trajectory tr = run_trajectory(fh, sys, plan, q);
        if (tr.leak_flag) ++out.leak_count;
        out.per_seed.push_back(std::pow(tr.sup_moment, s));
        out.trajectories.push_back(std::move(tr));
    }
    for (double v : out.per_seed) out.mean += v;
    out.mean /= double(out.per_seed.size());
    std::mt19937_64 rng(boot_seed);
    std::uniform_int_distribution<size_t> pick(0, out.per_seed.size() - 1);
    std::vector<double> boots(static_cast<size_t>(bootstrap));
    for (int b = 0; b < bootstrap; ++b) {
        double acc = 0;
        for (size_t i = 0; i < out.per_seed.size(); ++i) acc += out.per_seed[pick(rng)];
        boots[size_t(b)] = acc / double(out.per_seed.size());
    }
    std::sort(boots.begin(), boots.end());
    out.ci_lo = boots[size_t(std::floor(0.025 * (bootstrap - 1)))];
    out.ci_hi = boots[size_t(std::ceil(0.975 * (bootstrap - 1)))];
    return out;
}

}  // namespace msa

#endif
