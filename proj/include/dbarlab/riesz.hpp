#pragma once

#include <dbarlab/factor_op.hpp>
#include <dbarlab/weights.hpp>

namespace dbarlab {

// ---------------------------------------------------------------------------
// Riesz-type fractional integral on product domains
//
// (R_a f)(z) = sum_zeta f(zeta) prod_j |zeta_j - z_j|^{-a_j} area(zeta).
// Per factor the kernel is rotation invariant, so each factor gets a
// FactorKernel whose diagonal cell is the exact integral of the kernel over
// the cell with f frozen at the center (locally integrable for a_j < 2).
// The factored application sums axis by axis; the direct method evaluates
// the full product-kernel double sum. Finite Fubini makes them equal up to
// compensation error, which the tests assert.

struct RieszExponent {
    std::vector<double> alpha;

    void validate(int dim) const {
        require(static_cast<int>(alpha.size()) == dim,
                "RieszExponent: one exponent per factor required");
        for (double a : alpha)
            require(a > 0.0 && a < 2.0, "RieszExponent: exponents must lie in (0, 2)");
    }
};

enum class RieszMethod { factored, direct };

inline std::vector<FactorKernel> riesz_kernels(const ProductGrid& g,
                                               const RieszExponent& a) {
    a.validate(g.dim());
    std::vector<FactorKernel> ks;
    ks.reserve(a.alpha.size());
    for (int j = 0; j < g.dim(); ++j)
        ks.push_back(build_factor_kernel_exact(g.factor(j), power_radial(a.alpha[j]), 0,
                                               GammaSymmetry::hermitian));
    return ks;
}

inline SampledField riesz_apply(const SampledField& f, const std::vector<FactorKernel>& ks,
                                RieszMethod method = RieszMethod::factored) {
    const ProductGrid& g = f.grid();
    require(static_cast<int>(ks.size()) == g.dim(),
            "riesz_apply: one kernel per factor required");
    if (method == RieszMethod::factored) {
        SampledField out = f;
        for (int j = 0; j < g.dim(); ++j) out = apply_factor_op(out, j, ks[j]);
        return out;
    }

    // direct product-kernel sum, desk scale only
    const std::size_t n = g.size();
    const int dim = g.dim();
    std::vector<std::vector<int>> ring(static_cast<std::size_t>(dim)),
        sector(static_cast<std::size_t>(dim));
    for (int j = 0; j < dim; ++j) {
        ring[static_cast<std::size_t>(j)].resize(n);
        sector[static_cast<std::size_t>(j)].resize(n);
        for (std::size_t m = 0; m < n; ++m) {
            int fn = g.factor_node(m, j);
            ring[static_cast<std::size_t>(j)][m] = g.factor(j).ring_of(fn);
            sector[static_cast<std::size_t>(j)][m] = g.factor(j).sector_of(fn);
        }
    }
    std::vector<cplx> out(n);
    parallel_for(n, [&](std::size_t m) {
        kahan_cplx acc;
        for (std::size_t q = 0; q < n; ++q) {
            cplx k{1.0, 0.0};
            for (int j = 0; j < dim; ++j) {
                const auto& rj = ring[static_cast<std::size_t>(j)];
                const auto& sj = sector[static_cast<std::size_t>(j)];
                int d = sj[q] - sj[m];
                if (d < 0) d += ks[static_cast<std::size_t>(j)].n_theta;
                k *= ks[static_cast<std::size_t>(j)].row(rj[m], rj[q])[d];
            }
            acc.add(k * f[q]);
        }
        out[m] = acc.value();
    });
    return SampledField(f.grid_handle(), std::move(out));
}

inline SampledField riesz_apply(const SampledField& f, const RieszExponent& a,
                                RieszMethod method = RieszMethod::factored) {
    return riesz_apply(f, riesz_kernels(f.grid(), a), method);
}

// ---------------------------------------------------------------------------
// Hardy-Littlewood maximal function (one factor, zero extension outside)

/// 12 dyadic radii from the factor diameter down, floored at the cell size.
inline std::vector<double> default_radius_ladder(const PolarGrid& g) {
    double cell = 0.0;
    for (int i = 0; i < g.n_r(); ++i)
        cell = std::max(cell, (g.edge(i + 1) - g.edge(i)) + g.edge(i + 1) * g.dtheta());
    double diam = 2.0 * g.factor().radius;
    std::vector<double> out;
    for (int k = 0; k < 12; ++k) {
        double r = std::max(cell, diam * std::pow(2.0, -k));
        if (out.empty() || r < out.back()) out.push_back(r);
    }
    return out;
}

/// Mf(z) = max over probe radii of (1/(pi r^2)) * integral of |f| over the
/// probe disc, with f treated as piecewise constant on its cells and zero
/// outside the factor. Cells straddling the probe circle are covered by an
/// 8x8 midpoint refinement of the cell.
inline SampledField maximal_function(const SampledField& f,
                                     const std::vector<double>& radii) {
    const ProductGrid& g = f.grid();
    require(g.dim() == 1, "maximal_function: single-factor fields only");
    require(!radii.empty(), "maximal_function: need at least one probe radius");
    for (double r : radii) require(r > 0, "maximal_function: radii must be positive");
    const PolarGrid& fac = g.factor(0);
    const int n = fac.size(), nth = fac.n_theta();
    const double dth = fac.dtheta();

    std::vector<double> absf(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) absf[static_cast<std::size_t>(i)] = std::abs(f[static_cast<std::size_t>(i)]);
    std::vector<double> half_diag(static_cast<std::size_t>(fac.n_r()));
    for (int i = 0; i < fac.n_r(); ++i)
        half_diag[static_cast<std::size_t>(i)] =
            0.5 * (fac.edge(i + 1) - fac.edge(i)) + 0.5 * fac.edge(i + 1) * dth;

    std::vector<cplx> out(static_cast<std::size_t>(n));
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t m) {
        cplx z = fac.node(static_cast<int>(m));
        double best = 0.0;
        for (double r : radii) {
            kahan num;
            for (int q = 0; q < n; ++q) {
                double fq = absf[static_cast<std::size_t>(q)];
                if (fq == 0.0) continue;
                int iq = fac.ring_of(q);
                double d = std::abs(fac.node(q) - z);
                double hd = half_diag[static_cast<std::size_t>(iq)];
                if (d <= r - hd) {
                    num.add(fq * fac.weight(q));
                } else if (d < r + hd) {
                    double e0 = fac.edge(iq), e1 = fac.edge(iq + 1);
                    double th0 = (fac.sector_of(q)) * dth;
                    cplx c = fac.factor().center;
                    for (int s = 0; s < 8; ++s) {
                        double a0 = e0 + (e1 - e0) * s / 8.0;
                        double a1 = e0 + (e1 - e0) * (s + 1) / 8.0;
                        double rc = 0.5 * (a0 + a1);
                        double area = 0.5 * (a1 * a1 - a0 * a0) * dth / 8.0;
                        for (int t = 0; t < 8; ++t) {
                            double th = th0 + dth * (t + 0.5) / 8.0;
                            cplx sub = c + std::polar(rc, th);
                            if (std::abs(sub - z) < r) num.add(fq * area);
                        }
                    }
                }
            }
            best = std::max(best, num.value() / (pi * r * r));
        }
        out[m] = cplx{best, 0.0};
    });
    return SampledField(f.grid_handle(), std::move(out));
}

inline SampledField maximal_function(const SampledField& f) {
    require(f.grid().dim() == 1, "maximal_function: single-factor fields only");
    return maximal_function(f, default_radius_ladder(f.grid().factor(0)));
}

// ---------------------------------------------------------------------------
// Weighted boundedness probes

enum class BoundednessVerdict { BOUNDED, NOT_BOUNDED_AT_PROTOCOL, INCONCLUSIVE };

inline const char* to_string(BoundednessVerdict v) {
    switch (v) {
        case BoundednessVerdict::BOUNDED: return "BOUNDED";
        case BoundednessVerdict::NOT_BOUNDED_AT_PROTOCOL: return "NOT-BOUNDED-AT-PROTOCOL";
        default: return "INCONCLUSIVE";
    }
}

struct FieldGenerator {
    std::string name;
    std::function<cplx(const cplx*)> fn;
};

struct BoundednessRow {
    int input = 0;
    int level = 0;
    double ratio = 0;
};

struct BoundednessReport {
    std::vector<BoundednessRow> trace;
    std::vector<double> input_ratios;  // finest-level ratio per input, NaN if skipped
    double max_ratio = 0;
    int levels = 0;
    std::vector<std::string> notices;
    BoundednessVerdict verdict = BoundednessVerdict::INCONCLUSIVE;
};

/// Ratios ||R_a f||_{p,mu} / ||f||_{p,mu} for each input across refinement
/// levels. An input is refinement-stable when its last level-to-level change
/// is at most 10%. A fixed discrete input always has a finite ratio, so
/// unboundedness is probed along the input sweep: the finest-level ratios in
/// input order feed the same growth protocol as the weights module. Verdict:
/// NOT-BOUNDED-AT-PROTOCOL if that fires, else BOUNDED when every live input
/// is refinement-stable, else INCONCLUSIVE.
inline BoundednessReport boundedness_probe(const std::vector<DiscFactor>& factors,
                                           const std::vector<Resolution>& base,
                                           const std::vector<FieldGenerator>& inputs,
                                           const RieszExponent& a, const Weight& mu,
                                           double p, int levels) {
    require(!inputs.empty(), "boundedness_probe: need at least one input");
    require(levels >= 2, "boundedness_probe: need at least two refinement levels");
    require(p > 1.0, "boundedness_probe: p must exceed 1");
    require(mu.dim == static_cast<int>(factors.size()),
            "boundedness_probe: weight dimension must match the factors");
    a.validate(static_cast<int>(factors.size()));

    BoundednessReport rep;
    rep.levels = levels;
    const std::size_t ni = inputs.size();
    std::vector<std::vector<double>> ratios(ni);

    for (int lev = 0; lev < levels; ++lev) {
        double scale = std::pow(1.5, lev);
        std::vector<Resolution> res;
        res.reserve(base.size());
        for (const Resolution& b : base)
            res.push_back({static_cast<int>(std::lround(b.n_r * scale)),
                           static_cast<int>(std::lround(b.n_theta * scale))});
        grid_ptr g = build_grid(factors, res);
        auto ks = riesz_kernels(*g, a);
        auto mu_fn = [&](const cplx* z) { return mu.mu(z); };
        for (std::size_t i = 0; i < ni; ++i) {
            SampledField f = sample(g, inputs[i].fn);
            double nf = weighted_lp_norm(f, mu_fn, p);
            if (!(nf > 0.0)) {
                rep.notices.push_back("input '" + inputs[i].name + "' has zero norm at level " +
                                      std::to_string(lev) + "; skipped");
                continue;
            }
            SampledField rf = riesz_apply(f, ks);
            double ratio = weighted_lp_norm(rf, mu_fn, p) / nf;
            ratios[i].push_back(ratio);
            rep.trace.push_back({static_cast<int>(i), lev, ratio});
            rep.max_ratio = std::max(rep.max_ratio, ratio);
        }
    }

    bool all_stable = true;
    std::vector<double> finest;
    rep.input_ratios.assign(ni, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < ni; ++i) {
        if (ratios[i].empty()) continue;
        rep.input_ratios[i] = ratios[i].back();
        finest.push_back(ratios[i].back());
        if (ratios[i].size() < 2) {
            all_stable = false;
            continue;
        }
        double prev = ratios[i][ratios[i].size() - 2], last = ratios[i].back();
        all_stable = all_stable && std::abs(last - prev) <= 0.10 * std::abs(prev);
    }
    bool fired = dyadic_growth(finest, {});
    rep.verdict = fired        ? BoundednessVerdict::NOT_BOUNDED_AT_PROTOCOL
                  : all_stable ? BoundednessVerdict::BOUNDED
                               : BoundednessVerdict::INCONCLUSIVE;
    return rep;
}

}  // namespace dbarlab
