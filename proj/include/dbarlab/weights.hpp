#pragma once

#include <dbarlab/grid.hpp>

#include <algorithm>
#include <map>

namespace dbarlab {

// ---------------------------------------------------------------------------
// Weights and Muckenhoupt-type constants
//
// A weight is a named pointwise rule mu: C^n -> [0, inf). The A_p machinery
// estimates sup over probe discs of (avg mu) (avg mu^{1/(1-p)})^{p-1}. A
// finite probe family cannot prove unboundedness, so divergence is reported
// through an explicit falsifiable protocol: partial dual integrals over
// annular octaves shrinking into a singular point must grow monotonically by
// a fixed factor across a fixed window. Homogeneous weights make the na236ve
// channel (same value on shrinking discs) exactly flat, because discrete
// averages on scale-invariant grids are scale-invariant; the octave ladder is
// what actually distinguishes integrable from non-integrable duals.

struct Weight {
    std::string name;
    int dim = 1;
    std::function<double(const cplx*)> mu;
    /// optional closed-form radial profile mu(|z|) for oracle checks (n = 1)
    std::function<double(double)> radial_profile;
    /// points in coordinate j where mu or its dual can blow up, given the
    /// values of the other coordinates
    std::function<std::vector<cplx>(int j, const std::vector<cplx>& at)> singular_in_coord;
    /// per-factor split mu(z) = prod_j factor_mu[j](z_j), when one exists;
    /// empty for weights that do not factor across coordinates
    std::vector<std::function<double(cplx)>> factor_mu;

    double operator()(const cplx* z) const { return mu(z); }
};

inline Weight make_weight(std::string name, int dim,
                          std::function<double(const cplx*)> mu,
                          std::vector<std::vector<cplx>> coord_singular,
                          std::function<double(double)> radial = {},
                          std::vector<std::function<double(cplx)>> factor_mu = {}) {
    Weight w;
    w.name = std::move(name);
    w.dim = dim;
    w.mu = std::move(mu);
    w.radial_profile = std::move(radial);
    w.factor_mu = std::move(factor_mu);
    require(w.factor_mu.empty() || static_cast<int>(w.factor_mu.size()) == dim,
            "make_weight: factor_mu must have one entry per coordinate");
    w.singular_in_coord = [s = std::move(coord_singular)](
                              int j, const std::vector<cplx>&) -> std::vector<cplx> {
        return j < static_cast<int>(s.size()) ? s[static_cast<std::size_t>(j)]
                                              : std::vector<cplx>{};
    };
    return w;
}

/// Named weights used across the library and the command line.
inline const std::vector<Weight>& weight_registry() {
    static const std::vector<Weight> reg = [] {
        std::vector<Weight> r;
        r.push_back(make_weight(
            "one", 1, [](const cplx*) { return 1.0; }, {{}},
            [](double) { return 1.0; }, {[](cplx) { return 1.0; }}));
        r.push_back(make_weight(
            "one2", 2, [](const cplx*) { return 1.0; }, {{}, {}}, {},
            {[](cplx) { return 1.0; }, [](cplx) { return 1.0; }}));
        r.push_back(make_weight(
            "zsq", 1, [](const cplx* z) { return std::norm(z[0]); }, {{cplx{0, 0}}},
            [](double t) { return t * t; }, {[](cplx z) { return std::norm(z); }}));
        r.push_back(make_weight(
            "zquart", 1,
            [](const cplx* z) {
                double q = std::norm(z[0]);
                return q * q;
            },
            {{cplx{0, 0}}}, [](double t) { return t * t * t * t; }, {[](cplx z) { double q = std::norm(z); return q * q; }}));
        r.push_back(make_weight(
            "w2sq", 2, [](const cplx* z) { return std::norm(z[1]); },
            {{}, {cplx{0, 0}}}, {}, {[](cplx) { return 1.0; }, [](cplx z) { return std::norm(z); }}));
        Weight diff;
        diff.name = "diffsq";
        diff.dim = 2;
        diff.mu = [](const cplx* z) { return std::norm(z[0] - z[1]); };
        diff.singular_in_coord = [](int j, const std::vector<cplx>& at) {
            return std::vector<cplx>{at[static_cast<std::size_t>(1 - j)]};
        };
        r.push_back(std::move(diff));
        return r;
    }();
    return reg;
}

inline const Weight& find_weight(const std::string& name) {
    for (const auto& w : weight_registry())
        if (w.name == name) return w;
    std::string known;
    for (const auto& w : weight_registry()) known += (known.empty() ? "" : ", ") + w.name;
    fail("unknown weight '" + name + "' (known: " + known + ")");
}

// ---------------------------------------------------------------------------
// Probe families

struct ProbeDisc {
    cplx center{0, 0};
    double radius = 1;
};

struct DiscFamily {
    std::vector<ProbeDisc> discs;
    std::string rule;

    void validate() const {
        require(!discs.empty(), "DiscFamily: family must be non-empty");
        for (const auto& d : discs)
            require(d.radius > 0, "DiscFamily: radii must be positive");
    }
};

/// Default family: centers on a 9x9 lattice over the bounding box plus every
/// singular location, radii log-spaced 2^0 .. 2^-12 times the domain radius.
inline DiscFamily default_disc_family(cplx box_lo, cplx box_hi,
                                      const std::vector<cplx>& singular_points,
                                      double domain_radius = 1.0, int octaves = 13) {
    DiscFamily fam;
    std::vector<cplx> centers;
    for (int a = 0; a < 9; ++a)
        for (int b = 0; b < 9; ++b)
            centers.emplace_back(
                box_lo.real() + (box_hi.real() - box_lo.real()) * a / 8.0,
                box_lo.imag() + (box_hi.imag() - box_lo.imag()) * b / 8.0);
    for (cplx s : singular_points) {
        bool dup = false;
        for (cplx c : centers) dup = dup || std::abs(c - s) < 1e-14;
        if (!dup) centers.push_back(s);
    }
    for (cplx c : centers)
        for (int k = 0; k < octaves; ++k)
            fam.discs.push_back({c, domain_radius * std::pow(2.0, -k)});
    fam.rule = "9x9 lattice + singular points; radii 2^0..2^-" +
               std::to_string(octaves - 1) + " x " + fmt_g17(domain_radius);
    fam.validate();
    return fam;
}

// ---------------------------------------------------------------------------
// A_p estimation

enum class ApVerdict { FINITE, DIVERGENT, INCONCLUSIVE };

inline const char* to_string(ApVerdict v) {
    switch (v) {
        case ApVerdict::FINITE: return "FINITE";
        case ApVerdict::DIVERGENT: return "DIVERGENT";
        default: return "INCONCLUSIVE";
    }
}

struct DiscValue {
    cplx center{0, 0};
    double radius = 0;
    double value = 0;
    bool ladder_divergent = false;
    bool stabilized = true;
};

struct ApEstimate {
    double constant = 0;
    cplx attaining_center{0, 0};
    double attaining_radius = 0;
    std::vector<DiscValue> trace;
    ApVerdict verdict = ApVerdict::INCONCLUSIVE;
};

namespace detail {

/// dual exponent power via log-domain arithmetic; clamped so a node that
/// lands on a zero of mu yields a huge finite value instead of inf
inline double dual_power(double mu_val, double p) {
    double lg = mu_val > 1e-300 ? std::log(mu_val) : std::log(1e-300);
    return std::exp(std::min(700.0, lg / (1.0 - p)));
}

struct DiscProbeResult {
    double value = 0;
    bool ladder_divergent = false;
    bool stabilized = true;
};

/// One probe disc: averages of mu and its dual power over the disc. If the
/// disc is centered on a singular point of the 1-D weight, both integrals are
/// accumulated over annular octaves shrinking into the center and the partial
/// sums are run through the growth protocol; otherwise a single uniform grid
/// is used.
inline DiscProbeResult probe_disc(const std::function<double(cplx)>& mu, double p,
                                  const ProbeDisc& disc,
                                  const std::vector<cplx>& singular, Resolution res,
                                  int ladder_octaves = 16) {
    DiscProbeResult out;
    bool centered_singular = false;
    for (cplx s : singular)
        centered_singular =
            centered_singular || std::abs(s - disc.center) <= 1e-12 * std::max(1.0, disc.radius);

    auto accumulate = [&](const PolarGrid& g, kahan& j_acc, kahan& i_acc, kahan& w_acc) {
        for (int i = 0; i < g.size(); ++i) {
            double m = mu(g.node(i));
            require(m >= 0.0 && std::isfinite(m),
                    "weight must be finite and nonnegative at probe nodes");
            double w = g.weight(i);
            j_acc.add(m * w);
            i_acc.add(dual_power(m, p) * w);
            w_acc.add(w);
        }
    };

    if (!centered_singular) {
        PolarGrid g = PolarGrid::uniform(DiscFactor{disc.center, disc.radius, 0.0},
                                         res.n_r, res.n_theta);
        kahan j, i, w;
        accumulate(g, j, i, w);
        out.value = (j.value() / w.value()) *
                    std::pow(i.value() / w.value(), p - 1.0);
        return out;
    }

    kahan j, i, w;
    std::vector<double> j_part, i_part;
    for (int m = 1; m <= ladder_octaves; ++m) {
        double outer = disc.radius * std::pow(2.0, 1.0 - m);
        PolarGrid g = PolarGrid::uniform(DiscFactor{disc.center, outer, 0.5 * outer}, 8,
                                         std::max(16, res.n_theta / 2));
        accumulate(g, j, i, w);
        j_part.push_back(j.value());
        i_part.push_back(i.value());
    }
    out.value = (j.value() / w.value()) * std::pow(i.value() / w.value(), p - 1.0);
    out.ladder_divergent = dyadic_growth(i_part, {}) || dyadic_growth(j_part, {});
    out.stabilized = stabilized(i_part, 3, 1e-3) && stabilized(j_part, 3, 1e-3);
    return out;
}

inline ApEstimate estimate_over_family(const std::function<double(cplx)>& mu, double p,
                                       const DiscFamily& family,
                                       const std::vector<cplx>& singular,
                                       Resolution res) {
    ApEstimate est;
    est.trace.resize(family.discs.size());
    parallel_for(family.discs.size(), [&](std::size_t k) {
        const ProbeDisc& d = family.discs[k];
        auto r = probe_disc(mu, p, d, singular, res);
        est.trace[k] = {d.center, d.radius, r.value, r.ladder_divergent, r.stabilized};
    });

    bool any_divergent = false, all_stable = true;
    for (const auto& t : est.trace) {
        any_divergent = any_divergent || t.ladder_divergent;
        all_stable = all_stable && t.stabilized;
        if (t.value > est.constant) {
            est.constant = t.value;
            est.attaining_center = t.center;
            est.attaining_radius = t.radius;
        }
    }

    // shrinking-radius channel: per-disc values at a singular center ordered
    // by decreasing radius feed the same growth protocol
    std::map<std::pair<double, double>, std::vector<std::pair<double, double>>> by_center;
    for (const auto& t : est.trace) {
        bool at_singular = false;
        for (cplx s : singular) at_singular = at_singular || std::abs(s - t.center) < 1e-12;
        if (at_singular) by_center[{t.center.real(), t.center.imag()}].push_back(
            {t.radius, t.value});
    }
    for (auto& [c, seq] : by_center) {
        std::sort(seq.begin(), seq.end(),
                  [](auto a, auto b) { return a.first > b.first; });
        std::vector<double> vals;
        for (auto& [r, v] : seq) vals.push_back(v);
        any_divergent = any_divergent || dyadic_growth(vals, {});
    }

    est.verdict = any_divergent  ? ApVerdict::DIVERGENT
                  : all_stable   ? ApVerdict::FINITE
                                 : ApVerdict::INCONCLUSIVE;
    return est;
}

}  // namespace detail

/// Muckenhoupt constant estimate for a one-dimensional weight.
inline ApEstimate ap_constant(const Weight& w, double p, const DiscFamily& family,
                              Resolution res = {24, 32}) {
    require(w.dim == 1, "ap_constant: weight must be one-dimensional");
    require(p > 1.0, "ap_constant: p must exceed 1");
    family.validate();
    auto mu1 = [&](cplx z) { return w.mu(&z); };
    return detail::estimate_over_family(mu1, p, family,
                                        w.singular_in_coord(0, {cplx{0, 0}}), res);
}

/// Slice-wise constant: the supremum over coordinates j and sampled slice
/// points of the 1-D constant of z_j -> mu(.., z_j, ..). Sample points are
/// full n-dimensional points; slot j is swept, the others stay fixed. For
/// n = 1 this is ap_constant evaluated at the same family, exactly.
inline ApEstimate ap_star_constant(const Weight& w, double p,
                                   const std::vector<std::vector<cplx>>& slice_points,
                                   const DiscFamily& family, Resolution res = {24, 32}) {
    require(p > 1.0, "ap_star_constant: p must exceed 1");
    require(!slice_points.empty(), "ap_star_constant: slice sample must be non-empty");
    family.validate();
    ApEstimate best;
    best.verdict = ApVerdict::FINITE;
    bool any_divergent = false, all_stable = true, inited = false;
    for (int j = 0; j < w.dim; ++j) {
        for (const auto& at : slice_points) {
            require(static_cast<int>(at.size()) == w.dim,
                    "ap_star_constant: slice point dimension mismatch");
            auto mu1 = [&, j](cplx zj) {
                std::vector<cplx> z = at;
                z[static_cast<std::size_t>(j)] = zj;
                return w.mu(z.data());
            };
            ApEstimate e = detail::estimate_over_family(mu1, p, family,
                                                        w.singular_in_coord(j, at), res);
            any_divergent = any_divergent || e.verdict == ApVerdict::DIVERGENT;
            all_stable = all_stable && e.verdict == ApVerdict::FINITE;
            if (!inited || e.constant > best.constant) {
                best.constant = e.constant;
                best.attaining_center = e.attaining_center;
                best.attaining_radius = e.attaining_radius;
                inited = true;
            }
            best.trace.insert(best.trace.end(), e.trace.begin(), e.trace.end());
        }
    }
    best.verdict = any_divergent ? ApVerdict::DIVERGENT
                   : all_stable  ? ApVerdict::FINITE
                                 : ApVerdict::INCONCLUSIVE;
    return best;
}

/// Default slice sample: 16 points per weight, generic lattice points plus
/// points adjacent to every per-coordinate singularity.
inline std::vector<std::vector<cplx>> default_slice_points(const Weight& w) {
    std::vector<std::vector<cplx>> pts;
    const cplx generic[8] = {{0.5, 0.0},   {-0.5, 0.0}, {0.0, 0.5},  {0.3, 0.4},
                             {-0.2, -0.6}, {0.7, 0.1},  {-0.6, 0.3}, {0.1, -0.2}};
    for (cplx g : generic) pts.emplace_back(static_cast<std::size_t>(w.dim), g);
    std::vector<std::vector<cplx>> extra;
    for (int j = 0; j < w.dim; ++j) {
        std::vector<cplx> base(static_cast<std::size_t>(w.dim), cplx{0.5, 0.0});
        for (cplx s : w.singular_in_coord(j, base)) {
            for (double off : {0.0, 1.0 / 64.0}) {
                auto p = base;
                p[static_cast<std::size_t>(j)] = s + cplx{off, 0.0};
                extra.push_back(std::move(p));
            }
        }
    }
    for (auto& p : extra) {
        pts.push_back(p);
        if (pts.size() >= 16) break;
    }
    while (pts.size() < 16)
        pts.emplace_back(static_cast<std::size_t>(w.dim), cplx{0.25, 0.25});
    return pts;
}

// ---------------------------------------------------------------------------
// Dilation characterization

struct DilationRow {
    std::vector<double> delta;
    double estimate = 0;
};

struct DilationReport {
    std::vector<DilationRow> rows;
    double spread = 0;  // max / min of the estimates
    bool uniform = false;
    double bound = 0;
};

/// A_p estimates of the dilated weights mu(delta_1 z_1, ..., delta_n z_n)
/// over polydisc probes (each family disc lifted diagonally to a product of
/// equal discs, the documented ball approximation). UNIFORM when the spread
/// of the estimates stays under the bound.
inline DilationReport dilation_ap_check(const Weight& w, double p,
                                        const std::vector<std::vector<double>>& dilations,
                                        const DiscFamily& family,
                                        Resolution res = {12, 16},
                                        double uniform_bound = 1.05) {
    require(p > 1.0, "dilation_ap_check: p must exceed 1");
    require(!dilations.empty(), "dilation_ap_check: need at least one dilation");
    family.validate();
    DilationReport rep;
    rep.bound = uniform_bound;
    for (const auto& d : dilations) {
        require(static_cast<int>(d.size()) == w.dim,
                "dilation_ap_check: dilation dimension mismatch");
        for (double c : d) require(c > 0, "dilation_ap_check: dilation components must be positive");

        double best = 0;
        std::vector<double> per_disc(family.discs.size());
        parallel_for(family.discs.size(), [&](std::size_t k) {
            const ProbeDisc& pd = family.discs[k];
            std::vector<DiscFactor> facs(static_cast<std::size_t>(w.dim),
                                         DiscFactor{pd.center, pd.radius, 0.0});
            std::vector<Resolution> rr(static_cast<std::size_t>(w.dim), res);
            auto g = build_grid(facs, rr);
            kahan jj, ii, ww;
            std::vector<cplx> z(static_cast<std::size_t>(w.dim));
            for (std::size_t i = 0; i < g->size(); ++i) {
                g->coords(i, z.data());
                for (int q = 0; q < w.dim; ++q)
                    z[static_cast<std::size_t>(q)] *= d[static_cast<std::size_t>(q)];
                double m = w.mu(z.data());
                require(m >= 0.0 && std::isfinite(m),
                        "weight must be finite and nonnegative at probe nodes");
                double wt = g->weight(i);
                jj.add(m * wt);
                ii.add(detail::dual_power(m, p) * wt);
                ww.add(wt);
            }
            per_disc[k] = (jj.value() / ww.value()) *
                          std::pow(ii.value() / ww.value(), p - 1.0);
        });
        for (double v : per_disc) best = std::max(best, v);
        rep.rows.push_back({d, best});
    }
    double lo = rep.rows[0].estimate, hi = lo;
    for (const auto& r : rep.rows) {
        lo = std::min(lo, r.estimate);
        hi = std::max(hi, r.estimate);
    }
    rep.spread = lo > 0 ? hi / lo : std::numeric_limits<double>::infinity();
    rep.uniform = rep.spread <= uniform_bound;
    return rep;
}

}  // namespace dbarlab
