#pragma once

// Hartogs triangle H = {|z1| < |z2| < 1} via the biholomorphism
// psi(w1,w2) = (w1*w2, w2) from the punctured bidisc D x D*.
// Fields on H are sampled at z = psi(w) on a bidisc grid whose second
// factor is an annulus excising a small neighbourhood of the puncture,
// so pull-back and push-forward are exact re-indexings of the same data.

#include "dbarlab/dbar.hpp"

namespace dbarlab {

// ---------------------------------------------------------------------------
// coordinate maps

enum class MapDirection { to_product, to_triangle };

inline std::string to_string(MapDirection d) {
    return d == MapDirection::to_product ? "TO-PRODUCT" : "TO-TRIANGLE";
}

/// psi: (w1,w2) |-> (w1*w2, w2) and its inverse phi: (z1,z2) |-> (z1/z2, z2).
struct BiholoMap {
    static void apply(MapDirection dir, const cplx* in, cplx* out) {
        if (dir == MapDirection::to_triangle) {
            out[0] = in[0] * in[1];
            out[1] = in[1];
        } else {
            require(in[1] != cplx(0.0, 0.0), "BiholoMap: phi is singular at z2 = 0");
            out[0] = in[0] / in[1];
            out[1] = in[1];
        }
    }
    /// |det d(psi)|^2 = |w2|^2, the volume factor of the substitution z = psi(w).
    static double jacobian(const cplx* w) { return std::norm(w[1]); }
};

/// Bidisc-with-puncture grid: full disc in w1, annulus inner_radius < |w2| < 1.
/// The same grid carries triangle data through z = psi(w); geometric grading
/// of the w2 factor resolves dyadic neighbourhoods of the puncture but is not
/// usable with finite differences.
inline grid_ptr hartogs_grid(int n_r1, int n_theta1, int n_r2, int n_theta2,
                             double inner_radius,
                             RadialGrading w2_grading = RadialGrading::uniform) {
    require(inner_radius > 0.0 && inner_radius < 1.0,
            "hartogs_grid: inner_radius must lie in (0, 1)");
    PolarGrid f1 = PolarGrid::uniform(DiscFactor{}, n_r1, n_theta1);
    DiscFactor d2{cplx(0.0, 0.0), 1.0, inner_radius};
    PolarGrid f2 = w2_grading == RadialGrading::uniform
                       ? PolarGrid::uniform(d2, n_r2, n_theta2)
                       : PolarGrid::geometric(d2, n_r2, n_theta2);
    return product_of({f1, f2});
}

/// Samples fn(z1, z2) at z = psi(w) over the grid nodes.
template <class Fn>
SampledField sample_triangle(const grid_ptr& grid, Fn&& fn) {
    require(grid->dim() == 2, "sample_triangle: two-factor grid expected");
    return sample(grid, [&](const cplx* w) {
        cplx z[2];
        BiholoMap::apply(MapDirection::to_triangle, w, z);
        return fn(z[0], z[1]);
    });
}

// ---------------------------------------------------------------------------
// form transport

/// Pull-back of a (0,1)-form f = f1 dzbar1 + f2 dzbar2 on the triangle along
/// psi: h1 = (f1 . psi) wbar2, h2 = (f1 . psi) wbar1 + (f2 . psi).
/// The input is sampled in triangle coordinates at z = psi(w), so the
/// composition is a per-node formula on the shared grid.
inline Form01 pull_back_form(const Form01& f) {
    const ProductGrid& g = f.grid();
    require(g.dim() == 2, "pull_back_form: two-factor grid expected");
    require(f.dim() == 2, "pull_back_form: expected a two-component form");
    const std::vector<cplx>& f1 = f.comp[0].values();
    const std::vector<cplx>& f2 = f.comp[1].values();
    std::vector<cplx> h1(g.size()), h2(g.size());
    parallel_for(g.size(), [&](std::size_t i) {
        cplx w1 = std::conj(g.factor(0).node(g.factor_node(i, 0)));
        cplx w2 = std::conj(g.factor(1).node(g.factor_node(i, 1)));
        h1[i] = f1[i] * w2;
        h2[i] = f1[i] * w1 + f2[i];
    });
    grid_ptr gp = f.grid_handle();
    return Form01({SampledField(gp, std::move(h1)), SampledField(gp, std::move(h2))});
}

/// Push-forward of a scalar potential along psi. Because triangle fields are
/// parametrized by w through z = psi(w), composition is the identity on the
/// stored values; the function exists so call sites state which coordinates
/// they mean, and it revalidates finiteness.
inline SampledField push_forward(const SampledField& u) {
    require(u.grid().dim() == 2, "push_forward: two-factor grid expected");
    return SampledField(u.grid_handle(), std::vector<cplx>(u.values()));
}

/// L^p norm on the triangle: the substitution z = psi(w) turns dV_z into
/// |w2|^2 dV_w, so the norm is the |w2|^2-weighted norm of the same samples.
inline double triangle_lp_norm(const SampledField& u, double p) {
    require(u.grid().dim() == 2, "triangle_lp_norm: two-factor grid expected");
    return weighted_lp_norm(u, [](const cplx* w) { return std::norm(w[1]); }, p);
}

inline double triangle_form_lp_norm(const Form01& f, double p) {
    require(f.grid().dim() == 2, "triangle_form_lp_norm: two-factor grid expected");
    return form_lp_norm(f, [](const cplx* w) { return std::norm(w[1]); }, p);
}

// ---------------------------------------------------------------------------
// test forms

/// Radial C^3 bump supported on |w - center| <= radius:
/// B(w) = (1 - |w - center|^2 / radius^2)^4 inside, 0 outside.
struct Bump {
    cplx center{0.0, 0.0};
    double radius = 0.5;

    double value(cplx w) const {
        double q = std::norm(w - center) / (radius * radius);
        if (q >= 1.0) return 0.0;
        double s = 1.0 - q;
        double s2 = s * s;
        return s2 * s2;
    }
    cplx dwbar(cplx w) const {
        double q = std::norm(w - center) / (radius * radius);
        if (q >= 1.0) return cplx(0.0, 0.0);
        double s = 1.0 - q;
        return -4.0 * s * s * s * (w - center) / (radius * radius);
    }
    /// Exact integral over the plane (equivalently over any disc containing
    /// the support): pi * radius^2 / 5.
    double mass() const { return pi * radius * radius / 5.0; }
};

/// Product test forms on a two-factor domain. scalar20 is the smooth
/// compactly supported function eta(w) = amplitude * B1(w1) * B2(w2); pair21
/// is the (0,1)-current-dual pair derived from that scalar,
/// (eta1, eta2) = (d eta / dwbar2, -d eta / dwbar1), so pairing a form
/// against pair21 componentwise equals the weak pairing against scalar20.
enum class TestFormKind { scalar20, pair21 };

struct TestForm {
    TestFormKind kind = TestFormKind::scalar20;
    Bump b1, b2;
    cplx amplitude{1.0, 0.0};
    /// Declares that the w2-factor support stays away from w2 = 0, so an
    /// annulus grid with a matching hole integrates it without loss.
    bool avoid_puncture = false;

    cplx value(cplx w1, cplx w2) const {
        return amplitude * b1.value(w1) * b2.value(w2);
    }
    cplx d1(cplx w1, cplx w2) const { return amplitude * b1.dwbar(w1) * b2.value(w2); }
    cplx d2(cplx w1, cplx w2) const { return amplitude * b1.value(w1) * b2.dwbar(w2); }

    void validate_support(const ProductGrid& g) const {
        require(g.dim() == 2, "TestForm: two-factor grid expected");
        for (int j = 0; j < 2; ++j) {
            const Bump& b = j == 0 ? b1 : b2;
            const DiscFactor& d = g.factor(j).factor();
            double dist = std::abs(b.center - d.center);
            require(b.radius > 0.0, "TestForm: bump radius must be positive");
            require(dist + b.radius < d.radius + 1e-12,
                    "TestForm: bump support leaves factor " + std::to_string(j + 1));
            bool need_hole = d.inner_radius > 0.0 && (j == 0 || avoid_puncture);
            if (need_hole)
                require(dist - b.radius >= d.inner_radius,
                        "TestForm: bump support reaches into the excised hole of factor " +
                            std::to_string(j + 1));
        }
    }
};

namespace detail {

/// Per-cell integrals of a bump and its wbar-derivative over one grid factor,
/// by tensor Gauss quadrature on each polar cell. Pairings against products
/// of bumps then factorize into sums of per-cell table entries, which removes
/// the midpoint-rule floor from the test-form side.
struct BumpTable {
    std::vector<double> val;
    std::vector<cplx> dval;
};

inline BumpTable bump_cell_table(const PolarGrid& f, const Bump& b, int n_gauss = 8) {
    const quad_rule& q = gauss_legendre(n_gauss);
    BumpTable t;
    t.val.assign(static_cast<std::size_t>(f.size()), 0.0);
    t.dval.assign(static_cast<std::size_t>(f.size()), cplx(0.0, 0.0));
    double dth = f.dtheta();
    for (int ring = 0; ring < f.n_r(); ++ring) {
        double r0 = f.edge(ring), r1 = f.edge(ring + 1);
        double rm = 0.5 * (r0 + r1), rh = 0.5 * (r1 - r0);
        // skip cells that cannot meet the support
        double lo = std::abs(std::abs(b.center - f.factor().center) - rm) - rh;
        if (lo > b.radius) continue;
        for (int sec = 0; sec < f.n_theta(); ++sec) {
            double th0 = f.theta(sec) - 0.5 * dth;
            kahan vacc;
            kahan_cplx dacc;
            for (int ir = 0; ir < n_gauss; ++ir) {
                double r = rm + rh * q.x[ir];
                double wr = rh * q.w[ir] * r;
                for (int it = 0; it < n_gauss; ++it) {
                    double th = th0 + 0.5 * dth * (1.0 + q.x[it]);
                    double ww = wr * 0.5 * dth * q.w[it];
                    cplx w = f.factor().center + r * cplx(std::cos(th), std::sin(th));
                    vacc.add(ww * b.value(w));
                    dacc.add(ww * b.dwbar(w));
                }
            }
            int i = f.node_at(ring, sec);
            t.val[static_cast<std::size_t>(i)] = vacc.value();
            t.dval[static_cast<std::size_t>(i)] = dacc.value();
        }
    }
    return t;
}

}  // namespace detail

/// Weak pairing of a (0,1)-form h on the product domain against a scalar
/// test function eta:
///   -< dbar h, eta > := integral of h1 * d eta/dwbar2 - h2 * d eta/dwbar1.
/// Vanishes (for all admissible eta) exactly when h is dbar-closed as a
/// current on the region covered by the grid. The test-form factors are
/// integrated per cell, so the quadrature error comes only from the cellwise
/// sampling of h.
inline cplx weak_dbar_pairing(const Form01& h, const TestForm& eta) {
    const ProductGrid& g = h.grid();
    require(g.dim() == 2, "weak_dbar_pairing: two-factor grid expected");
    require(h.dim() == 2, "weak_dbar_pairing: expected a two-component form");
    require(eta.kind == TestFormKind::scalar20,
            "weak_dbar_pairing: scalar test form expected");
    eta.validate_support(g);
    detail::BumpTable t1 = detail::bump_cell_table(g.factor(0), eta.b1);
    detail::BumpTable t2 = detail::bump_cell_table(g.factor(1), eta.b2);
    const std::vector<cplx>& h1 = h.comp[0].values();
    const std::vector<cplx>& h2 = h.comp[1].values();
    kahan_cplx acc;
    for (std::size_t i = 0; i < g.size(); ++i) {
        int q1 = g.factor_node(i, 0), q2 = g.factor_node(i, 1);
        acc.add(h1[i] * (t1.val[static_cast<std::size_t>(q1)] *
                         t2.dval[static_cast<std::size_t>(q2)]) -
                h2[i] * (t1.dval[static_cast<std::size_t>(q1)] *
                         t2.val[static_cast<std::size_t>(q2)]));
    }
    return eta.amplitude * acc.value();
}

/// Weak pairing on the triangle, in z coordinates, against a product bump
/// chi(z) = B1(z1) * B2(z2) whose support is a compact polydisc inside H:
///   -< dbar f, chi > := integral of f1 * d chi/dzbar2 - f2 * d chi/dzbar1.
/// Evaluated through the substitution z = psi(w) with volume factor |w2|^2,
/// by the midpoint rule in both factors (the substitution mixes the factors,
/// so the pairing does not factorize; accuracy is O(h^2)).
inline cplx triangle_dbar_pairing(const Form01& f, const TestForm& chi) {
    const ProductGrid& g = f.grid();
    require(g.dim() == 2, "triangle_dbar_pairing: two-factor grid expected");
    require(f.dim() == 2, "triangle_dbar_pairing: expected a two-component form");
    require(chi.kind == TestFormKind::scalar20,
            "triangle_dbar_pairing: scalar test form expected");
    // the polydisc support must sit inside the triangle and the grid's image
    double c1 = std::abs(chi.b1.center), c2 = std::abs(chi.b2.center);
    require(c1 + chi.b1.radius < c2 - chi.b2.radius,
            "triangle_dbar_pairing: support must satisfy |z1| < |z2|");
    require(c2 + chi.b2.radius < 1.0,
            "triangle_dbar_pairing: support must stay inside |z2| < 1");
    require(c2 - chi.b2.radius >= g.factor(1).factor().inner_radius,
            "triangle_dbar_pairing: support reaches below the grid's inner radius");
    const std::vector<cplx>& f1 = f.comp[0].values();
    const std::vector<cplx>& f2 = f.comp[1].values();
    kahan_cplx acc;
    for (std::size_t i = 0; i < g.size(); ++i) {
        cplx w[2];
        g.coords(i, w);
        cplx z1 = w[0] * w[1], z2 = w[1];
        cplx dchi1 = chi.b1.dwbar(z1) * chi.b2.value(z2);
        cplx dchi2 = chi.b1.value(z1) * chi.b2.dwbar(z2);
        acc.add((f1[i] * dchi2 - f2[i] * dchi1) * (std::norm(w[1]) * g.weight(i)));
    }
    return chi.amplitude * acc.value();
}

// ---------------------------------------------------------------------------
// cutoff family and the extension test

/// chi_k(w) = chi(k w) with a fixed C^2 radial profile: identically 1 on
/// |w| <= 1/(2k), identically 0 on |w| >= 1/k, quintic smoothstep between.
/// The profile slope peaks at 3.75, so max |grad chi_k| <= 3.75 k.
struct CutoffFamily {
    int k = 2;

    static double profile(double rho) {
        if (rho <= 0.5) return 1.0;
        if (rho >= 1.0) return 0.0;
        double t = 2.0 * (rho - 0.5);
        return 1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
    }
    static double profile_slope(double rho) {
        if (rho <= 0.5 || rho >= 1.0) return 0.0;
        double t = 2.0 * (rho - 0.5);
        return -60.0 * t * t * (1.0 - t) * (1.0 - t);
    }

    double chi(cplx w) const { return profile(k * std::abs(w)); }
    cplx dchi_dwbar(cplx w) const {
        double r = std::abs(w);
        if (r == 0.0) return cplx(0.0, 0.0);
        return 0.5 * k * profile_slope(k * r) * (w / r);
    }
};

enum class ExtensionVerdict { EXTENDS, OBSTRUCTED };

inline std::string to_string(ExtensionVerdict v) {
    return v == ExtensionVerdict::EXTENDS ? "EXTENDS" : "OBSTRUCTED";
}

struct ExtensionRow {
    int k = 0;
    /// integral of h2 * d(chi_k eta)/dwbar1
    cplx dw1_term{0.0, 0.0};
    /// integral of h1 * d(chi_k eta)/dwbar2
    cplx dw2_term{0.0, 0.0};
    /// scale-weighted norm bound k^(4/p - 1) * ||h1||_{L^p(D x D_{1/k}, |w2|^2)};
    /// when it decays the cutoff terms must vanish in the limit.
    double majorant = 0.0;
};

struct ExtensionReport {
    std::vector<ExtensionRow> rows;
    double slope_dw1 = 0.0;
    double slope_dw2 = 0.0;
    double slope_majorant = 0.0;
    /// dw2_term - dw1_term at the largest k: the residual weak pairing of
    /// dbar h against eta, which a closed extension across the puncture
    /// would make vanish.
    cplx limit_value{0.0, 0.0};
    ExtensionVerdict verdict = ExtensionVerdict::EXTENDS;
};

namespace detail {

inline double loglog_slope(const std::vector<int>& ks, const std::vector<double>& vals) {
    std::size_t n = ks.size();
    std::size_t lo = n / 2;
    if (n - lo < 2) lo = n - 2;
    std::vector<double> xs, ys;
    for (std::size_t i = lo; i < n; ++i) {
        xs.push_back(std::log(static_cast<double>(ks[i])));
        ys.push_back(std::log(std::max(vals[i], 1e-16)));
    }
    return fit_line(xs, ys).slope;
}

}  // namespace detail

/// Probes whether a (0,1)-form h on the punctured bidisc is dbar-closed
/// across the puncture {w2 = 0}: pairs h against (1 - chi_k(w2)) eta for a
/// shrinking cutoff family and reports the two cutoff-supported terms
///   dw1_term(k) = integral of h2 * chi_k * d eta/dwbar1,
///   dw2_term(k) = integral of h1 * (d chi_k/dwbar2 * eta + chi_k * d eta/dwbar2),
/// together with the norm majorant that forces them to vanish whenever
/// ||h1|| near the puncture grows slower than k^(1 - 4/p). Both terms below
/// extend_tol at the largest k means the closedness extends (verdict
/// EXTENDS); otherwise OBSTRUCTED, and limit_value reports the surviving
/// pairing mass concentrated on the puncture.
inline ExtensionReport extension_test(const Form01& h, double p, std::vector<int> ks = {},
                                      TestForm eta = TestForm{TestFormKind::scalar20,
                                                              Bump{cplx(0.0, 0.0), 0.7},
                                                              Bump{cplx(0.0, 0.0), 0.7}},
                                      double extend_tol = 1e-3, double closed_tol = 1e-3) {
    const ProductGrid& g = h.grid();
    require(g.dim() == 2, "extension_test: two-factor grid expected");
    require(h.dim() == 2, "extension_test: expected a two-component form");
    require(p > 1.0, "extension_test: p must exceed 1");
    require(extend_tol > 0.0 && closed_tol > 0.0, "extension_test: tolerances must be positive");
    if (ks.empty())
        for (int k = 2; k <= 256; k *= 2) ks.push_back(k);
    require(ks.size() >= 2, "extension_test: need at least two cutoff scales");
    for (std::size_t i = 0; i < ks.size(); ++i) {
        require(ks[i] >= 1, "extension_test: cutoff scales must be positive");
        require(i == 0 || ks[i] > ks[i - 1],
                "extension_test: cutoff scales must be strictly increasing");
    }
    const PolarGrid& f2 = g.factor(1);
    int kmax = ks.back();
    require(f2.factor().inner_radius <= 0.5 / kmax + 1e-15,
            "extension_test: grid cannot resolve the cutoff ladder; need "
            "inner_radius <= 1/(2k) for the largest k = " +
                std::to_string(kmax));
    require(eta.kind == TestFormKind::scalar20, "extension_test: scalar test form expected");
    require(!eta.avoid_puncture,
            "extension_test: the test form must cover the puncture");
    // support check without the hole constraint: chi_k eta is what is paired
    {
        TestForm probe = eta;
        probe.avoid_puncture = false;
        probe.validate_support(g);
    }

    // precondition: h must already be closed away from the puncture, else the
    // cutoff terms measure ordinary non-closedness rather than an obstruction.
    // wide bumps keep the quadrature floor far below a genuine pairing signal
    for (const Bump& b2 : {Bump{cplx(0.5, 0.0), 0.4}, Bump{cplx(-0.35, 0.25), 0.35}}) {
        TestForm away{TestFormKind::scalar20, Bump{cplx(0.0, 0.0), 0.6}, b2, cplx(1.0, 0.0), true};
        cplx pr = weak_dbar_pairing(h, away);
        if (std::abs(pr) > closed_tol)
            fail("extension_test: datum is not closed away from the puncture "
                 "(weak pairing " +
                 fmt_g17(std::abs(pr)) + " exceeds " + fmt_g17(closed_tol) + ")");
    }

    detail::BumpTable t1 = detail::bump_cell_table(g.factor(0), eta.b1);
    const std::vector<cplx>& h1 = h.comp[0].values();
    const std::vector<cplx>& h2 = h.comp[1].values();
    std::size_t n2 = static_cast<std::size_t>(f2.size());

    ExtensionReport rep;
    const quad_rule& q = gauss_legendre(12);
    for (int k : ks) {
        CutoffFamily cut{k};
        // per-cell w2 tables of chi_k * B2 and d(chi_k B2)/dwbar2
        std::vector<cplx> ta(n2, cplx(0.0, 0.0)), tc(n2, cplx(0.0, 0.0));
        double dth = f2.dtheta();
        for (int ring = 0; ring < f2.n_r(); ++ring) {
            double r0 = f2.edge(ring), r1 = f2.edge(ring + 1);
            // both integrands carry a chi_k factor, so only |w2| < 1/k matters
            if (r0 >= 1.0 / k) continue;
            double rm = 0.5 * (r0 + r1), rh = 0.5 * (r1 - r0);
            for (int sec = 0; sec < f2.n_theta(); ++sec) {
                double th0 = f2.theta(sec) - 0.5 * dth;
                kahan_cplx aacc, cacc;
                for (int ir = 0; ir < static_cast<int>(q.x.size()); ++ir) {
                    double r = rm + rh * q.x[static_cast<std::size_t>(ir)];
                    double wr = rh * q.w[static_cast<std::size_t>(ir)] * r;
                    for (int it = 0; it < static_cast<int>(q.x.size()); ++it) {
                        double th = th0 + 0.5 * dth * (1.0 + q.x[static_cast<std::size_t>(it)]);
                        double ww = wr * 0.5 * dth * q.w[static_cast<std::size_t>(it)];
                        cplx w2 = r * cplx(std::cos(th), std::sin(th));
                        double c = cut.chi(w2);
                        double bv = eta.b2.value(w2);
                        if (c == 0.0 && bv == 0.0) continue;
                        aacc.add(ww * c * bv);
                        cacc.add(ww * (cut.dchi_dwbar(w2) * bv + c * eta.b2.dwbar(w2)));
                    }
                }
                std::size_t i = static_cast<std::size_t>(f2.node_at(ring, sec));
                ta[i] = aacc.value();
                tc[i] = cacc.value();
            }
        }

        kahan_cplx a1, a2;
        for (std::size_t i = 0; i < g.size(); ++i) {
            int q1 = g.factor_node(i, 0), q2 = g.factor_node(i, 1);
            a1.add(h2[i] * (t1.dval[static_cast<std::size_t>(q1)] * ta[static_cast<std::size_t>(q2)]));
            a2.add(h1[i] * (t1.val[static_cast<std::size_t>(q1)] * tc[static_cast<std::size_t>(q2)]));
        }

        // ||h1||_{L^p} over the part of the grid with |w2| <= 1/k
        kahan nacc;
        for (std::size_t i = 0; i < g.size(); ++i) {
            int q2 = g.factor_node(i, 1);
            const cplx w2 = f2.node(q2);
            if (std::abs(w2) > 1.0 / k) continue;
            nacc.add(std::pow(std::abs(h1[i]), p) * std::norm(w2) * g.weight(i));
        }
        ExtensionRow row;
        row.k = k;
        row.dw1_term = eta.amplitude * a1.value();
        row.dw2_term = eta.amplitude * a2.value();
        row.majorant = std::pow(static_cast<double>(k), 4.0 / p - 1.0) *
                       std::pow(nacc.value(), 1.0 / p);
        rep.rows.push_back(row);
    }

    std::vector<double> v1, v2, vm;
    for (const ExtensionRow& r : rep.rows) {
        v1.push_back(std::abs(r.dw1_term));
        v2.push_back(std::abs(r.dw2_term));
        vm.push_back(r.majorant);
    }
    rep.slope_dw1 = detail::loglog_slope(ks, v1);
    rep.slope_dw2 = detail::loglog_slope(ks, v2);
    rep.slope_majorant = detail::loglog_slope(ks, vm);
    const ExtensionRow& last = rep.rows.back();
    rep.limit_value = last.dw2_term - last.dw1_term;
    rep.verdict = (std::abs(last.dw1_term) <= extend_tol && std::abs(last.dw2_term) <= extend_tol)
                      ? ExtensionVerdict::EXTENDS
                      : ExtensionVerdict::OBSTRUCTED;
    return rep;
}

// ---------------------------------------------------------------------------
// closedness transport

struct TestBattery {
    std::vector<TestForm> triangle_tests;
    std::vector<TestForm> product_tests;
};

inline TestBattery default_test_battery() {
    TestBattery b;
    b.triangle_tests = {
        TestForm{TestFormKind::scalar20, Bump{cplx(0.0, 0.0), 0.25}, Bump{cplx(0.65, 0.0), 0.3}},
        TestForm{TestFormKind::scalar20, Bump{cplx(0.05, 0.05), 0.15}, Bump{cplx(0.6, 0.1), 0.25}},
        TestForm{TestFormKind::scalar20, Bump{cplx(0.0, 0.0), 0.3}, Bump{cplx(0.55, 0.0), 0.2}},
    };
    b.product_tests = {
        TestForm{TestFormKind::scalar20, Bump{cplx(0.0, 0.0), 0.6}, Bump{cplx(0.5, 0.0), 0.3},
                 cplx(1.0, 0.0), true},
        TestForm{TestFormKind::scalar20, Bump{cplx(0.3, 0.0), 0.35}, Bump{cplx(0.45, 0.15), 0.22},
                 cplx(1.0, 0.0), true},
        TestForm{TestFormKind::scalar20, Bump{cplx(0.0, 0.0), 0.7}, Bump{cplx(0.6, 0.0), 0.25},
                 cplx(1.0, 0.0), true},
    };
    return b;
}

struct ClosednessReport {
    /// |weak pairing| of the triangle datum against each triangle test
    std::vector<double> triangle_pairings;
    /// |weak pairing| of the pull-back against each puncture-avoiding test
    std::vector<double> product_pairings;
    bool closed_on_triangle = true;
    bool closed_on_product = true;
    ExtensionReport extension;
    /// EXTENDS only when the pull-back is closed away from the puncture and
    /// the cutoff terms vanish across it.
    ExtensionVerdict verdict = ExtensionVerdict::EXTENDS;
};

/// Transports closedness of a triangle datum f to its pull-back: pairs f
/// against polydisc bumps inside the triangle, pairs the pull-back against
/// puncture-avoiding product bumps, then runs the cutoff extension test
/// across the puncture.
inline ClosednessReport pull_back_closedness(const Form01& f, double p,
                                             const TestBattery& battery = default_test_battery(),
                                             double pair_tol = 1e-3, double extend_tol = 1e-3) {
    require(pair_tol > 0.0, "pull_back_closedness: pair_tol must be positive");
    ClosednessReport rep;
    for (const TestForm& chi : battery.triangle_tests) {
        double v = std::abs(triangle_dbar_pairing(f, chi));
        rep.triangle_pairings.push_back(v);
        if (v > pair_tol) rep.closed_on_triangle = false;
    }
    Form01 h = pull_back_form(f);
    for (const TestForm& eta : battery.product_tests) {
        require(eta.avoid_puncture,
                "pull_back_closedness: product battery tests must avoid the puncture");
        double v = std::abs(weak_dbar_pairing(h, eta));
        rep.product_pairings.push_back(v);
        if (v > pair_tol) rep.closed_on_product = false;
    }
    rep.extension = extension_test(h, p, {}, TestForm{TestFormKind::scalar20,
                                                      Bump{cplx(0.0, 0.0), 0.7},
                                                      Bump{cplx(0.0, 0.0), 0.7}},
                                   extend_tol, std::max(pair_tol, 1e-3));
    rep.verdict = (rep.closed_on_product && rep.extension.verdict == ExtensionVerdict::EXTENDS)
                      ? ExtensionVerdict::EXTENDS
                      : ExtensionVerdict::OBSTRUCTED;
    return rep;
}

// ---------------------------------------------------------------------------
// solve on the triangle

/// Solves dbar u = f on the Hartogs triangle for a closed datum in
/// L^p(dV), p >= 4: pulls the form back to the punctured bidisc, solves
/// there with the iterated factor transform (canonicalized against the
/// |w2|^2-weighted holomorphic space when canonicalize is set), and
/// pushes the potential forward. residual_max / residual_l2 are measured in
/// triangle coordinates through the chain rule
///   d u/dzbar1 = (1/wbar2) D1,   d u/dzbar2 = -(wbar1/wbar2) D1 + D2,
/// where D1, D2 are the product-side finite differences of the potential.
inline SolveResult hartogs_solve(const Form01& f, double p,
                                 const HolomorphicBasis& basis = HolomorphicBasis{},
                                 bool canonicalize = true, double closed_pair_tol = 5e-3,
                                 double closed_threshold = 0.05) {
    const ProductGrid& g = f.grid();
    require(g.dim() == 2, "hartogs_solve: two-factor grid expected");
    require(f.dim() == 2, "hartogs_solve: expected a two-component form");
    if (p < 4.0)
        fail("hartogs_solve: refused for p = " + fmt_g17(p) +
             ": below p = 4 the solve is unsound on the triangle, because a "
             "datum can be L^p-integrable against the volume factor |w2|^2 "
             "while its pull-back pairs to a nonzero residue on the puncture "
             "(the scale-weighted bound k^(4/p - 1) no longer decays), so "
             "closedness does not transport; run pull_back_closedness to "
             "inspect such data instead");
    require(g.factor(1).factor().inner_radius > 0.0,
            "hartogs_solve: the w2 factor must excise a hole around w2 = 0");
    require(closed_pair_tol > 0.0, "hartogs_solve: closed_pair_tol must be positive");

    // weak closedness screens on both sides before committing to the solve;
    // the pull-back lives only as long as the product-side work needs it
    TestBattery battery = default_test_battery();
    for (const TestForm& chi : battery.triangle_tests) {
        double v = std::abs(triangle_dbar_pairing(f, chi));
        if (v > closed_pair_tol)
            fail("hartogs_solve: NOT-CLOSED datum: triangle weak pairing " + fmt_g17(v) +
                 " exceeds " + fmt_g17(closed_pair_tol) +
                 "; pass the datum to pull_back_closedness for a full report");
    }
    SolveResult res = [&] {
        Form01 h = pull_back_form(f);
        for (const TestForm& eta : battery.product_tests) {
            double v = std::abs(weak_dbar_pairing(h, eta));
            if (v > closed_pair_tol)
                fail("hartogs_solve: NOT-CLOSED datum: pull-back weak pairing " + fmt_g17(v) +
                     " exceeds " + fmt_g17(closed_pair_tol) +
                     "; pass the datum to pull_back_closedness for a full report");
        }
        const Weight& mu = find_weight("w2sq");
        return canonicalize ? canonical_solve(h, mu, p, basis, true, closed_threshold)
                            : product_solve(h, true, closed_threshold);
    }();
    res.u = push_forward(res.u);

    // chain-rule residual in triangle coordinates, interior nodes only
    {
        const std::vector<cplx>& f1 = f.comp[0].values();
        const std::vector<cplx>& f2 = f.comp[1].values();
        std::vector<cplx> r2 = dbar_fd(res.u, 1).values();
        std::vector<cplx> d1 = dbar_fd(res.u, 0).values();
        parallel_for(g.size(), [&](std::size_t i) {
            cplx w1b = std::conj(g.factor(0).node(g.factor_node(i, 0)));
            cplx w2b = std::conj(g.factor(1).node(g.factor_node(i, 1)));
            r2[i] += -w1b / w2b * d1[i] - f2[i];
            d1[i] = d1[i] / w2b - f1[i];
        });
        detail::ResidualStats st;
        for (const std::vector<cplx>* rc : {&d1, &r2}) {
            kahan l2;
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (!g.interior(i)) continue;
                double a = std::abs((*rc)[i]);
                if (a > st.max_val) st.max_val = a;
                double vol = std::norm(g.factor(1).node(g.factor_node(i, 1))) * g.weight(i);
                l2.add(a * a * vol);
            }
            st.l2sq += l2.value();
        }
        res.residual_max = st.max_val;
        res.residual_l2 = std::sqrt(st.l2sq);
    }
    double fn = triangle_form_lp_norm(f, p);
    res.norm_ratio = fn > 0.0 ? triangle_lp_norm(res.u, p) / fn
                              : std::numeric_limits<double>::quiet_NaN();
    return res;
}

}  // namespace dbarlab
