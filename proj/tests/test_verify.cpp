#include <dbarlab/verify.hpp>
#include <dbarlab/dbar.hpp>

#include <catch2/catch_amalgamated.hpp>

using namespace dbarlab;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Independent reduced oracle for the blow-up masses. Integrating the angular
// measure of {|1 + xi| < 1} at fixed rho = |xi| leaves the arc length
// 2 acos(rho/2), so a mass with density |xi|^(-a) dV reduces to
// I(a) = int_0^2 rho^(1-a) 2 acos(rho/2) drho. I(1) = 4 and I(0) = pi exactly.
double oracle_I(double a) {
    return tanh_sinh(
        [a](double rho) { return std::pow(rho, 1.0 - a) * 2.0 * std::acos(0.5 * rho); }, 0.0,
        2.0);
}

// Same reduction with the angular factor |1 + xi|^q kept and an optional
// concentric hole |1 + xi| > h, integrated with a standalone angular rule.
double oracle_ring(double a, double q, double h) {
    auto radial = [&](double rho) {
        double lo = std::acos(std::max(-1.0, -0.5 * rho));
        double hi = pi;
        if (h > 0.0 && std::abs(rho - 1.0) <= h)
            hi = std::acos(std::clamp((h * h - 1.0 - rho * rho) / (2.0 * rho), -1.0, 1.0));
        if (!(hi > lo)) return 0.0;
        const quad_rule& qr = gauss_legendre(64);
        kahan s;
        const double c = 0.5 * (lo + hi), d = 0.5 * (hi - lo);
        for (std::size_t k = 0; k < qr.x.size(); ++k) {
            const double phi = c + d * qr.x[k];
            const double m = 1.0 + 2.0 * rho * std::cos(phi) + rho * rho;
            s.add(d * qr.w[k] * std::pow(m, 0.5 * q));
        }
        return std::pow(rho, 1.0 - a) * 2.0 * s.value();
    };
    std::vector<double> cuts =
        h > 0.0 ? std::vector<double>{0.0, 1.0 - h, 1.0 + h, 2.0} : std::vector<double>{0.0, 1.0, 2.0};
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
        total += tanh_sinh(radial, cuts[i], cuts[i + 1]);
    return total;
}

ContourRule power_rule(double s) {
    return ContourRule{[s](double r, cplx xi) {
        return 2.0 * pi * cplx(0.0, 1.0) * r * r * pow_branch(xi, -s);
    }};
}

const grid_ptr& bidisc_grid() {
    static grid_ptr g = build_grid({DiscFactor{}, DiscFactor{}}, {{32, 128}, {24, 48}});
    return g;
}

const grid_ptr& triangle_grid() {
    static grid_ptr g = hartogs_grid(32, 128, 24, 48, 1.0 / 64.0);
    return g;
}

}  // namespace

TEST_CASE("reduced radial oracle pins its exact anchors", "[verify]") {
    CHECK_THAT(oracle_I(1.0), WithinAbs(4.0, 1e-12));
    CHECK_THAT(oracle_I(0.0), WithinAbs(pi, 1e-12));
}

TEST_CASE("blow-up probe reproduces the reduced-integral oracle", "[verify]") {
    BlowupVerdict bv = blowup_probe(power_rule(0.5), 2.0, {}, ContourRegion{0.0}, 7);
    REQUIRE(bv.trace.size() == 7);
    CHECK(bv.order == 2.0);
    CHECK(bv.verdict == GrowthVerdict::CONVERGENT);
    for (int l = 1; l <= 7; ++l) {
        const BlowupLevel& row = bv.trace[static_cast<std::size_t>(l - 1)];
        CHECK(row.level == l);
        CHECK_THAT(row.cutoff, WithinRel(std::ldexp(1.0, -(1 << l)), 1e-15));
        CHECK_THAT(row.norm, WithinRel(std::sqrt(row.mass), 1e-13));
    }
    const double expected = std::pow(2.0 * pi, 2.0) / 5.0 * oracle_I(1.0);
    CHECK_THAT(bv.trace.back().mass, WithinRel(expected, 1e-9));

    ContourRule one{[](double, cplx) { return cplx(1.0, 0.0); }};
    BlowupVerdict bc = blowup_probe(one, 2.0, {}, ContourRegion{0.0}, 7);
    CHECK(bc.verdict == GrowthVerdict::CONVERGENT);
    CHECK_THAT(bc.trace.back().mass, WithinAbs(pi, 1e-12));

    ContourRule zero{[](double, cplx) { return cplx(0.0, 0.0); }};
    BlowupVerdict bz = blowup_probe(zero, 2.0, {}, ContourRegion{0.0}, 4);
    CHECK(bz.verdict == GrowthVerdict::CONVERGENT);
    CHECK(bz.trace.back().mass == 0.0);
}

TEST_CASE("blow-up probe separates the three verdicts at one singularity", "[verify]") {
    // the same profile (z2 - 1)^(-2/3), probed at orders around the critical 3
    const ContourRule rule = power_rule(2.0 / 3.0);

    BlowupVerdict div = blowup_probe(rule, 3.0, {}, ContourRegion{0.0}, 7);
    CHECK(div.verdict == GrowthVerdict::DIVERGENT);
    for (int l = 5; l <= 7; ++l) {
        const double g = div.trace[static_cast<std::size_t>(l - 1)].growth;
        CHECK(g >= 1.9);
        CHECK(g <= 2.0001);  // borderline density |xi|^-2: mass doubles per level
    }

    BlowupVerdict conv = blowup_probe(rule, 2.0, {}, ContourRegion{0.0}, 7);
    CHECK(conv.verdict == GrowthVerdict::CONVERGENT);
    CHECK_THAT(conv.trace.back().mass,
               WithinRel(std::pow(2.0 * pi, 2.0) / 5.0 * oracle_I(4.0 / 3.0), 1e-9));

    BlowupVerdict mid = blowup_probe(rule, 2.9, {}, ContourRegion{0.0}, 7);
    CHECK(mid.verdict == GrowthVerdict::INCONCLUSIVE);
}

TEST_CASE("blow-up probe validates its inputs", "[verify]") {
    CHECK_THROWS_AS(blowup_probe(ContourRule{}, 2.0, {}, ContourRegion{0.0}, 7), error);
    CHECK_THROWS_AS(blowup_probe(power_rule(0.5), 0.5, {}, ContourRegion{0.0}, 7), error);
    CHECK_THROWS_WITH(blowup_probe(power_rule(0.5), 2.0, {}, ContourRegion{0.0}, 3),
                      ContainsSubstring("levels"));
    CHECK_THROWS_AS(blowup_probe(power_rule(0.5), 2.0, {}, ContourRegion{0.0}, 10), error);
    CHECK_THROWS_AS(blowup_probe(power_rule(0.5), 2.0, {}, ContourRegion{1.0}, 7), error);
    // deep ladder + steep exponent overflows the mass and must say so
    CHECK_THROWS_WITH(blowup_probe(power_rule(1.9), 8.0, {}, ContourRegion{0.0}, 9),
                      ContainsSubstring("overflowed"));
}

TEST_CASE("contour functional annihilates holomorphic potentials", "[verify]") {
    SampledField hol = sample(bidisc_grid(), [](const cplx* z) {
        return z[0] * z[0] * z[0] * z[1] * z[1] + 1.0 / (2.0 - z[0]) + cplx(0.3, -0.2);
    });
    const std::vector<double> radii = {0.15, 0.35, 0.55, 0.75};
    const std::vector<cplx> bases = {cplx(0.95, 0.0), cplx(0.5, 0.0), cplx(-0.3, 0.4),
                                     cplx(-0.8, 0.0), cplx(0.1, -0.7)};
    ContourFunctional cf = contour_functional(hol, radii, bases, 256);
    REQUIRE(cf.samples.size() == 20);
    for (const ContourSample& smp : cf.samples) {
        CHECK(std::abs(smp.value) <= 1e-8);
        CHECK(smp.nodes == 256);
        // base points snap to second-factor nodes
        CHECK(smp.base == bidisc_grid()->factor(1).node(smp.base_node));
    }
}

TEST_CASE("contour functional reproduces boundary-singular profiles", "[verify]") {
    const std::vector<double> radii = {0.15, 0.35, 0.55, 0.75};
    const std::vector<cplx> bases = {cplx(0.95, 0.0), cplx(0.5, 0.0), cplx(-0.3, 0.4),
                                     cplx(-0.8, 0.0), cplx(0.1, -0.7)};
    for (double s : {0.5, 1.5, 2.0 / 3.0}) {
        SampledField u = sample(bidisc_grid(), [s](const cplx* z) {
            return pow_branch(z[1] - 1.0, -s) * std::conj(z[0]);
        });
        ContourFunctional cf = contour_functional(u, radii, bases, 256);
        REQUIRE(cf.samples.size() == 20);
        for (std::size_t b = 0; b < bases.size(); ++b) {
            double lo = 1e300, hi = 0.0;
            for (std::size_t k = 0; k < radii.size(); ++k) {
                const ContourSample& smp = cf.samples[b * radii.size() + k];
                REQUIRE(std::abs(smp.base - cplx(1.0, 0.0)) >= 0.05);
                const cplx expected = 2.0 * pi * cplx(0.0, 1.0) * smp.radius * smp.radius *
                                      pow_branch(smp.base - 1.0, -s);
                CHECK(std::abs(smp.value - expected) <= 0.005 * std::abs(expected));
                const double ratio = std::abs(smp.value) / (smp.radius * smp.radius);
                lo = std::min(lo, ratio);
                hi = std::max(hi, ratio);
            }
            CHECK(hi / lo - 1.0 <= 0.005);  // |v| / r^2 is radius-independent
        }
    }
}

TEST_CASE("contour functional handles the triangle potential", "[verify]") {
    const double s = 0.5;
    SampledField u = sample(triangle_grid(), [s](const cplx* w) {
        return w[1] * pow_branch(w[1] - 1.0, -s) * std::conj(w[0]);
    });
    std::vector<cplx> bases;
    const PolarGrid& bf = triangle_grid()->factor(1);
    for (int i = 0; i < bf.size() && bases.size() < 5; i += 97) {
        const cplx z = bf.node(i);
        if (std::abs(z) >= 0.6 && std::abs(z - cplx(1.0, 0.0)) >= 0.3) bases.push_back(z);
    }
    REQUIRE(bases.size() == 5);
    ContourFunctional cf = contour_functional(u, {0.35, 0.55, 0.75}, bases, 256);
    for (const ContourSample& smp : cf.samples) {
        const cplx expected = 2.0 * pi * cplx(0.0, 1.0) * smp.radius * smp.radius * smp.base *
                              pow_branch(smp.base - 1.0, -s);
        CHECK(std::abs(smp.value - expected) <= 0.005 * std::abs(expected));
    }
}

TEST_CASE("contour functional validates its inputs", "[verify]") {
    SampledField u = sample(bidisc_grid(), [](const cplx*) { return cplx(1.0, 0.0); });
    CHECK_THROWS_WITH(contour_functional(u, {0.5}, {cplx(0.0, 0.0)}, 32),
                      ContainsSubstring("64"));
    CHECK_THROWS_WITH(contour_functional(u, {0.999}, {cplx(0.0, 0.0)}, 64),
                      ContainsSubstring("coverage"));
    CHECK_THROWS_AS(contour_functional(u, {}, {cplx(0.0, 0.0)}, 64), error);
    CHECK_THROWS_AS(contour_functional(u, {0.5}, {}, 64), error);
    grid_ptr g1 = build_grid({DiscFactor{}}, {{8, 16}});
    SampledField u1 = sample(g1, [](const cplx*) { return cplx(1.0, 0.0); });
    CHECK_THROWS_AS(contour_functional(u1, {0.5}, {cplx(0.0, 0.0)}, 64), error);
}

TEST_CASE("catalogue cases publish their claims and data", "[verify]") {
    grid_ptr g = build_grid({DiscFactor{}, DiscFactor{}}, {{12, 32}, {12, 32}});

    Counterexample c26 = build_counterexample(CounterexampleCase::ex26, g, 2.0, 1.0, 1.5);
    CHECK(c26.kind == CounterexampleCase::ex26);
    CHECK(c26.forbidden_order == 3.0);
    CHECK(c26.supported_order == 2.0);
    CHECK(c26.s_exp == 1.5);
    CHECK(c26.region.hole_radius == 0.0);
    const cplx z2 = g->factor(1).node(5);
    const cplx at[2] = {g->factor(0).node(0), z2};
    CHECK_THAT(std::abs(c26.weight.mu(at) - std::pow(std::abs(z2 - 1.0), 1.5)),
               WithinAbs(0.0, 1e-14));
    REQUIRE(c26.weight.factor_mu.size() == 2);
    CHECK_THAT(c26.weight.factor_mu[1](z2), WithinRel(std::pow(std::abs(z2 - 1.0), 1.5), 1e-14));
    REQUIRE(c26.weight.singular_in_coord(1, {cplx(0, 0), cplx(0, 0)}).size() == 1);
    CHECK(c26.weight.singular_in_coord(1, {cplx(0, 0), cplx(0, 0)})[0] == cplx(1.0, 0.0));
    // the sampled datum matches its closed form at a node
    const std::size_t idx = 7 * g->stride(0) + 5 * g->stride(1);
    CHECK(c26.datum.comp[0].values()[idx] == pow_branch(z2 - 1.0, -1.5));
    CHECK(c26.datum.comp[1].values()[idx] == cplx(0.0, 0.0));

    Counterexample c27 = build_counterexample(CounterexampleCase::ex27, g, 3.0);
    CHECK(c27.forbidden_order == 3.0);
    CHECK(c27.supported_order == 2.0);
    CHECK_THAT(c27.s_exp, WithinRel(2.0 / 3.0, 1e-15));
    CHECK(c27.weight.name == "one2");
    CHECK(c27.datum.comp[0].values()[idx] == pow_branch(z2 - 1.0, -2.0 / 3.0));

    Counterexample c35 = build_counterexample(CounterexampleCase::ex35, triangle_grid(), 4.0);
    CHECK(c35.forbidden_order == 4.0);
    CHECK(c35.supported_order == 3.0);
    CHECK(c35.weight.name == "w2sq");
    CHECK(c35.region.hole_radius == 0.5);
    CHECK(c35.datum_components.size() == 2);

    CHECK(to_string(CounterexampleCase::ex26) == "ex26");
    CHECK(parse_counterexample("ex35") == CounterexampleCase::ex35);
    CHECK_THROWS_WITH(parse_counterexample("ex99"), ContainsSubstring("ex26, ex27, ex35"));
}

TEST_CASE("catalogue parameter validation", "[verify]") {
    grid_ptr g = build_grid({DiscFactor{}, DiscFactor{}}, {{12, 32}, {12, 32}});
    // the quoted admissible interval names both endpoints
    CHECK_THROWS_WITH(build_counterexample(CounterexampleCase::ex26, g, 2.0, 1.0, 0.9),
                      ContainsSubstring("(2/(1 + eps), 2)") && ContainsSubstring("(1, 2)"));
    CHECK_THROWS_WITH(build_counterexample(CounterexampleCase::ex26, g, 2.0, 1.0, 2.0),
                      ContainsSubstring("admissible interval"));
    CHECK_THROWS_WITH(build_counterexample(CounterexampleCase::ex26, g, 2.0, 0.0, 1.5),
                      ContainsSubstring("eps > 0"));
    CHECK_THROWS_WITH(build_counterexample(CounterexampleCase::ex27, g, 3.0, 1.0),
                      ContainsSubstring("takes only p"));
    CHECK_THROWS_WITH(build_counterexample(CounterexampleCase::ex35, g, 4.0),
                      ContainsSubstring("hole"));
    CHECK_THROWS_WITH(build_counterexample(CounterexampleCase::ex27, triangle_grid(), 3.0),
                      ContainsSubstring("full bidisc"));
    CHECK_THROWS_AS(build_counterexample(CounterexampleCase::ex27, g, 1.0), error);
    CHECK_THROWS_AS(build_counterexample(CounterexampleCase::ex27, nullptr, 3.0), error);
    grid_ptr g1 = build_grid({DiscFactor{}}, {{8, 16}});
    CHECK_THROWS_AS(build_counterexample(CounterexampleCase::ex27, g1, 3.0), error);
    grid_ptr ghalf =
        build_grid({DiscFactor{cplx(0, 0), 0.5, 0.0}, DiscFactor{}}, {{8, 16}, {8, 16}});
    CHECK_THROWS_AS(build_counterexample(CounterexampleCase::ex27, ghalf, 3.0), error);
}

TEST_CASE("triangle datum transports to the product closed form", "[verify]") {
    Counterexample c35 = build_counterexample(CounterexampleCase::ex35, triangle_grid(), 4.0);
    Form01 pb = pull_back_form(c35.datum);
    const ProductGrid& g = *triangle_grid();
    double h2max = 0.0, h1err = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const cplx w2 = g.factor(1).node(g.factor_node(i, 1));
        h2max = std::max(h2max, std::abs(pb.comp[1].values()[i]));
        h1err = std::max(h1err,
                         std::abs(pb.comp[0].values()[i] - w2 * pow_branch(w2 - 1.0, -0.5)));
    }
    CHECK(h2max <= 1e-10);  // the two dwbar2 contributions cancel exactly
    CHECK(h1err <= 1e-10);
}

TEST_CASE("datum ladders converge strictly below the claimed order", "[verify]") {
    grid_ptr g = build_grid({DiscFactor{}, DiscFactor{}}, {{12, 32}, {12, 32}});

    Counterexample c26 = build_counterexample(CounterexampleCase::ex26, g, 2.0, 1.0, 1.5);
    BlowupVerdict d26 = datum_norm_probe(c26, 2.0, 7);
    CHECK(d26.verdict == GrowthVerdict::CONVERGENT);
    CHECK_THAT(d26.trace.back().mass, WithinRel(pi * oracle_I(1.5), 1e-6));

    Counterexample c27 = build_counterexample(CounterexampleCase::ex27, g, 3.0);
    BlowupVerdict d2 = datum_norm_probe(c27, 2.0, 7);
    CHECK(d2.verdict == GrowthVerdict::CONVERGENT);
    CHECK_THAT(d2.trace.back().mass, WithinRel(pi * oracle_I(4.0 / 3.0), 1e-9));
    BlowupVerdict d25 = datum_norm_probe(c27, 2.5, 8);
    CHECK(d25.verdict == GrowthVerdict::CONVERGENT);
    CHECK_THAT(d25.trace.back().mass, WithinRel(pi * oracle_I(5.0 / 3.0), 1e-5));
    // at the claimed order itself, the datum's own ladder is the borderline
    BlowupVerdict d3 = datum_norm_probe(c27, 3.0, 7);
    CHECK(d3.verdict == GrowthVerdict::DIVERGENT);

    Counterexample c35 = build_counterexample(CounterexampleCase::ex35, triangle_grid(), 4.0);
    BlowupVerdict d35 = datum_norm_probe(c35, 3.0, 7);
    CHECK(d35.verdict == GrowthVerdict::CONVERGENT);
    CHECK_THAT(d35.trace.back().mass,
               WithinRel((pi + 2.0 * pi / 5.0) * oracle_ring(1.5, 2.0, 0.0), 1e-6));

    CHECK_THROWS_AS(datum_norm_probe(c27, 1.0, 7), error);
}

TEST_CASE("sharpness certificates for the catalogue", "[verify]") {
    SharpnessCertificate c26 =
        certify_sharpness(CounterexampleCase::ex26, bidisc_grid(), 2.0, 1.0, 1.5);
    CHECK(c26.verdict == "CERTIFIED-SHARP");
    CHECK(c26.forbidden_order == 3.0);
    CHECK(c26.supported_order == 2.0);
    CHECK(c26.contour_rel_err <= 2e-3);
    CHECK(c26.forbidden.verdict == GrowthVerdict::DIVERGENT);
    CHECK(c26.supported.verdict == GrowthVerdict::CONVERGENT);
    CHECK(c26.datum_norms.verdict == GrowthVerdict::CONVERGENT);
    CHECK_FALSE(c26.candidate_checked);
    REQUIRE(c26.contour.size() == c26.contour_expected.size());
    REQUIRE(c26.contour.size() == 18);  // 6 bases x 3 radii
    // the weighted mass softens the blow-up to |xi|^(-3) dV; its last doubling
    // jumps by 2^64
    CHECK(c26.forbidden.trace.back().growth >= 1e18);
    CHECK_THAT(c26.supported.trace.back().mass,
               WithinRel(std::pow(2.0 * pi, 2.0) / 5.0 * oracle_I(1.5), 1e-6));

    SharpnessCertificate c27 = certify_sharpness(CounterexampleCase::ex27, bidisc_grid(), 3.0);
    CHECK(c27.verdict == "CERTIFIED-SHARP");
    CHECK(c27.contour_rel_err <= 2e-3);
    CHECK(c27.supported_order == 2.0);
    for (int l = 5; l <= 7; ++l) {
        const double gr = c27.forbidden.trace[static_cast<std::size_t>(l - 1)].growth;
        CHECK(gr >= 1.9);
        CHECK(gr <= 2.0001);
    }

    SharpnessCertificate c35 = certify_sharpness(CounterexampleCase::ex35, triangle_grid(), 4.0);
    CHECK(c35.verdict == "CERTIFIED-SHARP");
    CHECK(c35.contour_rel_err <= 2e-3);
    CHECK(c35.supported_order == 3.0);
    for (int l = 5; l <= 7; ++l) {
        const double gr = c35.forbidden.trace[static_cast<std::size_t>(l - 1)].growth;
        CHECK(gr >= 1.5);
        CHECK(gr <= 2.5);
    }
    CHECK_THAT(c35.supported.trace.back().mass,
               WithinRel(std::pow(2.0 * pi, 3.0) / 7.0 * oracle_ring(1.5, 3.0, 0.5), 1e-5));
}

TEST_CASE("solver candidates share the closed-form trace", "[verify]") {
    grid_ptr g = build_grid({DiscFactor{}, DiscFactor{}}, {{32, 96}, {20, 48}});
    Counterexample cex = build_counterexample(CounterexampleCase::ex27, g, 3.0);
    // solve the hole-free axis first so the boundary-singular component is
    // transformed directly instead of being finite-differenced
    SolveResult res = product_solve(cex.datum, false, 0.05, {1, 0});
    SharpnessCertificate cc =
        certify_sharpness(CounterexampleCase::ex27, g, 3.0, 0.0, 0.0, &res.u);
    CHECK(cc.verdict == "CERTIFIED-SHARP");
    CHECK(cc.candidate_checked);
    CHECK(cc.contour_rel_err <= 2e-3);

    // a drift that is not holomorphic in z1 must break the trace
    SampledField bad = sample(g, [](const cplx* z) {
        return pow_branch(z[1] - 1.0, -2.0 / 3.0) * std::conj(z[0]) + 0.5 * std::conj(z[0]);
    });
    SharpnessCertificate cb =
        certify_sharpness(CounterexampleCase::ex27, g, 3.0, 0.0, 0.0, &bad);
    CHECK(cb.verdict == "INCONCLUSIVE");
    CHECK(cb.contour_rel_err >= 0.1);

    SampledField other = sample(bidisc_grid(), [](const cplx*) { return cplx(0.0, 0.0); });
    CHECK_THROWS_WITH(certify_sharpness(CounterexampleCase::ex27, g, 3.0, 0.0, 0.0, &other),
                      ContainsSubstring("different grid"));
}

TEST_CASE("catalogue weights pass the slice admissibility screen", "[verify]") {
    grid_ptr g = build_grid({DiscFactor{}, DiscFactor{}}, {{8, 16}, {8, 16}});
    DiscFamily fam = default_disc_family(cplx(-1, -1), cplx(1, 1), {cplx(1, 0)});

    // exponent 1.5 sits close to the p = 2 ceiling 2(p - 1); the estimate
    // stays borderline (not flagged divergent) with a moderate constant
    Counterexample c26 = build_counterexample(CounterexampleCase::ex26, g, 2.0, 1.0, 1.5);
    ApEstimate near = ap_star_constant(c26.weight, 2.0, default_slice_points(c26.weight), fam);
    CHECK(near.verdict != ApVerdict::DIVERGENT);
    CHECK(near.constant < 10.0);

    // a milder exponent against a larger p is cleanly admissible
    Counterexample c26b = build_counterexample(CounterexampleCase::ex26, g, 3.0, 1.0, 1.2);
    ApEstimate easy = ap_star_constant(c26b.weight, 3.0, default_slice_points(c26b.weight), fam);
    CHECK(easy.verdict == ApVerdict::FINITE);
    CHECK(easy.constant < 20.0);
}
