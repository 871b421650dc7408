#include <catch2/catch_amalgamated.hpp>

#include <dbarlab/weights.hpp>

using namespace dbarlab;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

namespace {

DiscFamily origin_family(int octaves = 13) {
    DiscFamily fam;
    for (int k = 0; k < octaves; ++k) fam.discs.push_back({cplx{0, 0}, std::pow(2.0, -k)});
    fam.rule = "origin ladder";
    return fam;
}

DiscFamily mixed_family() {
    DiscFamily fam = origin_family(7);
    for (cplx c : {cplx{0.5, 0.3}, cplx{-0.4, 0.2}, cplx{0.3, -0.5}})
        for (int k = 0; k < 4; ++k) fam.discs.push_back({c, std::pow(2.0, -k)});
    fam.rule = "origin ladder + off-center probes";
    return fam;
}

}  // namespace

TEST_CASE("weight registry lookups", "[weights]") {
    const Weight& w = find_weight("zsq");
    cplx z{0.37, 0.0};
    CHECK(w.mu(&z) == Approx(w.radial_profile(0.37)).epsilon(1e-15));
    CHECK(find_weight("w2sq").dim == 2);
    REQUIRE_THROWS_WITH(find_weight("nope"), ContainsSubstring("zsq"));

    auto sing = find_weight("diffsq").singular_in_coord(0, {cplx{0, 0}, cplx{0.3, 0.4}});
    REQUIRE(sing.size() == 1);
    CHECK(std::abs(sing[0] - cplx{0.3, 0.4}) < 1e-15);
}

TEST_CASE("constant weight is flat across the default family", "[weights]") {
    auto fam = default_disc_family(cplx{-1, -1}, cplx{1, 1}, {});
    REQUIRE(fam.discs.size() == 81u * 13u);
    ApEstimate est = ap_constant(find_weight("one"), 2.7, fam);
    CHECK(est.verdict == ApVerdict::FINITE);
    CHECK(est.constant == Approx(1.0).epsilon(1e-6));
    CHECK(est.trace.size() == fam.discs.size());
    for (const auto& t : est.trace) {
        REQUIRE(t.value >= 1.0 - 1e-9);
        REQUIRE(t.value <= 1.0 + 1e-6);
    }
}

TEST_CASE("squared modulus at p = 4 gives 27/16 independent of radius", "[weights]") {
    ApEstimate est = ap_constant(find_weight("zsq"), 4.0, origin_family());
    CHECK(est.verdict == ApVerdict::FINITE);
    CHECK(est.constant == Approx(27.0 / 16.0).epsilon(0.01));
    REQUIRE(est.trace.size() == 13u);
    for (const auto& t : est.trace) {
        CHECK(t.value == Approx(est.trace[0].value).epsilon(1e-10));
        CHECK(t.value == Approx(27.0 / 16.0).epsilon(0.01));
    }
    CHECK(std::abs(est.attaining_center) < 1e-12);
}

TEST_CASE("off-center probes containing the singularity dominate", "[weights]") {
    ApEstimate est = ap_constant(find_weight("zsq"), 4.0, mixed_family());
    CHECK(est.verdict == ApVerdict::FINITE);
    // the supremum moves to a disc holding the singularity off-center
    CHECK(est.constant > 27.0 / 16.0);
    CHECK(std::abs(est.attaining_center) < est.attaining_radius);
    for (const auto& t : est.trace) {
        CHECK(t.value >= 1.0 - 1e-9);
        // probes missing the singularity stay close to flat
        if (std::abs(t.center) > t.radius) CHECK(t.value < 27.0 / 16.0);
    }
}

TEST_CASE("squared modulus leaves A_2", "[weights]") {
    ApEstimate est = ap_constant(find_weight("zsq"), 2.0, origin_family());
    CHECK(est.verdict == ApVerdict::DIVERGENT);
    CHECK(std::isfinite(est.constant));

    ApEstimate quart = ap_constant(find_weight("zquart"), 2.0, origin_family(3));
    CHECK(quart.verdict == ApVerdict::DIVERGENT);
    CHECK(std::isfinite(quart.constant));
}

TEST_CASE("fourth power at p = 4 gives 9", "[weights]") {
    ApEstimate est = ap_constant(find_weight("zquart"), 4.0, origin_family(3));
    CHECK(est.verdict == ApVerdict::FINITE);
    CHECK(est.constant == Approx(9.0).epsilon(0.01));
}

TEST_CASE("per-disc values never dip below one", "[weights]") {
    for (const char* name : {"one", "zsq", "zquart"})
        for (double p : {1.5, 2.0, 3.0, 4.0, 6.0}) {
            ApEstimate est = ap_constant(find_weight(name), p, mixed_family());
            for (const auto& t : est.trace) REQUIRE(t.value >= 1.0 - 1e-9);
        }
}

TEST_CASE("disc values decrease in p for the squared modulus", "[weights]") {
    DiscFamily one_disc;
    one_disc.discs.push_back({cplx{0, 0}, 1.0});
    double v3 = ap_constant(find_weight("zsq"), 3.0, one_disc).constant;
    double v4 = ap_constant(find_weight("zsq"), 4.0, one_disc).constant;
    double v6 = ap_constant(find_weight("zsq"), 6.0, one_disc).constant;
    CHECK(v3 == Approx(2.0).epsilon(0.01));
    CHECK(v4 == Approx(27.0 / 16.0).epsilon(0.01));
    CHECK(v6 == Approx(3125.0 / 2048.0).epsilon(0.01));
    CHECK(v3 >= v4);
    CHECK(v4 >= v6);
}

TEST_CASE("scaling the weight leaves the constant alone", "[weights]") {
    Weight scaled = make_weight(
        "zsq-scaled", 1, [](const cplx* z) { return 37.5 * std::norm(z[0]); },
        {{cplx{0, 0}}});
    DiscFamily fam = origin_family(5);
    double a = ap_constant(find_weight("zsq"), 4.0, fam).constant;
    double b = ap_constant(scaled, 4.0, fam).constant;
    CHECK(std::abs(a - b) <= 1e-12 * a);
}

TEST_CASE("slice constant matches the disc constant in one dimension", "[weights]") {
    DiscFamily fam = mixed_family();
    ApEstimate direct = ap_constant(find_weight("zsq"), 4.0, fam);
    ApEstimate star = ap_star_constant(find_weight("zsq"), 4.0, {{cplx{0.7, 0.1}}}, fam);
    REQUIRE(star.constant == direct.constant);
    REQUIRE(star.verdict == direct.verdict);
}

TEST_CASE("product weight slices", "[weights]") {
    const Weight& w = find_weight("w2sq");
    DiscFamily fam = origin_family();
    auto pts = default_slice_points(w);
    REQUIRE(pts.size() == 16u);

    ApEstimate est = ap_star_constant(w, 4.0, pts, fam);
    CHECK(est.verdict == ApVerdict::FINITE);
    CHECK(est.constant == Approx(27.0 / 16.0).epsilon(0.01));

    // slicing the first coordinate freezes the weight to a constant
    Weight frozen = make_weight(
        "w2sq-slice1", 1, [](const cplx*) { return std::norm(cplx{0.6, 0.0}); }, {{}});
    CHECK(ap_constant(frozen, 4.0, fam).constant == Approx(1.0).epsilon(1e-6));

    CHECK(ap_star_constant(w, 2.0, pts, fam).verdict == ApVerdict::DIVERGENT);
}

TEST_CASE("inconclusive when the ladder neither settles nor blows up", "[weights]") {
    Weight slow = make_weight(
        "slowpow", 1, [](const cplx* z) { return std::pow(std::abs(z[0]), -1.6); },
        {{cplx{0, 0}}});
    DiscFamily one_disc;
    one_disc.discs.push_back({cplx{0, 0}, 1.0});
    ApEstimate est = ap_constant(slow, 2.0, one_disc);
    CHECK(est.verdict == ApVerdict::INCONCLUSIVE);
}

TEST_CASE("dilation uniformity", "[weights]") {
    DiscFamily fam;
    for (cplx c : {cplx{0, 0}, cplx{0.5, 0.3}})
        for (int k = 0; k < 4; ++k) fam.discs.push_back({c, std::pow(2.0, -k)});

    auto flat = dilation_ap_check(find_weight("one2"), 4.0, {{1, 1}, {2, 1}, {1, 8}}, fam);
    CHECK(flat.uniform);
    CHECK(flat.spread <= 1.0 + 1e-9);

    auto prod = dilation_ap_check(find_weight("w2sq"), 4.0, {{1, 1}, {2, 1}, {1, 8}}, fam);
    CHECK(prod.uniform);
    CHECK(prod.spread <= 1.05);
    REQUIRE(prod.rows.size() == 3u);
    for (const auto& r : prod.rows)
        CHECK(r.estimate == Approx(prod.rows[0].estimate).epsilon(1e-10));

    auto skew = dilation_ap_check(find_weight("diffsq"), 4.0, {{1, 1}, {2, 1}, {1, 8}}, fam);
    CHECK_FALSE(skew.uniform);
    CHECK(skew.spread > 1.2);
}

TEST_CASE("weights parameter validation", "[weights]") {
    DiscFamily fam = origin_family(3);
    CHECK_THROWS_AS(ap_constant(find_weight("zsq"), 1.0, fam), error);
    CHECK_THROWS_AS(ap_constant(find_weight("w2sq"), 4.0, fam), error);
    CHECK_THROWS_AS(ap_constant(find_weight("zsq"), 4.0, DiscFamily{}), error);
    CHECK_THROWS_AS(ap_star_constant(find_weight("zsq"), 4.0, {}, fam), error);
    CHECK_THROWS_AS(
        ap_star_constant(find_weight("w2sq"), 4.0, {{cplx{0, 0}}}, fam), error);
    CHECK_THROWS_AS(dilation_ap_check(find_weight("w2sq"), 4.0, {{1.0}}, fam), error);
    CHECK_THROWS_AS(dilation_ap_check(find_weight("w2sq"), 4.0, {{1.0, -2.0}}, fam), error);

    DiscFamily bad;
    bad.discs.push_back({cplx{0, 0}, 0.0});
    CHECK_THROWS_AS(ap_constant(find_weight("zsq"), 4.0, bad), error);
}
