#include <dbarlab/cli.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

using namespace dbarlab;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

namespace fs = std::filesystem;

// fresh scratch directory per test run, cleaned up on destruction
struct TempDir {
    fs::path root;
    TempDir() {
        root = fs::temp_directory_path() /
               ("dbarlab-cli-" + std::to_string(std::random_device{}()));
        fs::create_directories(root);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(root, ec);
    }
    std::string sub(const std::string& name) const { return (root / name).string(); }
};

ExperimentConfig small_verify_config(const std::string& dir) {
    ExperimentConfig c;
    c.verb = "verify";
    c.action = "sharpness";
    c.case_id = "ex27";
    c.p = 3.0;
    c.n_r1 = 16;
    c.n_theta1 = 64;
    c.n_r2 = 12;
    c.n_theta2 = 32;
    c.levels = 7;
    c.out_dir = dir;
    return c;
}

bool has_issue(const std::vector<std::string>& issues, const std::string& needle) {
    for (const auto& s : issues)
        if (s.find(needle) != std::string::npos) return true;
    return false;
}

}  // namespace

TEST_CASE("config JSON round trip preserves every field", "[cli]") {
    ExperimentConfig c;
    c.verb = "verify";
    c.action = "sharpness";
    c.n_r1 = 7;
    c.n_theta1 = 11;
    c.n_r2 = 13;
    c.n_theta2 = 17;
    c.inner_radius = 0.03125;
    c.grading = "geometric";
    c.factors = 1;
    c.p = 2.5;
    c.eps = 0.75;
    c.s_exp = 1.25;
    c.alpha1 = 0.5;
    c.alpha2 = 1.5;
    c.weight_name = "zsq";
    c.case_id = "ex26";
    c.datum = "bump";
    c.dilations = "2,3;5,7";
    c.refine_levels = 4;
    c.levels = 6;
    c.contour_nodes = 128;
    c.basis_degree = 8;
    c.seed = 42;
    c.out_dir = "elsewhere";

    ExperimentConfig r = config_from_json(config_to_json(c));
    CHECK(r.verb == c.verb);
    CHECK(r.action == c.action);
    CHECK(r.n_r1 == c.n_r1);
    CHECK(r.n_theta1 == c.n_theta1);
    CHECK(r.n_r2 == c.n_r2);
    CHECK(r.n_theta2 == c.n_theta2);
    CHECK(r.inner_radius == c.inner_radius);
    CHECK(r.grading == c.grading);
    CHECK(r.factors == c.factors);
    CHECK(r.p == c.p);
    CHECK(r.eps == c.eps);
    CHECK(r.s_exp == c.s_exp);
    CHECK(r.alpha1 == c.alpha1);
    CHECK(r.alpha2 == c.alpha2);
    CHECK(r.weight_name == c.weight_name);
    CHECK(r.case_id == c.case_id);
    CHECK(r.datum == c.datum);
    CHECK(r.dilations == c.dilations);
    CHECK(r.refine_levels == c.refine_levels);
    CHECK(r.levels == c.levels);
    CHECK(r.contour_nodes == c.contour_nodes);
    CHECK(r.basis_degree == c.basis_degree);
    CHECK(r.seed == c.seed);
    CHECK(r.out_dir == c.out_dir);
}

TEST_CASE("config parsing reports all problems in one error", "[cli]") {
    CHECK_THROWS_WITH(config_from_json("{\"p\": \"two\", \"mystery\": 1, \"seed\": -4}"),
                      ContainsSubstring("3 problem(s)") && ContainsSubstring("'p'") &&
                          ContainsSubstring("mystery") && ContainsSubstring("seed"));
    CHECK_THROWS_WITH(config_from_json("[1, 2]"), ContainsSubstring("object"));
    CHECK_THROWS_WITH(config_from_json("{nope"), ContainsSubstring("parse failed"));
    CHECK(config_from_json("{}").n_r1 == 32);  // defaults survive an empty config
}

TEST_CASE("validation enumerates every violated precondition at once", "[cli]") {
    ExperimentConfig c = small_verify_config("unused");
    c.case_id = "ex26";       // needs eps and s_exp
    c.n_r1 = 1;               // too coarse
    c.levels = 12;            // ladder cap
    c.contour_nodes = 8;      // below the trapezoid floor
    auto issues = config_issues(c);
    CHECK(issues.size() == 4);
    CHECK(has_issue(issues, "too coarse"));
    CHECK(has_issue(issues, "eps > 0"));
    CHECK(has_issue(issues, "[4, 9]"));
    CHECK(has_issue(issues, "at least 64"));
    CHECK_THROWS_WITH(run(c), ContainsSubstring("4 issue(s)") && ContainsSubstring("eps > 0"));

    CHECK(config_issues(small_verify_config("ok")).empty());
}

TEST_CASE("validation names the unknown verb, action, weight and case", "[cli]") {
    ExperimentConfig c;
    c.verb = "frobnicate";
    auto issues = config_issues(c);
    REQUIRE(issues.size() == 1);
    CHECK_THAT(issues[0], ContainsSubstring("grid, weights, riesz, dbar, hartogs, verify"));

    c.verb = "weights";
    c.action = "applesauce";
    issues = config_issues(c);
    REQUIRE(issues.size() == 1);
    CHECK_THAT(issues[0], ContainsSubstring("list, ap, apstar, dilation"));

    c.action = "ap";
    c.p = 2.0;
    issues = config_issues(c);  // no weight chosen
    REQUIRE(issues.size() == 1);
    CHECK_THAT(issues[0], ContainsSubstring("choose a weight"));
    CHECK_THAT(issues[0], ContainsSubstring("one, one2, zsq"));

    c.weight_name = "bogus";
    CHECK(has_issue(config_issues(c), "unknown weight"));

    c.weight_name = "one2";  // wrong dimension for a slice estimate
    CHECK(has_issue(config_issues(c), "dimension"));

    ExperimentConfig h;
    h.verb = "hartogs";
    h.action = "solve";
    h.case_id = "constructed-9";
    h.p = 3.5;
    issues = config_issues(h);
    CHECK(has_issue(issues, "constructed-1, constructed-2, constructed-3"));
    CHECK(has_issue(issues, "only p >= 4"));

    ExperimentConfig v = small_verify_config("x");
    v.eps = 0.1;  // ex27 takes only p
    CHECK(has_issue(config_issues(v), "takes only p"));
}

TEST_CASE("validation screens the protocol parameters per verb", "[cli]") {
    ExperimentConfig r;
    r.verb = "riesz";
    r.action = "probe";
    r.p = 3.0;
    r.alpha1 = 2.5;
    r.refine_levels = 1;
    auto issues = config_issues(r);
    CHECK(has_issue(issues, "alpha1"));
    CHECK(has_issue(issues, "[2, 6]"));

    ExperimentConfig d;
    d.verb = "dbar";
    d.action = "canonical";
    d.p = 4.0;
    d.datum = "nonsense";
    d.n_theta1 = 32;  // too few modes for degree 16
    issues = config_issues(d);
    CHECK(has_issue(issues, "constant, separable, bump"));
    CHECK(has_issue(issues, "n_theta >= 64"));

    ExperimentConfig w;
    w.verb = "weights";
    w.action = "dilation";
    w.weight_name = "one2";
    w.p = 4.0;
    w.dilations = "1,x;3";
    issues = config_issues(w);
    CHECK(has_issue(issues, "is not a number"));
    CHECK(has_issue(issues, "dimension 2"));

    ExperimentConfig g;
    g.verb = "grid";
    g.action = "check";
    g.grading = "geometric";  // needs a hole to grade toward
    CHECK(has_issue(config_issues(g), "geometric grading needs inner_radius > 0"));

    ExperimentConfig hp;
    hp.verb = "hartogs";
    hp.action = "pullback";
    hp.case_id = "constructed-1";
    hp.p = 4.0;
    hp.inner_radius = 0.25;  // cutoff ladder cannot fit
    CHECK(has_issue(config_issues(hp), "1/512"));
}

TEST_CASE("a run writes a complete, hash-consistent manifest", "[cli]") {
    TempDir tmp;
    ExperimentConfig c;
    c.verb = "weights";
    c.action = "ap";
    c.weight_name = "one";
    c.p = 2.0;
    c.out_dir = tmp.sub("ap");
    RunManifest m = run(c);

    CHECK(m.verb == "weights");
    CHECK(m.version == std::string(artifact_version()));
    REQUIRE(m.outputs.size() == 3);
    CHECK(m.outputs[0].name == "ap_trace.csv");
    CHECK(m.outputs[1].name == "ap.json");
    CHECK(m.outputs[2].name == "summary.txt");
    for (const auto& rec : m.outputs) {
        std::string content = slurp_file(c.out_dir + "/" + rec.name);
        CHECK(content.size() == rec.bytes);
        CHECK(hash_tag(content) == rec.hash);
    }
    CHECK(fs::exists(c.out_dir + "/manifest.json"));

    // the estimate itself: the unit weight has constant exactly 1
    std::string ap = slurp_file(c.out_dir + "/ap.json");
    CHECK_THAT(ap, ContainsSubstring("\"constant\": 1,"));
    CHECK_THAT(ap, ContainsSubstring("\"verdict\": \"FINITE\""));

    // completed runs carry verdicts, they do not throw on a divergent one
    ExperimentConfig div = c;
    div.weight_name = "zsq";
    div.out_dir = tmp.sub("ap_div");
    RunManifest md = run(div);
    bool saw = false;
    for (const auto& [k, v] : md.highlights)
        saw = saw || (k == "verdict" && v == "\"DIVERGENT\"");
    CHECK(saw);
}

TEST_CASE("rerunning a configuration reproduces byte-identical artifacts", "[cli]") {
    TempDir tmp;
    ExperimentConfig c = small_verify_config(tmp.sub("a"));
    RunManifest ma = run(c);
    c.out_dir = tmp.sub("b");
    RunManifest mb = run(c);

    REQUIRE(ma.outputs.size() == mb.outputs.size());
    for (std::size_t i = 0; i < ma.outputs.size(); ++i) {
        if (ma.outputs[i].kind == "summary") continue;  // timings differ by design
        INFO(ma.outputs[i].name);
        CHECK(ma.outputs[i].hash == mb.outputs[i].hash);
        CHECK(slurp_file(tmp.sub("a") + "/" + ma.outputs[i].name) ==
              slurp_file(tmp.sub("b") + "/" + mb.outputs[i].name));
    }

    // and the certificate carried through the artifacts
    std::string verdict = slurp_file(tmp.sub("a") + "/verdict.json");
    CHECK_THAT(verdict, ContainsSubstring("CERTIFIED-SHARP"));
    std::string svg = slurp_file(tmp.sub("a") + "/norm_trace.svg");
    CHECK_THAT(svg, ContainsSubstring("<svg"));
    CHECK_THAT(svg, ContainsSubstring("forbidden"));
}

TEST_CASE("grid check certifies the cell-area bookkeeping", "[cli]") {
    TempDir tmp;
    ExperimentConfig c;
    c.verb = "grid";
    c.action = "check";
    c.factors = 2;
    c.n_r1 = 10;
    c.n_theta1 = 12;
    c.n_r2 = 6;
    c.n_theta2 = 8;
    c.inner_radius = 0.25;
    c.out_dir = tmp.sub("g");
    run(c);
    std::string gj = slurp_file(c.out_dir + "/grid.json");
    CHECK_THAT(gj, ContainsSubstring("\"verdict\": \"OK\""));
    CHECK_THAT(gj, ContainsSubstring("\"nodes\": " + std::to_string(10 * 12 * 6 * 8)));

    // snapshot rows stay bounded via the deterministic stride
    auto rows = parse_csv(slurp_file(c.out_dir + "/snapshot.csv"));
    CHECK(rows.size() >= 2);
    CHECK(rows.size() <= 4098);
    CHECK(rows[0][0] == "re_z1");
}

TEST_CASE("dbar solve artifacts reload onto the grid they came from", "[cli]") {
    TempDir tmp;
    ExperimentConfig c;
    c.verb = "dbar";
    c.action = "solve";
    c.datum = "separable";
    c.n_r1 = 8;
    c.n_theta1 = 16;
    c.n_r2 = 8;
    c.n_theta2 = 16;
    c.out_dir = tmp.sub("d");
    run(c);

    std::string sj = slurp_file(c.out_dir + "/solve.json");
    CHECK_THAT(sj, ContainsSubstring("ITERATED-CAUCHY"));
    CHECK_THAT(sj, ContainsSubstring("\"norm_ratio\": null"));

    // full field at this size: one row per node plus the header
    grid_ptr g = detail::config_grid(c);
    SampledField u = read_field_csv(c.out_dir + "/solution.csv", g);
    SolveResult res = product_solve(detail::named_bidisc_datum("separable", g));
    double dev = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) dev = std::max(dev, std::abs(u[i] - res.u[i]));
    CHECK(dev <= 1e-15);
    CHECK(res.residual_max < 1e-3);
}

TEST_CASE("hartogs runs carry the extension ladder into the artifacts", "[cli]") {
    TempDir tmp;
    ExperimentConfig c;
    c.verb = "hartogs";
    c.action = "extend-test";
    c.case_id = "constructed-3";
    c.p = 4.0;
    c.n_r1 = 12;
    c.n_theta1 = 24;
    c.n_r2 = 12;
    c.n_theta2 = 24;
    c.out_dir = tmp.sub("h");
    run(c);

    std::string hj = slurp_file(c.out_dir + "/hartogs.json");
    CHECK_THAT(hj, ContainsSubstring("\"verdict\": \"EXTENDS\""));
    auto rows = parse_csv(slurp_file(c.out_dir + "/extension.csv"));
    REQUIRE(rows.size() == 9);  // header + k = 2..256 doubling
    CHECK(rows[1][0] == "2");
    CHECK(rows[8][0] == "256");
    CHECK_THAT(slurp_file(c.out_dir + "/extension.svg"), ContainsSubstring("slope"));
}

TEST_CASE("report_render rebuilds plots byte-identically and lists gaps", "[cli]") {
    TempDir tmp;
    ExperimentConfig c = small_verify_config(tmp.sub("v"));
    run(c);
    std::string dir = c.out_dir;
    std::string svg_before = slurp_file(dir + "/norm_trace.svg");
    std::string sum_before = slurp_file(dir + "/summary.txt");

    report_render(dir + "/manifest.json");
    CHECK(slurp_file(dir + "/norm_trace.svg") == svg_before);
    CHECK(slurp_file(dir + "/summary.txt") == sum_before);

    // lost derived artifacts are rebuilt from the traces
    fs::remove(dir + "/norm_trace.svg");
    fs::remove(dir + "/summary.txt");
    report_render(dir + "/manifest.json");
    CHECK(slurp_file(dir + "/norm_trace.svg") == svg_before);
    CHECK_THAT(slurp_file(dir + "/summary.txt"), ContainsSubstring("verify sharpness"));

    fs::remove(dir + "/contour.csv");
    spill_file(dir + "/norm_trace.csv", slurp_file(dir + "/norm_trace.csv") + "tampered\n");
    CHECK_THROWS_WITH(report_render(dir + "/manifest.json"),
                      ContainsSubstring("missing output: contour.csv") &&
                          ContainsSubstring("changed since the run: norm_trace.csv"));

    CHECK_THROWS_WITH(report_render(tmp.sub("absent") + "/manifest.json"),
                      ContainsSubstring("cannot open manifest"));
}

TEST_CASE("svg plots guard their axes and annotate fitted slopes", "[cli]") {
    CHECK_THROWS_WITH(svg_line_plot({{"empty-trace", {}, {}}}, PlotSpec{}),
                      ContainsSubstring("empty-trace") && ContainsSubstring("run the probe"));
    CHECK_THROWS_WITH(
        svg_line_plot({{"holes", {1.0, 2.0}, {1.0, 0.0}}}, PlotSpec{"", "", "", false, true}),
        ContainsSubstring("holes") && ContainsSubstring("non-positive"));

    // a clean power law annotates its exponent on the legend
    PlotSeries s{"decay", {}, {}};
    for (int k = 1; k <= 8; ++k) {
        s.x.push_back(std::pow(2.0, k));
        s.y.push_back(std::pow(2.0, -1.5 * k));
    }
    std::string svg = svg_line_plot({s}, PlotSpec{"t", "x", "y", true, true, true});
    CHECK_THAT(svg, ContainsSubstring("slope -1.5"));
    CHECK(svg == svg_line_plot({s}, PlotSpec{"t", "x", "y", true, true, true}));
}

TEST_CASE("seeded batteries jitter deterministically and stay admissible", "[cli]") {
    TestBattery stock = detail::jittered_battery(0);
    TestBattery a = detail::jittered_battery(7);
    TestBattery b = detail::jittered_battery(7);
    REQUIRE(a.triangle_tests.size() == stock.triangle_tests.size());
    CHECK(a.triangle_tests[0].b1.center == b.triangle_tests[0].b1.center);
    CHECK(a.triangle_tests[0].b1.center != stock.triangle_tests[0].b1.center);
    double shift = std::abs(a.triangle_tests[0].b1.center - stock.triangle_tests[0].b1.center);
    CHECK(shift <= 0.03);

    // a jittered battery still passes the transport screen end to end
    TempDir tmp;
    ExperimentConfig c;
    c.verb = "hartogs";
    c.action = "pullback";
    c.case_id = "constructed-1";
    c.p = 4.0;
    c.n_r1 = 12;
    c.n_theta1 = 24;
    c.n_r2 = 12;
    c.n_theta2 = 24;
    c.seed = 2026;
    c.out_dir = tmp.sub("j");
    run(c);
    CHECK_THAT(slurp_file(c.out_dir + "/hartogs.json"),
               ContainsSubstring("\"closed_on_triangle\": true"));
}
