#pragma once

// Experiment driver behind the command line: a flat configuration struct, a
// validator that reports every violated precondition at once, and run() which
// dispatches one verb, writes its artifacts through the report funnel, and
// returns the manifest. The binary in tools/ is a thin flag parser over this.

#include <dbarlab/dbar.hpp>
#include <dbarlab/hartogs.hpp>
#include <dbarlab/report.hpp>
#include <dbarlab/riesz.hpp>
#include <dbarlab/verify.hpp>
#include <dbarlab/weights.hpp>

#include <json.hpp>

#include <chrono>
#include <random>

namespace dbarlab {

struct ExperimentConfig {
    std::string verb;    // grid | weights | riesz | dbar | hartogs | verify
    std::string action;  // verb-specific, see config_issues

    // domain: unit-disc factors, polar midpoint nodes
    int n_r1 = 32, n_theta1 = 64;
    int n_r2 = 32, n_theta2 = 64;
    double inner_radius = 0.0;  // 0 means "verb default" for hole-based verbs
    std::string grading = "uniform";
    int factors = 2;

    // analytic parameters
    double p = 0.0;
    double eps = 0.0;
    double s_exp = 0.0;
    double alpha1 = 1.0, alpha2 = 1.0;
    std::string weight_name;  // JSON/flag key: weight
    std::string case_id;      // JSON/flag key: case
    std::string datum = "separable";
    std::string dilations = "1,1;2,1;1,8";

    // protocol depths
    int refine_levels = 3;   // riesz refinement ladder
    int levels = 7;          // blow-up cutoff ladder
    int contour_nodes = 256;
    int basis_degree = 16;

    unsigned seed = 0;  // placement jitter for test-form batteries
    std::string out_dir = "out";
};

// ---------------------------------------------------------------------------
// configuration serialization

inline std::string config_to_json(const ExperimentConfig& c) {
    return js_obj({{"verb", js(c.verb)},
                   {"action", js(c.action)},
                   {"n_r1", js(c.n_r1)},
                   {"n_theta1", js(c.n_theta1)},
                   {"n_r2", js(c.n_r2)},
                   {"n_theta2", js(c.n_theta2)},
                   {"inner_radius", js(c.inner_radius)},
                   {"grading", js(c.grading)},
                   {"factors", js(c.factors)},
                   {"p", js(c.p)},
                   {"eps", js(c.eps)},
                   {"s_exp", js(c.s_exp)},
                   {"alpha1", js(c.alpha1)},
                   {"alpha2", js(c.alpha2)},
                   {"weight", js(c.weight_name)},
                   {"case", js(c.case_id)},
                   {"datum", js(c.datum)},
                   {"dilations", js(c.dilations)},
                   {"refine_levels", js(c.refine_levels)},
                   {"levels", js(c.levels)},
                   {"contour_nodes", js(c.contour_nodes)},
                   {"basis_degree", js(c.basis_degree)},
                   {"seed", js(c.seed)},
                   {"out_dir", js(c.out_dir)}},
                  2);
}

/// Parses a configuration object. Unknown keys and type mismatches are all
/// reported in one error so a typo sweep takes one round trip.
inline ExperimentConfig config_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        fail(std::string("config: JSON parse failed: ") + e.what());
    }
    require(j.is_object(), "config: top level must be a JSON object");

    ExperimentConfig c;
    std::vector<std::string> problems;
    auto want_str = [&](const std::string& key, const nlohmann::json& v, std::string& dst) {
        if (v.is_string())
            dst = v.get<std::string>();
        else
            problems.push_back("key '" + key + "' must be a string");
    };
    auto want_num = [&](const std::string& key, const nlohmann::json& v, double& dst) {
        if (v.is_number())
            dst = v.get<double>();
        else
            problems.push_back("key '" + key + "' must be a number");
    };
    auto want_int = [&](const std::string& key, const nlohmann::json& v, int& dst) {
        if (v.is_number_integer())
            dst = v.get<int>();
        else
            problems.push_back("key '" + key + "' must be an integer");
    };

    for (const auto& [key, val] : j.items()) {
        if (key == "verb")
            want_str(key, val, c.verb);
        else if (key == "action")
            want_str(key, val, c.action);
        else if (key == "n_r1")
            want_int(key, val, c.n_r1);
        else if (key == "n_theta1")
            want_int(key, val, c.n_theta1);
        else if (key == "n_r2")
            want_int(key, val, c.n_r2);
        else if (key == "n_theta2")
            want_int(key, val, c.n_theta2);
        else if (key == "inner_radius")
            want_num(key, val, c.inner_radius);
        else if (key == "grading")
            want_str(key, val, c.grading);
        else if (key == "factors")
            want_int(key, val, c.factors);
        else if (key == "p")
            want_num(key, val, c.p);
        else if (key == "eps")
            want_num(key, val, c.eps);
        else if (key == "s_exp")
            want_num(key, val, c.s_exp);
        else if (key == "alpha1")
            want_num(key, val, c.alpha1);
        else if (key == "alpha2")
            want_num(key, val, c.alpha2);
        else if (key == "weight")
            want_str(key, val, c.weight_name);
        else if (key == "case")
            want_str(key, val, c.case_id);
        else if (key == "datum")
            want_str(key, val, c.datum);
        else if (key == "dilations")
            want_str(key, val, c.dilations);
        else if (key == "refine_levels")
            want_int(key, val, c.refine_levels);
        else if (key == "levels")
            want_int(key, val, c.levels);
        else if (key == "contour_nodes")
            want_int(key, val, c.contour_nodes);
        else if (key == "basis_degree")
            want_int(key, val, c.basis_degree);
        else if (key == "seed") {
            if (val.is_number_integer() && val.get<long long>() >= 0)
                c.seed = static_cast<unsigned>(val.get<long long>());
            else
                problems.push_back("key 'seed' must be a non-negative integer");
        } else if (key == "out_dir")
            want_str(key, val, c.out_dir);
        else
            problems.push_back("unknown key '" + key + "'");
    }
    if (!problems.empty()) {
        std::string msg = "config: " + std::to_string(problems.size()) + " problem(s):";
        for (const auto& s : problems) msg += "\n  - " + s;
        fail(msg);
    }
    return c;
}

// ---------------------------------------------------------------------------
// validation

namespace detail {

inline std::vector<std::vector<double>> parse_dilations(const std::string& text,
                                                        std::vector<std::string>* issues) {
    std::vector<std::vector<double>> rows;
    std::istringstream is(text);
    std::string row;
    while (std::getline(is, row, ';')) {
        std::vector<double> entries;
        std::istringstream rs(row);
        std::string cell;
        while (std::getline(rs, cell, ',')) {
            try {
                std::size_t used = 0;
                double v = std::stod(cell, &used);
                require(used == cell.size(), "junk");
                entries.push_back(v);
            } catch (const std::exception&) {
                if (issues)
                    issues->push_back("dilations: '" + cell + "' is not a number (expected "
                                      "semicolon-separated rows of comma-separated factors, "
                                      "e.g. \"1,1;2,1;1,8\")");
                entries.push_back(1.0);
            }
        }
        if (!entries.empty()) rows.push_back(std::move(entries));
    }
    return rows;
}

}  // namespace detail

/// Every violated precondition of the configured operation, in one pass.
/// Empty means run() will not reject the configuration.
inline std::vector<std::string> config_issues(const ExperimentConfig& c) {
    std::vector<std::string> bad;
    auto flag = [&](std::string s) { bad.push_back(std::move(s)); };

    static const std::vector<std::pair<std::string, std::vector<std::string>>> verbs = {
        {"grid", {"check"}},
        {"weights", {"list", "ap", "apstar", "dilation"}},
        {"riesz", {"probe"}},
        {"dbar", {"solve", "canonical"}},
        {"hartogs", {"pullback", "extend-test", "solve"}},
        {"verify", {"sharpness"}},
    };
    const std::vector<std::string>* actions = nullptr;
    for (const auto& [verb, acts] : verbs)
        if (verb == c.verb) actions = &acts;
    if (!actions) {
        flag("verb '" + c.verb + "' is not one of grid, weights, riesz, dbar, hartogs, verify");
        return bad;  // nothing else is interpretable without a verb
    }
    bool action_ok = false;
    for (const auto& a : *actions) action_ok = action_ok || a == c.action;
    if (!action_ok) {
        std::string known;
        for (const auto& a : *actions) known += (known.empty() ? "" : ", ") + a;
        flag("action '" + c.action + "' for verb '" + c.verb + "' must be one of: " + known);
        return bad;
    }

    if (c.out_dir.empty()) flag("out_dir must not be empty");

    auto check_resolution = [&](int which) {
        int nr = which == 1 ? c.n_r1 : c.n_r2;
        int nt = which == 1 ? c.n_theta1 : c.n_theta2;
        if (nr < 2 || nt < 4)
            flag("factor " + std::to_string(which) + " resolution " + std::to_string(nr) + "x" +
                 std::to_string(nt) + " is too coarse (need n_r >= 2 and n_theta >= 4)");
    };
    auto check_domain = [&](bool both) {
        check_resolution(1);
        if (both) check_resolution(2);
        if (!(c.inner_radius >= 0.0 && c.inner_radius < 1.0))
            flag("inner_radius " + fmt_g17(c.inner_radius) + " must lie in [0, 1)");
        if (c.grading != "uniform" && c.grading != "geometric")
            flag("grading '" + c.grading + "' must be uniform or geometric");
        if (c.grading == "geometric" && c.inner_radius <= 0.0)
            flag("geometric grading needs inner_radius > 0 (the rings shrink toward the hole)");
    };
    auto check_p = [&] {
        if (!(c.p > 1.0)) flag("p = " + fmt_g17(c.p) + " must exceed 1 (pass --p)");
    };
    auto check_weight = [&](int dim_needed) -> const Weight* {
        if (c.weight_name.empty()) {
            std::string known;
            for (const auto& w : weight_registry()) known += (known.empty() ? "" : ", ") + w.name;
            flag("choose a weight (--weight); known: " + known);
            return nullptr;
        }
        try {
            const Weight& w = find_weight(c.weight_name);
            if (dim_needed > 0 && w.dim != dim_needed)
                flag("weight '" + w.name + "' has dimension " + std::to_string(w.dim) +
                     " but this action needs dimension " + std::to_string(dim_needed));
            return &w;
        } catch (const error& e) {
            flag(e.what());
            return nullptr;
        }
    };

    if (c.verb == "grid") {
        if (c.factors != 1 && c.factors != 2)
            flag("factors = " + std::to_string(c.factors) + " must be 1 or 2");
        else
            check_domain(c.factors == 2);
    } else if (c.verb == "weights") {
        if (c.action != "list") {
            check_p();
            const Weight* w = check_weight(c.action == "ap" ? 1 : 0);
            if (c.action == "dilation") {
                auto rows = detail::parse_dilations(c.dilations, &bad);
                if (rows.empty())
                    flag("dilations: no rows parsed from '" + c.dilations + "'");
                else if (w)
                    for (const auto& row : rows) {
                        if (static_cast<int>(row.size()) != w->dim)
                            flag("dilations: a row has " + std::to_string(row.size()) +
                                 " factors but weight '" + w->name + "' has dimension " +
                                 std::to_string(w->dim));
                        for (double v : row)
                            if (!(v > 0.0))
                                flag("dilations: factor " + fmt_g17(v) + " must be positive");
                    }
            }
        }
    } else if (c.verb == "riesz") {
        if (c.factors != 1 && c.factors != 2)
            flag("factors = " + std::to_string(c.factors) + " must be 1 or 2");
        else {
            check_domain(c.factors == 2);
            if (!c.weight_name.empty()) check_weight(c.factors);
        }
        check_p();
        if (c.refine_levels < 2 || c.refine_levels > 6)
            flag("refine_levels = " + std::to_string(c.refine_levels) + " must lie in [2, 6]");
        auto check_alpha = [&](double a, int which) {
            if (!(a > 0.0 && a < 2.0))
                flag("alpha" + std::to_string(which) + " = " + fmt_g17(a) +
                     " must lie in (0, 2)");
        };
        check_alpha(c.alpha1, 1);
        if (c.factors == 2) check_alpha(c.alpha2, 2);
    } else if (c.verb == "dbar") {
        if (c.factors != 2) flag("dbar acts on the bidisc; factors must be 2");
        check_domain(true);
        if (c.datum != "constant" && c.datum != "separable" && c.datum != "bump")
            flag("datum '" + c.datum + "' is unknown (known: constant, separable, bump)");
        if (c.action == "canonical") {
            check_p();
            if (c.weight_name.empty()) {
                // w2sq is the default projection weight; nothing to flag
            } else
                check_weight(2);
            if (c.basis_degree < 1 || c.basis_degree > 64)
                flag("basis_degree = " + std::to_string(c.basis_degree) + " must lie in [1, 64]");
            else if (c.n_theta1 < 4 * c.basis_degree || c.n_theta2 < 4 * c.basis_degree)
                flag("canonical projection with basis degree " + std::to_string(c.basis_degree) +
                     " needs n_theta >= " + std::to_string(4 * c.basis_degree) +
                     " on both factors to resolve the top mode");
        }
    } else if (c.verb == "hartogs") {
        check_resolution(1);
        check_resolution(2);
        if (c.action == "solve") {
            if (!(c.inner_radius >= 0.0 && c.inner_radius <= 0.25))
                flag("inner_radius " + fmt_g17(c.inner_radius) +
                     " must lie in [0, 0.25] (0 picks the default hole 1/256)");
        } else if (!(c.inner_radius >= 0.0 && c.inner_radius <= 1.0 / 512.0)) {
            flag("inner_radius " + fmt_g17(c.inner_radius) +
                 " must lie in [0, 1/512]: the cutoff ladder reaches k = 256 and needs "
                 "inner_radius <= 1/(2k) (0 picks the default hole 1/1024)");
        }
        if (c.grading != "uniform" && c.grading != "geometric")
            flag("grading '" + c.grading + "' must be uniform or geometric");
        if (c.case_id != "constructed-1" && c.case_id != "constructed-2" &&
            c.case_id != "constructed-3")
            flag("case '" + c.case_id +
                 "' is unknown here (known: constructed-1, constructed-2, constructed-3)");
        check_p();
        if (c.action == "solve") {
            if (c.p > 1.0 && c.p < 4.0)
                flag("hartogs solve accepts only p >= 4 (below that the solve is unsound on "
                     "the triangle; run `hartogs pullback` to inspect the datum instead)");
            if (c.basis_degree < 1 || c.basis_degree > 64)
                flag("basis_degree = " + std::to_string(c.basis_degree) + " must lie in [1, 64]");
        }
    } else if (c.verb == "verify") {
        check_resolution(1);
        check_resolution(2);
        check_p();
        CounterexampleCase kind{};
        bool kind_ok = true;
        try {
            kind = parse_counterexample(c.case_id);
        } catch (const error& e) {
            flag(e.what());
            kind_ok = false;
        }
        if (kind_ok) {
            if (kind == CounterexampleCase::ex26) {
                if (!(c.eps > 0.0))
                    flag("ex26 needs eps > 0 (got " + fmt_g17(c.eps) + ")");
                else {
                    double lo = 2.0 / (1.0 + c.eps);
                    if (!(c.s_exp > lo && c.s_exp < 2.0))
                        flag("ex26 needs s_exp in (2/(1 + eps), 2) = (" + fmt_g17(lo) +
                             ", 2), got " + fmt_g17(c.s_exp));
                }
            } else if (c.eps != 0.0 || c.s_exp != 0.0) {
                flag(c.case_id + " takes only p; leave eps and s_exp unset");
            }
        }
        if (c.levels < 4 || c.levels > 9)
            flag("levels = " + std::to_string(c.levels) + " must lie in [4, 9]");
        if (c.contour_nodes < 64)
            flag("contour_nodes = " + std::to_string(c.contour_nodes) + " must be at least 64");
        if (!(c.inner_radius >= 0.0 && c.inner_radius < 1.0))
            flag("inner_radius " + fmt_g17(c.inner_radius) + " must lie in [0, 1)");
    }
    return bad;
}

inline void validate_config(const ExperimentConfig& c) {
    auto issues = config_issues(c);
    if (issues.empty()) return;
    std::string msg = "configuration rejected, " + std::to_string(issues.size()) + " issue(s):";
    for (const auto& s : issues) msg += "\n  - " + s;
    fail(msg);
}

// ---------------------------------------------------------------------------
// named data and shared builders

namespace detail {

class StageTimer {
  public:
    StageTimer(RunManifest& m, std::string stage)
        : m_(m), stage_(std::move(stage)), t0_(std::chrono::steady_clock::now()) {}
    ~StageTimer() {
        double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
        m_.timings.emplace_back(stage_, sec);
    }

  private:
    RunManifest& m_;
    std::string stage_;
    std::chrono::steady_clock::time_point t0_;
};

inline grid_ptr config_grid(const ExperimentConfig& c) {
    auto mk = [&](double inner, int nr, int nt) {
        DiscFactor f{cplx{0.0, 0.0}, 1.0, inner};
        return c.grading == "geometric" ? PolarGrid::geometric(f, nr, nt)
                                        : PolarGrid::uniform(f, nr, nt);
    };
    std::vector<PolarGrid> gs;
    gs.push_back(mk(c.factors == 1 ? c.inner_radius : 0.0, c.n_r1, c.n_theta1));
    if (c.factors == 2) gs.push_back(mk(c.inner_radius, c.n_r2, c.n_theta2));
    return product_of(std::move(gs));
}

/// Verb-appropriate hole radius when the config leaves it at 0. The cutoff
/// ladder reaches k = 256, so closedness transport needs a much smaller hole
/// than the solver's screens do.
inline double hole_or_default(const ExperimentConfig& c) {
    if (c.inner_radius > 0.0) return c.inner_radius;
    if (c.verb == "hartogs" && (c.action == "pullback" || c.action == "extend-test"))
        return 1.0 / 1024.0;
    if (c.verb == "hartogs") return 1.0 / 256.0;
    return 1.0 / 64.0;
}

/// Closed-form bidisc data for the plain solvers. Each one is dbar of an
/// explicit potential, so the residual is a pure discretization error.
inline Form01 named_bidisc_datum(const std::string& name, const grid_ptr& g) {
    if (name == "constant")  // potential conj(z1)
        return Form01({sample(g, [](const cplx*) { return cplx{1.0, 0.0}; }),
                       sample(g, [](const cplx*) { return cplx{0.0, 0.0}; })});
    if (name == "separable")  // potential conj(z1 z2)
        return Form01({sample(g, [](const cplx* z) { return std::conj(z[1]); }),
                       sample(g, [](const cplx* z) { return std::conj(z[0]); })});
    if (name == "bump")  // potential (1 - |z1|^2)^2 (1 - |z2|^2)^2
        return Form01(
            {sample(g,
                    [](const cplx* z) {
                        double s1 = 1.0 - std::norm(z[0]), s2 = 1.0 - std::norm(z[1]);
                        return -2.0 * z[0] * s1 * (s2 * s2);
                    }),
             sample(g, [](const cplx* z) {
                 double s1 = 1.0 - std::norm(z[0]), s2 = 1.0 - std::norm(z[1]);
                 return -2.0 * z[1] * (s1 * s1) * s2;
             })});
    fail("unknown bidisc datum '" + name + "' (known: constant, separable, bump)");
}

/// Triangle data with known potentials, used by every hartogs action.
inline Form01 named_triangle_datum(const std::string& name, const grid_ptr& g) {
    auto zero = [&] { return sample_triangle(g, [](cplx, cplx) { return cplx{0.0, 0.0}; }); };
    if (name == "constructed-1")  // potential |z2|^2
        return Form01({zero(), sample_triangle(g, [](cplx, cplx z2) { return z2; })});
    if (name == "constructed-2")  // potential conj(z2)^2
        return Form01(
            {zero(), sample_triangle(g, [](cplx, cplx z2) { return 2.0 * std::conj(z2); })});
    if (name == "constructed-3")  // potential conj(z1)^2 z2^4
        return Form01({sample_triangle(g,
                                       [](cplx z1, cplx z2) {
                                           cplx z2sq = z2 * z2;
                                           return 2.0 * std::conj(z1) * z2sq * z2sq;
                                       }),
                       zero()});
    fail("unknown triangle case '" + name +
         "' (known: constructed-1, constructed-2, constructed-3)");
}

/// Smooth bounded probe family for the fractional-integral sweep; valid on
/// one or two factors.
inline std::vector<FieldGenerator> default_probe_family(int dim) {
    std::vector<FieldGenerator> fam;
    fam.push_back({"constant", [](const cplx*) { return cplx{1.0, 0.0}; }});
    fam.push_back({"polynomial", [dim](const cplx* z) {
                       return z[0] * std::conj(z[dim - 1]) + cplx{2.0, 0.0};
                   }});
    fam.push_back({"bump", [dim](const cplx* z) {
                       double v = 1.0;
                       for (int j = 0; j < dim; ++j) v *= 1.0 - std::norm(z[j]);
                       return cplx{v, 0.0};
                   }});
    fam.push_back({"edge-peak", [dim](const cplx* z) {
                       cplx v{1.0, 0.0};
                       for (int j = 0; j < dim; ++j) v /= 1.25 - z[j];
                       return v;
                   }});
    fam.push_back({"radial-well", [dim](const cplx* z) {
                       double v = 1.0;
                       for (int j = 0; j < dim; ++j) v *= std::norm(z[j]);
                       return cplx{v, 0.0};
                   }});
    return fam;
}

/// Deterministic placement jitter on all bump centers; seed 0 keeps the
/// stock battery.
inline TestBattery jittered_battery(unsigned seed) {
    TestBattery b = default_test_battery();
    if (seed == 0) return b;
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> d(-0.02, 0.02);
    auto shift = [&](Bump& bump) { bump.center += cplx(d(rng), d(rng)); };
    for (auto& t : b.triangle_tests) {
        shift(t.b1);
        shift(t.b2);
    }
    for (auto& t : b.product_tests) {
        shift(t.b1);
        shift(t.b2);
    }
    return b;
}

inline TestForm jittered_eta(unsigned seed) {
    TestForm eta{TestFormKind::scalar20, Bump{cplx(0.0, 0.0), 0.7}, Bump{cplx(0.0, 0.0), 0.7}};
    if (seed == 0) return eta;
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> d(-0.02, 0.02);
    eta.b1.center += cplx(d(rng), d(rng));
    eta.b2.center += cplx(d(rng), d(rng));
    return eta;
}

/// Field CSV capped at ~200k rows by a deterministic stride, so default-size
/// solution grids do not produce half-gigabyte artifacts.
inline void emit_field_strided(RunManifest& m, const std::string& name, const SampledField& f,
                               std::size_t cap = 200000) {
    std::size_t n = f.size();
    std::size_t stride = (n + cap - 1) / cap;
    if (stride <= 1) {
        emit_field(m, name, f);
        return;
    }
    const ProductGrid& g = f.grid();
    std::string out;
    for (int j = 1; j <= g.dim(); ++j)
        out += "re_z" + std::to_string(j) + ",im_z" + std::to_string(j) + ",";
    out += "weight,re_val,im_val\n";
    std::array<cplx, 8> coord{};
    for (std::size_t i = 0; i < n; i += stride) {
        g.coords(i, coord.data());
        for (int j = 0; j < g.dim(); ++j)
            out += fmt_g17(coord[j].real()) + "," + fmt_g17(coord[j].imag()) + ",";
        out += fmt_g17(g.weight(i)) + "," + fmt_g17(f[i].real()) + "," + fmt_g17(f[i].imag()) +
               "\n";
    }
    emit_text(m, name, "field-csv", out);
}

inline DiscFamily weight_disc_family(const Weight& w) {
    std::vector<cplx> singular;
    if (w.singular_in_coord) {
        std::vector<cplx> base(static_cast<std::size_t>(w.dim), cplx{0.0, 0.0});
        for (int j = 0; j < w.dim; ++j)
            for (cplx s : w.singular_in_coord(j, base)) singular.push_back(s);
    }
    return default_disc_family(cplx{-1.0, -1.0}, cplx{1.0, 1.0}, singular);
}

inline std::string blowup_json(const BlowupVerdict& v) {
    double last_growth =
        v.trace.empty() ? std::numeric_limits<double>::quiet_NaN() : v.trace.back().growth;
    return js_obj({{"order", js(v.order)},
                   {"levels", js(static_cast<int>(v.trace.size()))},
                   {"last_growth", js(last_growth)},
                   {"verdict", js(to_string(v.verdict))}},
                  2);
}

inline void append_blowup_rows(CsvTable& t, const std::string& ladder, const BlowupVerdict& v) {
    for (const auto& lev : v.trace)
        t.add_row({ladder, csv_num(lev.level), csv_num(lev.cutoff), csv_num(lev.mass),
                   csv_num(lev.norm), csv_num(lev.growth)});
}

// ---------------------------------------------------------------------------
// verb runners

inline void run_grid_check(const ExperimentConfig& c, RunManifest& m) {
    grid_ptr g;
    {
        StageTimer t(m, "build grid");
        g = config_grid(c);
    }
    double area = 0.0;
    {
        StageTimer t(m, "sum node weights");
        kahan acc;
        for (std::size_t i = 0; i < g->size(); ++i) acc.add(g->weight(i));
        area = acc.value();
    }
    double expected = 1.0;
    for (int j = 0; j < g->dim(); ++j) {
        const DiscFactor& f = g->factor(j).factor();
        expected *= pi * (f.radius * f.radius - f.inner_radius * f.inner_radius);
    }
    double rel = std::abs(area - expected) / expected;
    std::string verdict = rel < 1e-10 ? "OK" : "MISMATCH";

    StageTimer t(m, "emit");
    JsonFields gj;
    gj.emplace_back("factors", js(g->dim()));
    gj.emplace_back("nodes", js(static_cast<std::uint64_t>(g->size())));
    gj.emplace_back("grading", js(c.grading));
    gj.emplace_back("area", js(area));
    gj.emplace_back("area_expected", js(expected));
    gj.emplace_back("area_rel_err", js(rel));
    gj.emplace_back("verdict", js(verdict));
    emit_text(m, "grid.json", "json", js_obj(gj) + "\n");
    emit_field_strided(m, "snapshot.csv", sample(g, [](const cplx* z) { return std::conj(z[0]); }),
                       4096);
    m.highlights.emplace_back("nodes", js(static_cast<std::uint64_t>(g->size())));
    m.highlights.emplace_back("area_rel_err", js(rel));
    m.highlights.emplace_back("verdict", js(verdict));
}

inline void run_weights(const ExperimentConfig& c, RunManifest& m) {
    if (c.action == "list") {
        CsvTable t;
        t.header = {"name", "dim", "separable"};
        std::string names;
        for (const auto& w : weight_registry()) {
            t.add_row({w.name, csv_num(w.dim), w.factor_mu.empty() ? "no" : "yes"});
            names += (names.empty() ? "" : ", ") + w.name;
        }
        emit_text(m, "weights.csv", "weight-list", t.to_string());
        emit_text(m, "weights.json", "json",
                  js_obj({{"count", js(static_cast<int>(weight_registry().size()))},
                          {"names", js(names)}}) +
                      "\n");
        m.highlights.emplace_back("weights", js(names));
        return;
    }

    const Weight& w = find_weight(c.weight_name);
    DiscFamily fam = weight_disc_family(w);
    ApEstimate est;
    if (c.action == "ap") {
        StageTimer t(m, "estimate");
        est = ap_constant(w, c.p, fam);
    } else if (c.action == "apstar") {
        StageTimer t(m, "estimate");
        est = ap_star_constant(w, c.p, default_slice_points(w), fam);
    } else {
        StageTimer t(m, "estimate");
        auto dil = parse_dilations(c.dilations, nullptr);
        DilationReport rep = dilation_ap_check(w, c.p, dil, fam);
        CsvTable tab;
        for (std::size_t j = 0; j < dil[0].size(); ++j)
            tab.header.push_back("delta_" + std::to_string(j + 1));
        tab.header.push_back("estimate");
        for (const auto& row : rep.rows) {
            std::vector<std::string> cells;
            for (double d : row.delta) cells.push_back(csv_num(d));
            cells.push_back(csv_num(row.estimate));
            tab.add_row(std::move(cells));
        }
        emit_text(m, "dilation.csv", "dilation", tab.to_string());
        emit_text(m, "dilation.json", "json",
                  js_obj({{"weight", js(w.name)},
                          {"p", js(c.p)},
                          {"spread", js(rep.spread)},
                          {"uniform", js(rep.uniform)},
                          {"bound", js(rep.bound)}}) +
                      "\n");
        m.highlights.emplace_back("spread", js(rep.spread));
        m.highlights.emplace_back("uniform", js(rep.uniform));
        return;
    }

    StageTimer t(m, "emit");
    CsvTable tab;
    tab.header = {"disc_center", "disc_radius", "ap_value"};
    for (const auto& d : est.trace)
        tab.add_row({csv_cplx(d.center), csv_num(d.radius), csv_num(d.value)});
    emit_text(m, "ap_trace.csv", "ap-trace", tab.to_string());
    emit_text(m, "ap.json", "json",
              js_obj({{"weight", js(w.name)},
                      {"p", js(c.p)},
                      {"constant", js(est.constant)},
                      {"attaining_center", js(csv_cplx(est.attaining_center))},
                      {"attaining_radius", js(est.attaining_radius)},
                      {"discs", js(static_cast<int>(est.trace.size()))},
                      {"verdict", js(to_string(est.verdict))}}) +
                  "\n");
    m.highlights.emplace_back("constant", js(est.constant));
    m.highlights.emplace_back("verdict", js(to_string(est.verdict)));
}

inline void run_riesz(const ExperimentConfig& c, RunManifest& m) {
    std::vector<DiscFactor> factors(static_cast<std::size_t>(c.factors),
                                    DiscFactor{cplx{0.0, 0.0}, 1.0, 0.0});
    std::vector<Resolution> base = {{c.n_r1, c.n_theta1}};
    if (c.factors == 2) base.push_back({c.n_r2, c.n_theta2});
    std::vector<double> alpha = {c.alpha1};
    if (c.factors == 2) alpha.push_back(c.alpha2);
    const Weight& mu =
        find_weight(c.weight_name.empty() ? (c.factors == 2 ? "one2" : "one") : c.weight_name);
    auto inputs = default_probe_family(c.factors);

    BoundednessReport rep;
    {
        StageTimer t(m, "probe");
        rep = boundedness_probe(factors, base, inputs, RieszExponent{alpha}, mu, c.p,
                                c.refine_levels);
    }

    StageTimer t(m, "emit");
    CsvTable tab;
    tab.header = {"input", "level", "ratio"};
    for (const auto& row : rep.trace)
        tab.add_row({inputs[static_cast<std::size_t>(row.input)].name, csv_num(row.level),
                     csv_num(row.ratio)});
    std::string csv = tab.to_string();
    emit_text(m, "boundedness.csv", "boundedness", csv);
    emit_text(m, "boundedness.svg", "svg", render_plot_for("boundedness", csv));
    JsonFields ratios;
    for (std::size_t i = 0; i < rep.input_ratios.size(); ++i)
        ratios.emplace_back(inputs[i].name, js(rep.input_ratios[i]));
    std::vector<std::string> notices;
    for (const auto& n : rep.notices) notices.push_back(js(n));
    emit_text(m, "riesz.json", "json",
              js_obj({{"weight", js(mu.name)},
                      {"p", js(c.p)},
                      {"levels", js(rep.levels)},
                      {"max_ratio", js(rep.max_ratio)},
                      {"input_ratios", js_obj(ratios, 2)},
                      {"notices", js_arr(notices, 2)},
                      {"verdict", js(to_string(rep.verdict))}}) +
                  "\n");
    m.highlights.emplace_back("max_ratio", js(rep.max_ratio));
    m.highlights.emplace_back("verdict", js(to_string(rep.verdict)));
}

inline void run_dbar(const ExperimentConfig& c, RunManifest& m) {
    grid_ptr g;
    Form01 f = [&] {
        StageTimer t(m, "sample datum");
        g = config_grid(c);
        return named_bidisc_datum(c.datum, g);
    }();
    SolveResult res = [&] {
        StageTimer t(m, "solve");
        if (c.action == "canonical")
            return canonical_solve(f, find_weight(c.weight_name.empty() ? "w2sq" : c.weight_name),
                                   c.p, HolomorphicBasis{c.basis_degree});
        return product_solve(f);
    }();

    StageTimer t(m, "emit");
    emit_field_strided(m, "solution.csv", res.u);
    emit_text(m, "solve.json", "json",
              js_obj({{"datum", js(c.datum)},
                      {"method", js(to_string(res.method))},
                      {"residual_max", js(res.residual_max)},
                      {"residual_l2", js(res.residual_l2)},
                      {"norm_ratio", js(res.norm_ratio)}}) +
                  "\n");
    m.highlights.emplace_back("residual_max", js(res.residual_max));
    m.highlights.emplace_back("residual_l2", js(res.residual_l2));
    if (c.action == "canonical") m.highlights.emplace_back("norm_ratio", js(res.norm_ratio));
}

inline void run_hartogs(const ExperimentConfig& c, RunManifest& m) {
    grid_ptr g;
    Form01 f = [&] {
        StageTimer t(m, "sample datum");
        g = hartogs_grid(c.n_r1, c.n_theta1, c.n_r2, c.n_theta2, hole_or_default(c),
                         c.grading == "geometric" ? RadialGrading::geometric
                                                  : RadialGrading::uniform);
        return named_triangle_datum(c.case_id, g);
    }();

    auto extension_outputs = [&](const ExtensionReport& ext) {
        CsvTable tab;
        tab.header = {"k", "re_dw1", "im_dw1", "re_dw2", "im_dw2", "majorant"};
        for (const auto& row : ext.rows)
            tab.add_row({csv_num(row.k), csv_num(row.dw1_term.real()),
                         csv_num(row.dw1_term.imag()), csv_num(row.dw2_term.real()),
                         csv_num(row.dw2_term.imag()), csv_num(row.majorant)});
        std::string csv = tab.to_string();
        emit_text(m, "extension.csv", "extension", csv);
        emit_text(m, "extension.svg", "svg", render_plot_for("extension", csv));
    };
    auto slopes_json = [](const ExtensionReport& ext) {
        return js_obj({{"dw1", js(ext.slope_dw1)},
                       {"dw2", js(ext.slope_dw2)},
                       {"majorant", js(ext.slope_majorant)}},
                      2);
    };

    if (c.action == "pullback") {
        ClosednessReport rep;
        {
            StageTimer t(m, "transport closedness");
            rep = pull_back_closedness(f, c.p, jittered_battery(c.seed));
        }
        StageTimer t(m, "emit");
        Form01 h = pull_back_form(f);
        emit_field_strided(m, "pullback_h1.csv", h.comp[0]);
        emit_field_strided(m, "pullback_h2.csv", h.comp[1]);
        extension_outputs(rep.extension);
        std::vector<std::string> tri, prod;
        for (double v : rep.triangle_pairings) tri.push_back(js(v));
        for (double v : rep.product_pairings) prod.push_back(js(v));
        emit_text(m, "hartogs.json", "json",
                  js_obj({{"case", js(c.case_id)},
                          {"p", js(c.p)},
                          {"triangle_pairings", js_arr(tri, 2)},
                          {"product_pairings", js_arr(prod, 2)},
                          {"closed_on_triangle", js(rep.closed_on_triangle)},
                          {"closed_on_product", js(rep.closed_on_product)},
                          {"slopes", slopes_json(rep.extension)},
                          {"limit_value", js(std::abs(rep.extension.limit_value))},
                          {"residual_max", js(std::numeric_limits<double>::quiet_NaN())},
                          {"norm_ratio", js(std::numeric_limits<double>::quiet_NaN())},
                          {"verdict", js(to_string(rep.verdict))}}) +
                      "\n");
        m.highlights.emplace_back("verdict", js(to_string(rep.verdict)));
        return;
    }

    if (c.action == "extend-test") {
        ExtensionReport rep;
        {
            StageTimer t(m, "cutoff ladder");
            rep = extension_test(pull_back_form(f), c.p, {}, jittered_eta(c.seed));
        }
        StageTimer t(m, "emit");
        extension_outputs(rep);
        emit_text(m, "hartogs.json", "json",
                  js_obj({{"case", js(c.case_id)},
                          {"p", js(c.p)},
                          {"slopes", slopes_json(rep)},
                          {"limit_value", js(std::abs(rep.limit_value))},
                          {"residual_max", js(std::numeric_limits<double>::quiet_NaN())},
                          {"norm_ratio", js(std::numeric_limits<double>::quiet_NaN())},
                          {"verdict", js(to_string(rep.verdict))}}) +
                      "\n");
        m.highlights.emplace_back("verdict", js(to_string(rep.verdict)));
        m.highlights.emplace_back("slope_majorant", js(rep.slope_majorant));
        return;
    }

    SolveResult res = [&] {
        StageTimer t(m, "solve");
        return hartogs_solve(f, c.p, HolomorphicBasis{c.basis_degree});
    }();
    StageTimer t(m, "emit");
    emit_field_strided(m, "solution.csv", res.u);
    emit_text(m, "hartogs.json", "json",
              js_obj({{"case", js(c.case_id)},
                      {"p", js(c.p)},
                      {"method", js(to_string(res.method))},
                      {"slopes", "null"},
                      {"limit_value", js(std::numeric_limits<double>::quiet_NaN())},
                      {"residual_max", js(res.residual_max)},
                      {"residual_l2", js(res.residual_l2)},
                      {"norm_ratio", js(res.norm_ratio)},
                      {"verdict", js("SOLVED")}}) +
                  "\n");
    m.highlights.emplace_back("residual_max", js(res.residual_max));
    m.highlights.emplace_back("norm_ratio", js(res.norm_ratio));
}

inline void run_verify(const ExperimentConfig& c, RunManifest& m) {
    CounterexampleCase kind = parse_counterexample(c.case_id);
    SharpnessCertificate cert;
    {
        StageTimer t(m, "certify");
        grid_ptr g = kind == CounterexampleCase::ex35
                         ? hartogs_grid(c.n_r1, c.n_theta1, c.n_r2, c.n_theta2,
                                        hole_or_default(c))
                         : build_grid({DiscFactor{}, DiscFactor{}},
                                      {{c.n_r1, c.n_theta1}, {c.n_r2, c.n_theta2}});
        cert = certify_sharpness(kind, g, c.p, c.eps, c.s_exp, nullptr, c.levels);
    }

    StageTimer t(m, "emit");
    CsvTable norms;
    norms.header = {"ladder", "level", "cutoff", "mass", "norm", "growth"};
    append_blowup_rows(norms, "forbidden", cert.forbidden);
    append_blowup_rows(norms, "supported", cert.supported);
    append_blowup_rows(norms, "datum", cert.datum_norms);
    std::string norm_csv = norms.to_string();
    emit_text(m, "norm_trace.csv", "norm-trace", norm_csv);
    emit_text(m, "norm_trace.svg", "svg", render_plot_for("norm-trace", norm_csv));

    CsvTable ct;
    ct.header = {"radius", "re_base", "im_base", "re_value", "im_value", "re_expected",
                 "im_expected", "rel_err"};
    for (std::size_t i = 0; i < cert.contour.size(); ++i) {
        const ContourSample& s = cert.contour[i];
        cplx e = cert.contour_expected[i];
        double rel = std::abs(s.value - e) / std::max(std::abs(e), 1e-300);
        ct.add_row({csv_num(s.radius), csv_num(s.base.real()), csv_num(s.base.imag()),
                    csv_num(s.value.real()), csv_num(s.value.imag()), csv_num(e.real()),
                    csv_num(e.imag()), csv_num(rel)});
    }
    emit_text(m, "contour.csv", "contour", ct.to_string());

    emit_text(m, "verdict.json", "json",
              js_obj({{"case", js(to_string(cert.kind))},
                      {"p", js(cert.p)},
                      {"eps", js(cert.eps)},
                      {"s_exp", js(cert.s_exp)},
                      {"forbidden_order", js(cert.forbidden_order)},
                      {"supported_order", js(cert.supported_order)},
                      {"contour_rel_err", js(cert.contour_rel_err)},
                      {"candidate_checked", js(cert.candidate_checked)},
                      {"forbidden", blowup_json(cert.forbidden)},
                      {"supported", blowup_json(cert.supported)},
                      {"datum", blowup_json(cert.datum_norms)},
                      {"verdict", js(cert.verdict)}}) +
                  "\n");
    m.highlights.emplace_back("verdict", js(cert.verdict));
    m.highlights.emplace_back("contour_rel_err", js(cert.contour_rel_err));
    m.highlights.emplace_back("forbidden_order", js(cert.forbidden_order));
    m.highlights.emplace_back("supported_order", js(cert.supported_order));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// entry points

/// Runs one configured experiment, writing all artifacts plus manifest.json
/// and summary.txt under cfg.out_dir. Completion means the protocol ran to
/// the end; verdicts (DIVERGENT, OBSTRUCTED, ...) are results, not errors.
inline RunManifest run(const ExperimentConfig& c) {
    validate_config(c);
    RunManifest m;
    m.verb = c.verb;
    m.action = c.action;
    m.out_dir = c.out_dir;
    m.config_json = config_to_json(c);
    if (c.verb == "grid")
        detail::run_grid_check(c, m);
    else if (c.verb == "weights")
        detail::run_weights(c, m);
    else if (c.verb == "riesz")
        detail::run_riesz(c, m);
    else if (c.verb == "dbar")
        detail::run_dbar(c, m);
    else if (c.verb == "hartogs")
        detail::run_hartogs(c, m);
    else
        detail::run_verify(c, m);
    finalize_manifest(m);
    return m;
}

/// Re-renders the derived artifacts (plots, summary) of a finished run from
/// its CSV traces. Every missing or corrupted input is listed in one error.
inline void report_render(const std::string& manifest_path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(slurp_file(manifest_path));
    } catch (const error&) {
        fail("report: cannot open manifest '" + manifest_path + "'");
    } catch (const std::exception& e) {
        fail("report: manifest '" + manifest_path + "' is not valid JSON: " + e.what());
    }
    std::string dir = std::filesystem::path(manifest_path).parent_path().string();
    if (dir.empty()) dir = ".";

    RunManifest m;
    m.verb = j.value("verb", "");
    m.action = j.value("action", "");
    m.version = j.value("version", "");
    m.out_dir = dir;
    if (j.contains("config")) m.config_json = j["config"].dump(2);
    if (j.contains("highlights"))
        for (const auto& [k, v] : j["highlights"].items()) m.highlights.emplace_back(k, v.dump());
    if (j.contains("timings"))
        for (const auto& row : j["timings"])
            m.timings.emplace_back(row.value("stage", ""), row.value("seconds", 0.0));
    require(j.contains("outputs") && j["outputs"].is_array(),
            "report: manifest has no output inventory");
    for (const auto& row : j["outputs"])
        m.outputs.push_back({row.value("name", ""), row.value("kind", ""),
                             row.value("bytes", std::uint64_t{0}), row.value("hash", "")});

    std::vector<std::string> missing, changed;
    std::vector<std::pair<std::string, std::string>> plots;  // kind, csv text
    for (const auto& rec : m.outputs) {
        if (rec.kind == "svg" || rec.kind == "summary") continue;  // re-render targets
        std::string path = dir + "/" + rec.name;
        if (!std::filesystem::exists(path)) {
            missing.push_back(rec.name);
            continue;
        }
        std::string content = slurp_file(path);
        if (hash_tag(content) != rec.hash) {
            changed.push_back(rec.name);
            continue;
        }
        if (rec.kind == "norm-trace" || rec.kind == "boundedness" || rec.kind == "extension")
            plots.emplace_back(rec.kind, content);
    }
    if (!missing.empty() || !changed.empty()) {
        std::string msg = "report: cannot render from " + manifest_path + ":";
        for (const auto& s : missing) msg += "\n  - missing output: " + s + " (run not finished?)";
        for (const auto& s : changed)
            msg += "\n  - output changed since the run: " + s + " (hash mismatch)";
        fail(msg);
    }

    for (const auto& [kind, csv] : plots) {
        std::string name;
        for (const auto& rec : m.outputs)
            if (rec.kind == kind) name = rec.name;
        std::string stem = name.substr(0, name.find_last_of('.'));
        spill_file(dir + "/" + stem + ".svg", render_plot_for(kind, csv));
    }
    // The summary is only reconstructed when lost: a rebuild from the parsed
    // manifest can shorten float digits, and the original is already exact.
    if (!std::filesystem::exists(dir + "/summary.txt"))
        spill_file(dir + "/summary.txt", summary_text(m));
}

}  // namespace dbarlab
