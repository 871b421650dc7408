// Command-line front end: one verb per process, JSON config file plus flag
// overrides (flags win), every artifact inventoried in out/manifest.json.

#include <dbarlab/cli.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace {

using dbarlab::ExperimentConfig;

// Flags land in optionals so a flag overrides the config file only when it
// was actually passed.
struct FlagSet {
    std::string config_path;
    std::optional<int> n_r1, n_theta1, n_r2, n_theta2;
    std::optional<double> inner_radius;
    std::optional<std::string> grading;
    std::optional<int> factors;
    std::optional<double> p, eps, s_exp, alpha1, alpha2;
    std::optional<std::string> weight, case_id, datum, dilations;
    std::optional<int> refine_levels, levels, contour_nodes, basis_degree;
    std::optional<unsigned> seed;
    std::optional<std::string> out_dir;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file; flags override its values");
        cmd->add_option("--nr1", n_r1, "radial cells, factor 1");
        cmd->add_option("--ntheta1", n_theta1, "angular cells, factor 1");
        cmd->add_option("--nr2", n_r2, "radial cells, factor 2");
        cmd->add_option("--ntheta2", n_theta2, "angular cells, factor 2");
        cmd->add_option("--inner-radius", inner_radius, "hole radius (0 = verb default)");
        cmd->add_option("--grading", grading, "radial grading: uniform | geometric");
        cmd->add_option("--factors", factors, "number of disc factors (1 or 2)");
        cmd->add_option("--p", p, "Lebesgue exponent");
        cmd->add_option("--eps", eps, "weight exponent offset (ex26)");
        cmd->add_option("--s-exp", s_exp, "singular exponent (ex26)");
        cmd->add_option("--alpha1", alpha1, "fractional order, factor 1");
        cmd->add_option("--alpha2", alpha2, "fractional order, factor 2");
        cmd->add_option("--weight", weight, "weight name (see `dbarlab weights list`)");
        cmd->add_option("--case", case_id, "case id (ex26/ex27/ex35 or constructed-1..3)");
        cmd->add_option("--datum", datum, "bidisc datum: constant | separable | bump");
        cmd->add_option("--dilations", dilations, "rows like \"1,1;2,1;1,8\"");
        cmd->add_option("--refine-levels", refine_levels, "refinement ladder depth");
        cmd->add_option("--levels", levels, "cutoff ladder depth (4..9)");
        cmd->add_option("--contour-nodes", contour_nodes, "trapezoid nodes per contour");
        cmd->add_option("--basis-degree", basis_degree, "holomorphic basis degree");
        cmd->add_option("--seed", seed, "test-form placement jitter (0 = stock placement)");
        cmd->add_option("--out", out_dir, "output directory (default: out)");
    }

    ExperimentConfig merge(const std::string& verb, const std::string& action) const {
        ExperimentConfig c;
        if (!config_path.empty())
            c = dbarlab::config_from_json(dbarlab::slurp_file(config_path));
        c.verb = verb;
        c.action = action;
        auto put = [](auto& dst, const auto& src) {
            if (src) dst = *src;
        };
        put(c.n_r1, n_r1);
        put(c.n_theta1, n_theta1);
        put(c.n_r2, n_r2);
        put(c.n_theta2, n_theta2);
        put(c.inner_radius, inner_radius);
        put(c.grading, grading);
        put(c.factors, factors);
        put(c.p, p);
        put(c.eps, eps);
        put(c.s_exp, s_exp);
        put(c.alpha1, alpha1);
        put(c.alpha2, alpha2);
        put(c.weight_name, weight);
        put(c.case_id, case_id);
        put(c.datum, datum);
        put(c.dilations, dilations);
        put(c.refine_levels, refine_levels);
        put(c.levels, levels);
        put(c.contour_nodes, contour_nodes);
        put(c.basis_degree, basis_degree);
        put(c.seed, seed);
        put(c.out_dir, out_dir);
        return c;
    }
};

int run_action(const FlagSet& flags, const std::string& verb, const std::string& action) {
    ExperimentConfig cfg;
    try {
        cfg = flags.merge(verb, action);
    } catch (const dbarlab::error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    auto issues = dbarlab::config_issues(cfg);
    if (!issues.empty()) {
        std::cerr << "configuration rejected, " << issues.size() << " issue(s):\n";
        for (const auto& s : issues) std::cerr << "  - " << s << "\n";
        return 2;
    }
    try {
        dbarlab::RunManifest m = dbarlab::run(cfg);
        std::cout << dbarlab::summary_text(m) << "\nmanifest: " << cfg.out_dir
                  << "/manifest.json\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dbar solvers, weighted-norm probes and sharpness certificates on polar "
                 "product grids (set DBARLAB_THREADS to cap the worker pool)"};
    app.require_subcommand(1);

    struct Pending {
        FlagSet flags;
        std::string verb, action;
    };
    std::vector<std::unique_ptr<Pending>> pending;
    Pending* selected = nullptr;

    auto add_action = [&](CLI::App* verb_cmd, const std::string& verb, const std::string& action,
                          const std::string& help) {
        auto p = std::make_unique<Pending>();
        p->verb = verb;
        p->action = action;
        CLI::App* cmd = verb_cmd->add_subcommand(action, help);
        p->flags.attach(cmd);
        Pending* raw = p.get();
        cmd->callback([&selected, raw] { selected = raw; });
        pending.push_back(std::move(p));
        return cmd;
    };

    CLI::App* grid = app.add_subcommand("grid", "grid construction checks");
    grid->require_subcommand(1);
    add_action(grid, "grid", "check", "build a grid and check node weights against the area");

    CLI::App* weights = app.add_subcommand("weights", "weight registry and Muckenhoupt probes");
    weights->require_subcommand(1);
    add_action(weights, "weights", "list", "list the registered weights");
    add_action(weights, "weights", "ap", "estimate the Ap constant over a disc family");
    add_action(weights, "weights", "apstar", "estimate the slice-wise Ap constant");
    add_action(weights, "weights", "dilation", "Ap estimates under anisotropic dilations");

    CLI::App* riesz = app.add_subcommand("riesz", "fractional-integral boundedness probes");
    riesz->require_subcommand(1);
    add_action(riesz, "riesz", "probe", "norm-ratio sweep across a refinement ladder");

    CLI::App* dbar = app.add_subcommand("dbar", "dbar solvers on the bidisc");
    dbar->require_subcommand(1);
    add_action(dbar, "dbar", "solve", "iterated Cauchy-transform solve of a named datum");
    add_action(dbar, "dbar", "canonical", "solve plus weighted holomorphic projection");

    CLI::App* hartogs = app.add_subcommand("hartogs", "Hartogs-triangle transport and solves");
    hartogs->require_subcommand(1);
    add_action(hartogs, "hartogs", "pullback",
               "pull a triangle datum back to the punctured bidisc and test closedness");
    add_action(hartogs, "hartogs", "extend-test",
               "cutoff ladder for extension of the pull-back across the puncture");
    add_action(hartogs, "hartogs", "solve", "solve a triangle datum (p >= 4)");

    CLI::App* verify = app.add_subcommand("verify", "sharpness certificates");
    verify->require_subcommand(1);
    add_action(verify, "verify", "sharpness",
               "blow-up ladders plus contour check for a catalogue case");

    CLI::App* report = app.add_subcommand("report", "re-render plots and summary from a manifest");
    std::string manifest_path = "out/manifest.json";
    report->add_option("--manifest", manifest_path, "path to a run's manifest.json");
    bool report_chosen = false;
    report->callback([&report_chosen] { report_chosen = true; });

    CLI11_PARSE(app, argc, argv);

    if (report_chosen) {
        try {
            dbarlab::report_render(manifest_path);
            std::cout << "re-rendered plots and summary next to " << manifest_path << "\n";
            return 0;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 1;
        }
    }
    if (!selected) {
        std::cerr << "error: no action selected\n";
        return 2;
    }
    return run_action(selected->flags, selected->verb, selected->action);
}
