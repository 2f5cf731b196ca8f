// synthcombo command line: simulate, design, fit, predict, evaluate, check.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "synthcombo/synthcombo.hpp"

#ifndef SYNTHCOMBO_VERSION
#define SYNTHCOMBO_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace synthcombo;
using io::Json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

struct Global {
    int threads = default_threads();
};

const auto g_start = std::chrono::steady_clock::now();

class Run {
public:
    Run(CLI::App* sub, std::string manifest_path) : sub_(sub), manifest_path_(std::move(manifest_path)) {}

    void input(const std::string& path) { m_.inputs.push_back(io::digest(path)); }

    void output(const std::string& path, std::string_view content) {
        if (const auto dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
        io::write_file(path, content);
        m_.outputs.push_back(io::digest(path));
    }

    void finish(std::uint64_t seed) {
        m_.version = SYNTHCOMBO_VERSION;
        m_.command = sub_->get_name();
        m_.seed = seed;
        // Config echo: every option of the subcommand with its resolved value.
        for (const CLI::Option* opt : sub_->get_options()) {
            if (opt->get_name() == "--help" || opt->get_name().empty()) continue;
            const auto res = opt->reduced_results();
            std::string key = opt->get_name();
            key.erase(0, key.find_first_not_of('-'));
            if (opt->get_expected_min() == 0) {
                m_.config[key] = opt->count() > 0;
            } else {
                std::string v;
                for (std::size_t i = 0; i < res.size(); ++i) v += (i ? "," : "") + res[i];
                if (res.empty()) v = opt->get_default_str();
                m_.config[key] = v;
            }
        }
        for (const CLI::Option* opt : sub_->get_parent()->get_options())
            if (opt->get_name() == "--threads") m_.config["threads"] = opt->as<int>();
        m_.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - g_start).count();
        if (const auto dir = fs::path(manifest_path_).parent_path(); !dir.empty()) fs::create_directories(dir);
        io::write_file(manifest_path_, m_.to_json().dump(1) + "\n");
        std::cout << "manifest: " << manifest_path_ << " (outputs " << m_.outputs_digest() << ")\n";
    }

private:
    CLI::App* sub_;
    std::string manifest_path_;
    io::RunManifest m_;
};

std::string manifest_for(const std::string& explicit_path, const std::string& output) {
    return explicit_path.empty() ? output + ".manifest.json" : explicit_path;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    for (const auto& f : io::detail::split(s, ',')) {
        auto t = io::detail::trim(f);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
    SimConfig sim;
    std::string preset = "observational";
    std::string out_dir = ".";
    std::string manifest;
};

void add_sim_flags(CLI::App* c, SimConfig& s) {
    c->add_option("--N", s.n_units, "Number of units")->check(CLI::PositiveNumber);
    c->add_option("--r", s.r, "Rank of the coefficient matrix")->check(CLI::PositiveNumber);
    c->add_option("--snr", s.snr, "Signal-to-noise ratio")->check(CLI::PositiveNumber);
    c->add_flag("--per-unit-snr", s.per_unit_snr, "Set the noise level per unit rather than globally");
    c->add_option("--base-nnz", s.base_nnz, "Nonzeros per base vector (0: ceil(p^1.5))")->check(CLI::NonNegativeNumber);
    c->add_option("--donors", s.n_donors, "Donor units (0: 2r)")->check(CLI::NonNegativeNumber);
    c->add_option("--donor-obs", s.donor_obs, "Observations per donor (0: ceil(2 p^2.5))")->check(CLI::NonNegativeNumber);
    c->add_option("--nondonor-obs", s.nondonor_obs, "Observations per non-donor (0: 2 r^4)")
        ->check(CLI::NonNegativeNumber);
}

int run_simulate(CLI::App* sub, const SimulateArgs& a, std::uint64_t seed) {
    SimConfig sim = a.sim;
    sim.pattern = parse_pattern(a.preset);
    sim.seed = seed;
    sim.validate();
    const auto truth = gen_truth(sim);
    const auto real = realize_panel(truth, sim);

    const fs::path dir(a.out_dir);
    Run run(sub, a.manifest.empty() ? (dir / "manifest.json").string() : a.manifest);
    run.output((dir / "panel.csv").string(), io::panel_to_csv(real.panel));
    Json tj = io::truth_json(truth);
    tj["donor_units"] = real.donor_units;
    tj["pattern"] = to_string(sim.pattern);
    run.output((dir / "truth.json").string(), tj.dump(1) + "\n");
    if (real.plan) run.output((dir / "plan.json").string(), io::plan_json(*real.plan).dump(1) + "\n");
    std::size_t obs = 0;
    for (int u = 0; u < real.panel.n_units(); ++u) obs += real.panel.observations(u);
    std::cout << "simulated " << sim.n_units << " units, p = " << sim.p << ", " << obs << " observations ("
              << to_string(sim.pattern) << ")\n";
    run.finish(seed);
    return 0;
}

// ---------------------------------------------------------------------------

struct DesignArgs {
    DesignParams prm;
    std::string preset = "theory";
    bool permutations = false;
    std::string out = "plan.json";
    std::string manifest;
};

int run_design(CLI::App* sub, DesignArgs a, std::uint64_t seed) {
    if (a.permutations)
        detail::fail_data("design --permutations: sampling plans exist only for combinatorial interventions; "
                          "ranking experiments must be designed by hand");
    if (a.preset != "theory" && a.preset != "sims")
        detail::fail_data("design --preset: unknown preset '" + a.preset + "' (expected theory or sims)");
    a.prm.sims_preset = a.preset == "sims";
    const auto plan = design_sample(a.prm, seed);
    Run run(sub, manifest_for(a.manifest, a.out));
    run.output(a.out, io::plan_json(plan).dump(1) + "\n");
    std::cout << "plan: " << plan.donor_ids.size() << " donors x " << plan.donor_combos.size() << " combinations, "
              << (a.prm.n_units - static_cast<int>(plan.donor_ids.size())) << " others x "
              << plan.nondonor_combos.size() << "\n";
    run.finish(seed);
    return 0;
}

// ---------------------------------------------------------------------------

struct FitArgs {
    EstimatorConfig cfg;
    std::string input;
    std::string rankings;
    int p = 0;
    std::string horizontal = "lasso";
    std::string kappa_method = "cv";
    int kappa = 0;
    std::string donors;
    double tol = kPipelineLasso.tol;
    int max_sweeps = kPipelineLasso.max_sweeps;
    std::string out = "model.json";
    std::string report;
    std::string manifest;
};

Json spectrum_json(const std::vector<double>& s) {
    Json ratio = Json::array();
    for (double v : s) ratio.push_back(io::num(s.empty() || s[0] <= 0.0 ? 0.0 : v / s[0]));
    return Json{{"singvals", io::vec_json(s)}, {"ratio_to_top", ratio}};
}

int run_fit(CLI::App* sub, FitArgs a, std::uint64_t seed, const Global& g) {
    auto& cfg = a.cfg;
    cfg.horizontal = parse_horizontal(a.horizontal);
    cfg.kappa.method = parse_kappa_method(a.kappa_method);
    if (a.kappa > 0) {
        cfg.kappa.method = KappaMethod::fixed;
        cfg.kappa.fixed = a.kappa;
    }
    cfg.kappa.seed = seed;
    cfg.seed = seed;
    cfg.threads = g.threads;
    cfg.lasso.tol = a.tol;
    cfg.lasso.max_sweeps = a.max_sweeps;
    for (const auto& d : split_list(a.donors)) {
        try {
            std::size_t used = 0;
            const int u = std::stoi(d, &used);
            if (used != d.size() || u < 0) throw std::invalid_argument(d);
            cfg.donors.push_back(u);
        } catch (const std::logic_error&) {
            detail::fail_data("fit --donors: '" + d + "' is not a unit id");
        }
    }
    cfg.validate();

    const bool ranked = !a.rankings.empty();
    const std::string source = ranked ? a.rankings : a.input;
    Panel panel;
    int items = 0;
    if (ranked) {
        const auto pp = io::load_rankings(a.rankings);
        items = pp.p;
        panel = perm_to_combination_panel(pp);
    } else {
        panel = io::load_panel(a.input, a.p);
    }
    const auto model = fit(panel, cfg);

    Json mj = io::model_json(model);
    if (ranked) mj["ranking_items"] = items;
    Run run(sub, manifest_for(a.manifest, a.out));
    run.input(source);
    run.output(a.out, mj.dump(1) + "\n");

    Json units = Json::array();
    for (int u = 0; u < model.n_units(); ++u) {
        const auto& t = model.transfers[static_cast<std::size_t>(u)];
        Json uj{{"unit", u}, {"role", to_string(model.roles[static_cast<std::size_t>(u)])}};
        if (model.roles[static_cast<std::size_t>(u)] != UnitRole::donor) {
            uj["kappa"] = t.kappa;
            uj["transfer_cv_error"] = io::num(t.cv_error);
            uj["spectrum"] = spectrum_json(t.weights.spectrum);
            if (!t.reason.empty()) uj["reason"] = t.reason;
        }
        units.push_back(std::move(uj));
    }
    Json report{{"schema", io::kSchemaVersion},
                {"kind", "synthcombo-fit-report"},
                {"donors", model.donor_ids},
                {"vertical_threshold", io::num(model.vertical_threshold)},
                {"units", units}};
    const std::string report_path = a.report.empty() ? a.out + ".report.json" : a.report;
    run.output(report_path, report.dump(1) + "\n");

    std::cout << "fit: " << model.donor_ids.size() << " donors, " << model.transferred_units().size()
              << " transferred, " << model.rejected_units().size() << " rejected\n";
    for (int u : model.rejected_units())
        std::cout << "  unit " << u << " rejected: " << model.transfers[static_cast<std::size_t>(u)].reason << "\n";
    run.finish(seed);
    return 0;
}

// ---------------------------------------------------------------------------

struct PredictArgs {
    std::string model;
    std::string queries;
    std::string out = "predictions.csv";
    double level = 0.95;
    std::string manifest;
};

int run_predict(CLI::App* sub, const PredictArgs& a, std::uint64_t seed) {
    int items = 0;
    const auto model = io::with_json(io::read_file(a.model), a.model, [&](const Json& j) {
        if (const auto it = j.find("ranking_items"); it != j.end()) items = it->get<int>();
        return io::model_from(j, a.model);
    });
    const bool with_se = model.config.horizontal == Horizontal::select_ridge;

    auto check_unit = [&](int unit, std::size_t row) {
        const std::string where = a.queries + ": query " + std::to_string(row + 1);
        if (unit >= model.n_units())
            detail::fail_data(where + ": unit " + std::to_string(unit) + " not in the model (" +
                              std::to_string(model.n_units()) + " units)");
        if (model.roles[static_cast<std::size_t>(unit)] == UnitRole::rejected)
            detail::fail_data(where + ": unit " + std::to_string(unit) + " was rejected at fit time (" +
                              model.transfers[static_cast<std::size_t>(unit)].reason + ")");
    };
    auto estimate = [&](int unit, Mask combo) {
        io::PredictionRow row{unit, combo, 0.0};
        if (with_se) {
            const auto iv = model.predict_interval(unit, combo, a.level);
            row.estimate = iv.point;
            row.std_err = iv.std_err;
        } else {
            row.estimate = model.predict(unit, combo);
        }
        return row;
    };

    std::string csv;
    if (items > 0) {
        std::ifstream in(a.queries);
        if (!in) detail::fail_data(a.queries + ": cannot open for reading");
        const auto qs = io::parse_ranking_queries_csv(in, a.queries, items);
        csv = "unit,ranks,estimate,std_err\n";
        for (std::size_t i = 0; i < qs.size(); ++i) {
            check_unit(qs[i].unit, i);
            const auto row = estimate(qs[i].unit, permutation_combo(qs[i].ranking));
            csv += std::to_string(row.unit) + "," + io::ranks_to_string(qs[i].ranking) + "," +
                   io::format_double(row.estimate) + "," + (with_se ? io::format_double(row.std_err) : "") + "\n";
        }
    } else {
        const auto qs = io::load_queries(a.queries);
        std::vector<io::PredictionRow> rows;
        for (std::size_t i = 0; i < qs.size(); ++i) {
            check_unit(qs[i].unit, i);
            if (model.p < kMaxInterventions && (qs[i].combo >> model.p) != 0)
                detail::fail_data(a.queries + ": query " + std::to_string(i + 1) + ": combo " +
                                  std::to_string(qs[i].combo) + " exceeds 2^" + std::to_string(model.p) + " - 1");
            rows.push_back(estimate(qs[i].unit, qs[i].combo));
        }
        csv = io::predictions_to_csv(rows);
    }
    Run run(sub, manifest_for(a.manifest, a.out));
    run.input(a.model);
    run.input(a.queries);
    run.output(a.out, csv);
    run.finish(seed);
    return 0;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
    SimConfig sim;
    std::string methods = "synthcombo,lasso,softimpute";
    std::string preset = "observational";
    std::string ps = "10";
    std::string horizontal = "lasso";
    int seeds = 5;
    std::string out = "evaluation.csv";
    std::string manifest;
};

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int run_evaluate(CLI::App* sub, const EvaluateArgs& a, std::uint64_t seed, const Global& g) {
    const auto methods = split_list(a.methods);
    if (methods.empty()) detail::fail_data("evaluate --methods: no methods given");
    for (const auto& m : methods)
        if (m != "synthcombo" && m != "lasso" && m != "softimpute")
            detail::fail_data("evaluate --methods: unknown method '" + m + "' (expected synthcombo, lasso or softimpute)");
    std::vector<int> ps;
    for (const auto& s : split_list(a.ps)) {
        try {
            std::size_t used = 0;
            const int p = std::stoi(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            ps.push_back(p);
        } catch (const std::logic_error&) {
            detail::fail_data("evaluate --p: '" + s + "' is not an integer");
        }
    }
    if (ps.empty()) detail::fail_data("evaluate --p: no dimensions given");
    EstimatorConfig est;
    est.horizontal = parse_horizontal(a.horizontal);

    std::string csv = "method,p,seed,mse\n";
    std::map<std::pair<int, std::string>, std::vector<double>> by_cell;
    for (int p : ps) {
        for (int k = 0; k < a.seeds; ++k) {
            SimConfig sim = a.sim;
            sim.p = p;
            sim.pattern = parse_pattern(a.preset);
            sim.seed = seed + static_cast<std::uint64_t>(k);
            sim.validate();
            for (const auto& res : compare_methods(sim, methods, est, g.threads)) {
                csv += res.method + "," + std::to_string(p) + "," + std::to_string(sim.seed) + "," +
                       io::format_double(res.mse) + "\n";
                by_cell[{p, res.method}].push_back(res.mse);
            }
        }
    }
    Run run(sub, manifest_for(a.manifest, a.out));
    run.output(a.out, csv);
    std::cout << "median MSE over " << a.seeds << " seeds (" << a.preset << ")\n";
    std::cout << "p";
    for (const auto& m : methods) std::cout << "\t" << m;
    std::cout << "\n";
    for (int p : ps) {
        std::cout << p;
        for (const auto& m : methods) std::cout << "\t" << io::format_double(median(by_cell[{p, m}]));
        std::cout << "\n";
    }
    run.finish(seed);
    return 0;
}

// ---------------------------------------------------------------------------

struct CheckArgs {
    std::string plan;
    std::string truth;
    std::string mode = "exact";
    AssessOptions opts;
    std::string out = "assumptions.json";
    std::string manifest;
};

int run_check(CLI::App* sub, CheckArgs a, std::uint64_t seed) {
    if (a.mode == "exact")
        a.opts.incoherence_mode = IncoherenceMode::exact;
    else if (a.mode == "monte-carlo")
        a.opts.incoherence_mode = IncoherenceMode::monte_carlo;
    else
        detail::fail_data("check --mode: unknown mode '" + a.mode + "' (expected exact or monte-carlo)");
    a.opts.seed = seed;
    const auto plan = io::load_plan(a.plan);
    const auto truth = io::load_truth(a.truth);
    if (truth.p != plan.params.p)
        detail::fail_data(a.truth + ": truth has p = " + std::to_string(truth.p) + " but plan has p = " +
                          std::to_string(plan.params.p));
    const auto rep = assess_plan(plan, truth.alphas, a.opts);
    const auto& sp = rep.spectrum;
    Json j{{"schema", io::kSchemaVersion},
           {"kind", "synthcombo-assumptions"},
           {"horizontal", {{"min_singular", io::vec_json(rep.horizontal_smin)}, {"pass", rep.horizontal_pass}}},
           {"incoherence",
            {{"estimate", io::num(rep.incoherence.estimate)},
             {"threshold", io::num(rep.incoherence.threshold)},
             {"mode", a.mode},
             {"pass", rep.incoherence.pass}}},
           {"spectrum",
            {{"singvals", io::vec_json(sp.singvals)},
             {"rank", sp.rank},
             {"ratio", io::num(sp.ratio)},
             {"frobenius_mass", io::num(sp.frobenius_mass)},
             {"pass", sp.spectrum_pass}}},
           {"subspace", {{"max_residual", io::num(sp.max_residual)}, {"pass", sp.subspace_pass}}},
           {"all_pass", rep.all_pass()}};
    Run run(sub, manifest_for(a.manifest, a.out));
    run.input(a.plan);
    run.input(a.truth);
    run.output(a.out, j.dump(1) + "\n");
    auto verdict = [](bool b) { return b ? "pass" : "FAIL"; };
    std::cout << "horizontal span: " << verdict(rep.horizontal_pass) << "\n"
              << "incoherence: " << verdict(rep.incoherence.pass) << " (" << rep.incoherence.estimate
              << " vs " << rep.incoherence.threshold << ")\n"
              << "spectrum: " << verdict(sp.spectrum_pass) << " (s_r/s_1 = " << sp.ratio << ")\n"
              << "subspace inclusion: " << verdict(sp.subspace_pass) << "\n";
    run.finish(seed);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Counterfactual outcomes for combinations of interventions", "synthcombo"};
    app.set_version_flag("--version", SYNTHCOMBO_VERSION);
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();
    Global g;
    std::uint64_t seed = 0;
    app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "Master seed");

    SimulateArgs sim_a;
    auto* sim = app.add_subcommand("simulate", "Generate a synthetic panel with its ground truth");
    sim->add_option("--preset", sim_a.preset, "Observation pattern: observational, design or uniform")
        ->check(CLI::IsMember({"observational", "confounded", "design", "uniform"}));
    sim->add_option("--p", sim_a.sim.p, "Number of interventions")->check(CLI::Range(1, 20));
    add_sim_flags(sim, sim_a.sim);
    sim->add_option("--out-dir", sim_a.out_dir, "Directory for panel.csv, truth.json and plan.json");
    sim->add_option("--manifest", sim_a.manifest, "Manifest path (default <out-dir>/manifest.json)");

    DesignArgs des_a;
    auto* des = app.add_subcommand("design", "Draw a two-stage sampling plan");
    des->add_option("--N", des_a.prm.n_units, "Number of units")->required()->check(CLI::PositiveNumber);
    des->add_option("--p", des_a.prm.p, "Number of interventions")->required()->check(CLI::Range(1, kMaxInterventions));
    des->add_option("--r", des_a.prm.r, "Rank")->required()->check(CLI::PositiveNumber);
    des->add_option("--s", des_a.prm.s, "Sparsity")->required()->check(CLI::PositiveNumber);
    des->add_option("--gamma", des_a.prm.gamma, "Failure probability")->check(CLI::Range(0.0, 1.0));
    des->add_option("--delta", des_a.prm.delta, "Target accuracy")->check(CLI::PositiveNumber);
    des->add_option("--c1", des_a.prm.c1, "Donor-count constant")->check(CLI::PositiveNumber);
    des->add_option("--c2", des_a.prm.c2, "Donor-sample constant")->check(CLI::PositiveNumber);
    des->add_option("--c3", des_a.prm.c3, "Non-donor-sample constant")->check(CLI::PositiveNumber);
    des->add_option("--preset", des_a.preset, "Size rule: theory or sims");
    des->add_flag("--permutations", des_a.permutations, "Request a plan for ranking interventions (unsupported)");
    des->add_option("--out", des_a.out, "Plan output path");
    des->add_option("--manifest", des_a.manifest, "Manifest path (default <out>.manifest.json)");

    FitArgs fit_a;
    auto* fitc = app.add_subcommand("fit", "Fit the estimator to an observed panel");
    auto* in_opt = fitc->add_option("--input", fit_a.input, "Panel CSV (unit,combo,outcome)");
    auto* rk_opt =
        fitc->add_option("--rankings", fit_a.rankings, "Ranking panel CSV (unit,ranks,outcome)");
    in_opt->excludes(rk_opt);
    rk_opt->excludes(in_opt);
    fitc->add_option("--p", fit_a.p, "Number of interventions (0: infer)")->check(CLI::Range(0, kMaxInterventions));
    fitc->add_option("--horizontal", fit_a.horizontal, "Per-donor regression: lasso, cart or select-ridge")
        ->check(CLI::IsMember({"lasso", "cart", "select-ridge"}));
    fitc->add_option("--lambda", fit_a.cfg.lambda, "Lasso penalty (0: cross-validate)")->check(CLI::NonNegativeNumber);
    fitc->add_option("--lambda-grid", fit_a.cfg.lambda_grid, "Penalties tried by CV")->check(CLI::PositiveNumber);
    fitc->add_option("--lambda-min-ratio", fit_a.cfg.lambda_min_ratio, "Smallest grid penalty over the largest (0: auto)")
        ->check(CLI::Range(0.0, 1.0));
    fitc->add_option("--cv-folds", fit_a.cfg.cv_folds, "Folds for horizontal CV")->check(CLI::Range(2, 1000));
    fitc->add_option("--max-sweeps", fit_a.max_sweeps, "Coordinate-descent sweeps")->check(CLI::PositiveNumber);
    fitc->add_option("--tol", fit_a.tol, "Coordinate-descent tolerance")->check(CLI::PositiveNumber);
    fitc->add_option("--cart-nodes", fit_a.cfg.cart_nodes, "Leaves per CART tree")->check(CLI::PositiveNumber);
    fitc->add_option("--kappa", fit_a.kappa, "Fixed PCR rank (0: use --kappa-method)")->check(CLI::NonNegativeNumber);
    fitc->add_option("--kappa-method", fit_a.kappa_method, "PCR rank rule: cv, elbow or fixed")
        ->check(CLI::IsMember({"cv", "elbow", "fixed"}));
    fitc->add_option("--kappa-folds", fit_a.cfg.kappa.folds, "Folds for the PCR rank CV")->check(CLI::Range(2, 1000));
    fitc->add_option("--donor-threshold", fit_a.cfg.donor_threshold, "Largest horizontal CV error for a donor")
        ->check(CLI::PositiveNumber);
    fitc->add_option("--min-obs", fit_a.cfg.min_obs, "Fewest observations for a donor (0: auto)")
        ->check(CLI::NonNegativeNumber);
    fitc->add_option("--vertical-threshold", fit_a.cfg.vertical_threshold, "Largest transfer CV error (0: auto)")
        ->check(CLI::NonNegativeNumber);
    fitc->add_option("--donors", fit_a.donors, "Explicit donor ids, comma separated");
    fitc->add_option("--out", fit_a.out, "Model output path");
    fitc->add_option("--report", fit_a.report, "Spectrum report path (default <out>.report.json)");
    fitc->add_option("--manifest", fit_a.manifest, "Manifest path (default <out>.manifest.json)");

    PredictArgs pr_a;
    auto* pr = app.add_subcommand("predict", "Predict outcomes from a fitted model");
    pr->add_option("--model", pr_a.model, "Model JSON")->required();
    pr->add_option("--queries", pr_a.queries, "Query CSV (unit,combo or unit,ranks)")->required();
    pr->add_option("--out", pr_a.out, "Predictions output path");
    pr->add_option("--level", pr_a.level, "Interval level for std_err (select-ridge models)")->check(CLI::Range(0.5, 0.999999));
    pr->add_option("--manifest", pr_a.manifest, "Manifest path (default <out>.manifest.json)");

    EvaluateArgs ev_a;
    auto* ev = app.add_subcommand("evaluate", "Compare estimators on simulated panels");
    ev->add_option("--methods", ev_a.methods, "Comma-separated: synthcombo, lasso, softimpute");
    ev->add_option("--preset", ev_a.preset, "Observation pattern")
        ->check(CLI::IsMember({"observational", "confounded", "design", "uniform"}));
    ev->add_option("--p", ev_a.ps, "Comma-separated dimensions");
    add_sim_flags(ev, ev_a.sim);
    ev->add_option("--horizontal", ev_a.horizontal, "Horizontal method for synthcombo")
        ->check(CLI::IsMember({"lasso", "cart", "select-ridge"}));
    ev->add_option("--seeds", ev_a.seeds, "Replicates per dimension")->check(CLI::PositiveNumber);
    ev->add_option("--out", ev_a.out, "CSV of method,p,seed,mse");
    ev->add_option("--manifest", ev_a.manifest, "Manifest path (default <out>.manifest.json)");

    CheckArgs ck_a;
    auto* ck = app.add_subcommand("check", "Check a plan against a ground truth");
    ck->add_option("--plan", ck_a.plan, "Plan JSON")->required();
    ck->add_option("--truth", ck_a.truth, "Truth JSON")->required();
    ck->add_option("--mode", ck_a.mode, "Incoherence computation: exact or monte-carlo")
        ->check(CLI::IsMember({"exact", "monte-carlo"}));
    ck->add_option("--c-prime", ck_a.opts.c_prime, "Incoherence constant")->check(CLI::PositiveNumber);
    ck->add_option("--min-ratio", ck_a.opts.min_ratio, "Smallest acceptable s_r / s_1")->check(CLI::Range(0.0, 1.0));
    ck->add_option("--out", ck_a.out, "Report output path");
    ck->add_option("--manifest", ck_a.manifest, "Manifest path (default <out>.manifest.json)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == static_cast<int>(CLI::ExitCodes::Success) ? 0 : kExitUsage;
    }

    try {
        if (sim->parsed()) return run_simulate(sim, sim_a, seed);
        if (des->parsed()) return run_design(des, des_a, seed);
        if (fitc->parsed()) {
            if (fit_a.input.empty() == fit_a.rankings.empty()) {
                std::cerr << "fit: exactly one of --input or --rankings is required\n";
                return kExitUsage;
            }
            return run_fit(fitc, fit_a, seed, g);
        }
        if (pr->parsed()) return run_predict(pr, pr_a, seed);
        if (ev->parsed()) return run_evaluate(ev, ev_a, seed, g);
        if (ck->parsed()) return run_check(ck, ck_a, seed);
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
