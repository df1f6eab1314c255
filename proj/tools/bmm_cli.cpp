// Command line front end: thin argument parsing over bmm::run().

#include <cstdlib>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bmm/bmm.hpp"

namespace {

/// Parses a candidate token: "5" means K=L=5, "3x4" means K=3, L=4.
std::pair<std::size_t, std::size_t> parse_candidate(const std::string& token) {
    const auto x = token.find('x');
    try {
        if (x == std::string::npos) {
            const std::size_t k = std::stoul(token);
            return {k, k};
        }
        return {std::stoul(token.substr(0, x)), std::stoul(token.substr(x + 1))};
    } catch (const std::exception&) {
        throw CLI::ValidationError("candidates", "bad candidate '" + token + "' (use K or KxL)");
    }
}

void add_source_options(CLI::App* cmd, bmm::ExperimentSpec& spec) {
    cmd->add_option("--data", spec.data_path, "ratings file (user item rating [timestamp] per line)");
    cmd->add_option("--scenario", spec.scenario_path, "scenario description file");
    cmd->add_option("--builtin", spec.builtin_k, "bundled scenario size (5, 7, or 9)");
    cmd->add_option("--eta", spec.eta, "observation probability override");
    cmd->add_option("--outlier-rate", spec.outlier_rate, "outlier flip rate override");
    cmd->add_option("--sim-seed", spec.sim_seed, "scenario generation seed override");
    cmd->add_option("--train-fraction", spec.train_fraction, "training share for file-backed runs");
    cmd->add_option("--split-seed", spec.split_seed, "train/hidden split seed (also the fold seed for cv)");
}

void add_engine_options(CLI::App* cmd, bmm::ExperimentSpec& spec, std::string& init_name) {
    cmd->add_option("--max-iters", spec.max_iters, "iteration cap");
    cmd->add_option("--rel-tol", spec.rel_tol, "relative change threshold for convergence");
    cmd->add_option("--seed", spec.fit_seed, "variational initialization seed");
    cmd->add_option("--init", init_name, "initialization: jitter or dirichlet")
        ->check(CLI::IsMember({"jitter", "dirichlet"}));
    cmd->add_option("--jitter", spec.engine.jitter_scale, "jitter half-width for the default init");
    cmd->add_option("--floor", spec.engine.min_prob_floor, "probability floor for responsibilities");
    cmd->add_option("--check-every", spec.engine.elbo_check_every, "iterations between objective checks");
}

void apply_init(bmm::ExperimentSpec& spec, const std::string& init_name) {
    spec.engine.init_strategy = init_name == "dirichlet"
                                    ? bmm::EngineOptions::Init::random_dirichlet
                                    : bmm::EngineOptions::Init::uniform_jitter;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bmm: bipartite mixed-membership rating model"};
    app.require_subcommand(1);

    bmm::ExperimentSpec spec;
    std::string init_name = "dirichlet";
    std::string candidates_arg;
    std::string fallback_name = "user";

    auto* fit = app.add_subcommand("fit", "fit the model and report held-out accuracy");
    add_source_options(fit, spec);
    fit->add_option("--K", spec.K, "user cluster count");
    fit->add_option("--L", spec.L, "item cluster count");
    fit->add_flag("--informative", spec.informative_prior, "use the scenario's true proportions as priors");
    add_engine_options(fit, spec, init_name);
    fit->add_option("--out", spec.out_dir, "output directory");
    fit->add_flag("--export-graph", spec.export_graph, "also write the training bipartite graph");

    auto* predict = app.add_subcommand("predict", "predict ratings from a stored model");
    predict->add_option("--model", spec.model_dir, "directory written by fit")->required();
    predict->add_option("--pairs", spec.pairs_path, "file of 'user item' lines")->required();
    predict->add_option("--out", spec.out_dir, "output directory");

    auto* simulate = app.add_subcommand("simulate", "generate a synthetic rating dataset");
    add_source_options(simulate, spec);
    simulate->add_option("--out", spec.out_dir, "output directory");
    simulate->add_flag("--export-graph", spec.export_graph, "also write the observed bipartite graph");

    auto* cv = app.add_subcommand("cv", "select cluster counts by cross-validated accuracy");
    add_source_options(cv, spec);
    cv->add_option("--folds", spec.n_folds, "fold count");
    cv->add_option("--candidates", candidates_arg, "comma list of K or KxL candidates")->required();
    add_engine_options(cv, spec, init_name);
    cv->add_option("--out", spec.out_dir, "output directory");

    auto* baseline = app.add_subcommand("baseline", "evaluate a classical predictor on the held-out set");
    add_source_options(baseline, spec);
    baseline->add_option("--method", spec.baseline_method, "naive, user, item, or pmf")
        ->check(CLI::IsMember({"naive", "user", "item", "pmf"}));
    baseline->add_option("--k-neighbors", spec.neighbor.k_neighbors, "neighbor cap (0 = all)");
    baseline->add_option("--min-overlap", spec.neighbor.min_overlap, "co-rating count required for a similarity");
    baseline->add_option("--fallback", fallback_name, "neighbor fallback: user or global")
        ->check(CLI::IsMember({"user", "global"}));
    baseline->add_option("--rank", spec.pmf.rank, "pmf factor count");
    baseline->add_option("--lambda", spec.pmf.lambda, "pmf regularization weight");
    baseline->add_option("--learning-rate", spec.pmf.learning_rate, "pmf step size");
    baseline->add_option("--epochs", spec.pmf.max_epochs, "pmf epoch cap");
    baseline->add_option("--pmf-seed", spec.pmf.seed, "pmf initialization seed");
    baseline->add_flag("--round", spec.round_predictions, "round predictions to the rating scale");
    baseline->add_option("--out", spec.out_dir, "output directory");

    auto* bench = app.add_subcommand("bench", "time coordinate ascent at two observation densities");
    add_source_options(bench, spec);
    bench->add_option("--K", spec.K, "user cluster count");
    bench->add_option("--L", spec.L, "item cluster count");
    bench->add_option("--iters", spec.bench_iters, "timed iterations per run");
    bench->add_option("--seed", spec.fit_seed, "variational initialization seed");
    bench->add_option("--out", spec.out_dir, "output directory");

    CLI11_PARSE(app, argc, argv);

    apply_init(spec, init_name);
    spec.neighbor.fallback = fallback_name == "global" ? bmm::NeighborConfig::Fallback::global_mean
                                                       : bmm::NeighborConfig::Fallback::user_mean;
    if (!candidates_arg.empty()) {
        std::size_t start = 0;
        while (start <= candidates_arg.size()) {
            const auto comma = candidates_arg.find(',', start);
            const std::string token = candidates_arg.substr(
                start, comma == std::string::npos ? std::string::npos : comma - start);
            if (!token.empty()) {
                try {
                    spec.candidates.push_back(parse_candidate(token));
                } catch (const CLI::ValidationError& e) {
                    std::cerr << "error: " << e.what() << '\n';
                    return 2;
                }
            }
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
    }

    if (fit->parsed()) spec.command = bmm::ExperimentSpec::Command::fit;
    else if (predict->parsed()) spec.command = bmm::ExperimentSpec::Command::predict;
    else if (simulate->parsed()) spec.command = bmm::ExperimentSpec::Command::simulate;
    else if (cv->parsed()) spec.command = bmm::ExperimentSpec::Command::cv;
    else if (baseline->parsed()) spec.command = bmm::ExperimentSpec::Command::baseline;
    else spec.command = bmm::ExperimentSpec::Command::bench;

    try {
        bmm::run(spec);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
