#pragma once

// End-to-end experiment driver behind the command line tool: resolves a
// data source, runs the requested command, and writes its artifacts into
// an output directory.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "baselines.hpp"
#include "core.hpp"
#include "engine.hpp"
#include "io.hpp"
#include "math.hpp"
#include "model_selection.hpp"
#include "predict.hpp"
#include "simulate.hpp"

namespace bmm {

struct ExperimentSpec {
    enum class Command { fit, predict, simulate, cv, baseline, bench };

    Command command = Command::fit;

    // Data source: exactly one of data_path, scenario_path, builtin_k.
    std::string data_path;      // ratings file in loader format
    std::string scenario_path;  // plain-text scenario description
    std::size_t builtin_k = 0;  // bundled scenario size (5, 7, or 9)

    // Scenario overrides (applied to builtin or loaded scenarios).
    std::optional<double> eta;
    std::optional<double> outlier_rate;
    std::optional<std::uint64_t> sim_seed;

    // Splitting for file-backed fit/baseline runs.
    double train_fraction = 0.2;
    std::uint64_t split_seed = 0;

    // Model and engine controls.
    std::size_t K = 5;
    std::size_t L = 5;
    bool informative_prior = false;  // scenario runs: use the true proportions
    std::size_t max_iters = 500;
    double rel_tol = 1e-6;
    std::uint64_t fit_seed = 0;
    EngineOptions engine;

    // Baseline controls.
    std::string baseline_method = "naive";  // naive | user | item | pmf
    NeighborConfig neighbor;
    PmfConfig pmf;
    bool round_predictions = false;

    // Cross-validation controls.
    std::size_t n_folds = 5;
    std::vector<std::pair<std::size_t, std::size_t>> candidates;

    // Prediction from a stored model.
    std::string model_dir;
    std::string pairs_path;  // lines of "user item"

    // Benchmark controls.
    std::size_t bench_iters = 30;

    // Output.
    std::string out_dir = ".";
    bool export_graph = false;
};

namespace detail {

struct ResolvedData {
    RatingDataset train;
    std::optional<RatingDataset> hidden;
    std::vector<std::int64_t> user_ids;  // empty for scenario data
    std::vector<std::int64_t> item_ids;
    std::optional<SimScenario> scenario;
    std::vector<std::string> warnings;
};

inline SimScenario resolve_scenario(const ExperimentSpec& spec) {
    SimScenario sc = [&] {
        if (!spec.scenario_path.empty()) {
            std::ifstream is(spec.scenario_path);
            if (!is) throw std::runtime_error("cannot open scenario '" + spec.scenario_path + "'");
            return scenario_from_text(is);
        }
        return builtin_scenario(spec.builtin_k);
    }();
    if (spec.eta) sc.eta = *spec.eta;
    if (spec.outlier_rate) sc.outlier_rate = *spec.outlier_rate;
    if (spec.sim_seed) sc.seed = *spec.sim_seed;
    sc.validate();
    return sc;
}

/// Loads a ratings file and splits it, or generates a scenario whose
/// observed part is the training set and hidden part the evaluation set.
inline ResolvedData resolve_data(const ExperimentSpec& spec) {
    const int sources = (!spec.data_path.empty() ? 1 : 0) +
                        (!spec.scenario_path.empty() ? 1 : 0) +
                        (spec.builtin_k != 0 ? 1 : 0);
    if (sources != 1)
        throw std::invalid_argument("exactly one data source required (ratings file, scenario file, or builtin scenario)");
    if (!spec.data_path.empty()) {
        LoadedRatings loaded = load_movielens(spec.data_path);
        auto [train, hidden] = split_train_hidden(loaded.data, spec.train_fraction, spec.split_seed);
        return ResolvedData{std::move(train), std::move(hidden),
                            std::move(loaded.user_ids), std::move(loaded.item_ids),
                            std::nullopt, std::move(loaded.warnings)};
    }
    SimScenario sc = resolve_scenario(spec);
    SimOutput sim = generate(sc);
    return ResolvedData{std::move(sim.observed), std::move(sim.hidden), {}, {}, std::move(sc), {}};
}

inline ModelConfig model_config_for(const ExperimentSpec& spec, const ResolvedData& data) {
    ModelConfig config = ModelConfig::uniform(spec.K, spec.L);
    if (spec.informative_prior) {
        if (!data.scenario)
            throw std::invalid_argument("informative prior requires a scenario data source");
        if (data.scenario->K != spec.K || data.scenario->L != spec.L)
            throw std::invalid_argument("informative prior requires K and L to match the scenario");
        config.alpha = data.scenario->alpha;
        config.beta = data.scenario->beta;
    }
    config.max_iters = spec.max_iters;
    config.rel_tol = spec.rel_tol;
    config.seed = spec.fit_seed;
    return config;
}

inline std::filesystem::path prepare_out_dir(const ExperimentSpec& spec) {
    std::filesystem::path dir(spec.out_dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline void write_model_artifacts(const std::filesystem::path& dir, const FitResult& fitted,
                                  const RatingDataset& train, const EngineOptions& engine) {
    const auto est = estimate_memberships(fitted.state);
    write_file_with(dir / "mu.txt", [&](std::ostream& os) { write_block_array(os, fitted.mu); });
    write_file_with(dir / "pi_u.txt", [&](std::ostream& os) { write_matrix(os, est.user_weights); });
    write_file_with(dir / "pi_i.txt", [&](std::ostream& os) { write_matrix(os, est.item_weights); });
    write_file_with(dir / "scale.txt", [&](std::ostream& os) {
        Matrix m(1, train.scale().size());
        for (std::size_t s = 0; s < train.scale().size(); ++s) m(0, s) = train.scale().value(s);
        write_matrix(os, m);
    });
    write_text_file(dir / "elbo_trace.csv", elbo_trace_to_csv(fitted.elbo_trace, engine.elbo_check_every));

    const auto user_assign = hard_assignments(est.user_weights);
    const auto item_assign = hard_assignments(est.item_weights);
    std::string summary = cluster_summary_to_text(
        cluster_summary(train, user_assign, est.user_weights.cols(), true), "user");
    summary += "\n";
    summary += cluster_summary_to_text(
        cluster_summary(train, item_assign, est.item_weights.cols(), false), "item");
    write_text_file(dir / "cluster_summary.txt", summary);
}

inline void run_fit(const ExperimentSpec& spec) {
    ResolvedData data = resolve_data(spec);
    const auto dir = prepare_out_dir(spec);
    const ModelConfig config = model_config_for(spec, data);
    const FitResult fitted = fit(data.train, config, spec.engine);
    write_model_artifacts(dir, fitted, data.train, spec.engine);

    std::vector<std::pair<std::string, EvalReport>> rows;
    if (data.hidden && data.hidden->size() > 0) {
        const auto est = estimate_memberships(fitted.state);
        const auto truth = to_rated_pairs(*data.hidden);
        const auto preds = predict_many(est, fitted.mu, data.train.scale(), truth);
        rows.emplace_back("model", evaluate(preds, truth));
    }
    std::ostringstream summary;
    summary << "fit: " << data.train.size() << " training ratings, "
            << data.train.n_users() << " users, " << data.train.n_items() << " items\n"
            << "K=" << spec.K << " L=" << spec.L
            << " iterations=" << fitted.iterations
            << " converged=" << (fitted.converged ? "yes" : "no") << '\n';
    if (!fitted.elbo_trace.empty()) {
        summary << "final elbo=";
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", fitted.elbo_trace.back());
        summary << buf << '\n';
    }
    for (const std::string& w : data.warnings) summary << "warning: " << w << '\n';
    if (!rows.empty()) {
        summary << '\n' << metrics_to_text(rows);
        write_text_file(dir / "metrics.csv", metrics_to_csv(rows));
    }
    write_text_file(dir / "summary.txt", summary.str());
    if (spec.export_graph)
        write_file_with(dir / "graph.edges", [&](std::ostream& os) {
            write_edge_list(os, data.train, data.user_ids, data.item_ids);
        });
    std::cout << summary.str();
}

inline void run_predict(const ExperimentSpec& spec) {
    if (spec.model_dir.empty() || spec.pairs_path.empty())
        throw std::invalid_argument("predict requires a model directory and a pairs file");
    const std::filesystem::path model(spec.model_dir);
    auto read_from = [&](const char* name, auto reader) {
        std::ifstream is(model / name);
        if (!is) throw std::runtime_error("cannot open '" + (model / name).string() + "'");
        return reader(is, (model / name).string());
    };
    const BlockArray mu = read_from("mu.txt", [](std::istream& is, const std::string& o) { return read_block_array(is, o); });
    MembershipEstimates est;
    est.user_weights = read_from("pi_u.txt", [](std::istream& is, const std::string& o) { return read_matrix(is, o); });
    est.item_weights = read_from("pi_i.txt", [](std::istream& is, const std::string& o) { return read_matrix(is, o); });
    const Matrix scale_row = read_from("scale.txt", [](std::istream& is, const std::string& o) { return read_matrix(is, o); });
    std::vector<double> scale_values(scale_row.row(0).begin(), scale_row.row(0).end());
    const RatingScale scale(std::move(scale_values));

    std::ifstream pairs(spec.pairs_path);
    if (!pairs) throw std::runtime_error("cannot open pairs file '" + spec.pairs_path + "'");
    const auto dir = prepare_out_dir(spec);
    std::ofstream out(dir / "predictions.tsv");
    if (!out) throw std::runtime_error("cannot open predictions output");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(pairs, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::size_t user, item;
        if (!(ls >> user >> item))
            throw std::runtime_error(spec.pairs_path + ":" + std::to_string(line_no) + ": expected 'user item'");
        out << user << '\t' << item << '\t' << predict(est, mu, scale, user, item) << '\n';
    }
    if (!out) throw std::runtime_error("failed writing predictions");
}

inline void run_simulate(const ExperimentSpec& spec) {
    const SimScenario sc = resolve_scenario(spec);
    const SimOutput sim = generate(sc);
    const auto dir = prepare_out_dir(spec);
    write_file_with(dir / "observed.data", [&](std::ostream& os) { write_ratings(os, sim.observed); });
    write_file_with(dir / "hidden.data", [&](std::ostream& os) { write_ratings(os, sim.hidden); });
    write_file_with(dir / "scenario.txt", [&](std::ostream& os) { scenario_to_text(sc, os); });
    write_file_with(dir / "user_clusters.txt", [&](std::ostream& os) {
        for (std::size_t i = 0; i < sim.user_cluster.size(); ++i)
            os << i << '\t' << (sim.user_cluster[i] + 1) << '\n';
    });
    write_file_with(dir / "item_clusters.txt", [&](std::ostream& os) {
        for (std::size_t j = 0; j < sim.item_cluster.size(); ++j)
            os << j << '\t' << (sim.item_cluster[j] + 1) << '\n';
    });
    std::ostringstream report;
    report << "observed=" << sim.observed.size() << " hidden=" << sim.hidden.size() << '\n'
           << "high outliers: flipped " << sim.outliers.high_flipped << " of "
           << sim.outliers.high_eligible << " eligible\n"
           << "low outliers: flipped " << sim.outliers.low_flipped << " of "
           << sim.outliers.low_eligible << " eligible\n";
    write_text_file(dir / "generation.txt", report.str());
    if (spec.export_graph)
        write_file_with(dir / "graph.edges", [&](std::ostream& os) { write_edge_list(os, sim.observed); });
    std::cout << report.str();
}

inline void run_cv(const ExperimentSpec& spec) {
    ResolvedData data = resolve_data(spec);
    CvPlan plan;
    plan.n_folds = spec.n_folds;
    plan.seed = spec.split_seed;
    plan.candidates = spec.candidates;
    if (plan.candidates.empty())
        throw std::invalid_argument("cv requires at least one candidate (K, L)");
    ModelConfig tmpl;
    tmpl.max_iters = spec.max_iters;
    tmpl.rel_tol = spec.rel_tol;
    const CvResult result = cross_validate(data.train, plan, tmpl, spec.engine);
    const auto dir = prepare_out_dir(spec);
    write_text_file(dir / "cv.csv", cv_to_csv(result));
    const auto [K, L] = result.selected_candidate();
    std::ostringstream os;
    os << "selected K=" << K << " L=" << L << '\n';
    write_text_file(dir / "selection.txt", os.str());
    std::cout << cv_to_csv(result) << os.str();
}

inline void run_baseline(const ExperimentSpec& spec) {
    ResolvedData data = resolve_data(spec);
    if (!data.hidden || data.hidden->size() == 0)
        throw std::invalid_argument("baseline evaluation needs a hidden rating set");
    const BaselineContext ctx(data.train);
    const auto truth = to_rated_pairs(*data.hidden);

    std::optional<PmfModel> pmf_model;
    if (spec.baseline_method == "pmf") pmf_model = pmf_fit(data.train, spec.pmf);

    std::vector<RatedPair> preds;
    preds.reserve(truth.size());
    for (const RatedPair& t : truth) {
        double v;
        if (spec.baseline_method == "naive") v = ctx.clip(naive_predict(ctx, t.user));
        else if (spec.baseline_method == "user") v = user_based_predict(ctx, t.user, t.item, spec.neighbor);
        else if (spec.baseline_method == "item") v = item_based_predict(ctx, t.user, t.item, spec.neighbor);
        else if (spec.baseline_method == "pmf") v = pmf_predict(*pmf_model, t.user, t.item);
        else throw std::invalid_argument("unknown baseline method '" + spec.baseline_method + "'");
        if (spec.round_predictions) v = round_to_scale(data.train.scale(), v);
        preds.push_back({t.user, t.item, v});
    }
    std::vector<std::pair<std::string, EvalReport>> rows;
    rows.emplace_back(spec.baseline_method, evaluate(preds, truth));
    // Exact-hit rate is only meaningful for predictions on the rating scale.
    if (!spec.round_predictions) rows.back().second.ar = std::numeric_limits<double>::quiet_NaN();
    const auto dir = prepare_out_dir(spec);
    write_text_file(dir / "metrics.csv", metrics_to_csv(rows));
    write_text_file(dir / "summary.txt", metrics_to_text(rows));
    std::cout << metrics_to_text(rows);
}

inline void run_bench(const ExperimentSpec& spec);

}  // namespace detail

/// Executes one experiment; throws on any configuration or I/O problem.
inline void run(const ExperimentSpec& spec) {
    switch (spec.command) {
        case ExperimentSpec::Command::fit: detail::run_fit(spec); break;
        case ExperimentSpec::Command::predict: detail::run_predict(spec); break;
        case ExperimentSpec::Command::simulate: detail::run_simulate(spec); break;
        case ExperimentSpec::Command::cv: detail::run_cv(spec); break;
        case ExperimentSpec::Command::baseline: detail::run_baseline(spec); break;
        case ExperimentSpec::Command::bench: detail::run_bench(spec); break;
    }
}

namespace detail {

/// Per-iteration wall time of the coordinate ascent at two observation
/// densities (eta and 2 * eta), reported as a CSV and a ratio. Linear
/// scaling in the observed rating count shows as a ratio near 2.
inline void run_bench(const ExperimentSpec& spec) {
    SimScenario sc = resolve_scenario(spec);
    const auto dir = prepare_out_dir(spec);
    std::ostringstream csv;
    csv << "eta,ratings,iterations,seconds_per_iteration\n";
    double seconds[2] = {0.0, 0.0};
    std::size_t counts[2] = {0, 0};
    for (int step = 0; step < 2; ++step) {
        SimScenario run_sc = sc;
        run_sc.eta = step == 0 ? sc.eta : 2.0 * sc.eta;
        if (run_sc.eta > 1.0) throw std::invalid_argument("bench: 2 * eta exceeds 1");
        const SimOutput sim = generate(run_sc);
        ModelConfig config = ModelConfig::uniform(spec.K, spec.L);
        config.max_iters = spec.bench_iters;
        config.rel_tol = 0.0;  // run the full iteration budget
        config.seed = spec.fit_seed;
        EngineOptions opts = spec.engine;
        opts.elbo_check_every = spec.bench_iters;  // keep the loop itself hot
        const auto t0 = std::chrono::steady_clock::now();
        const FitResult fitted = fit(sim.observed, config, opts);
        const auto t1 = std::chrono::steady_clock::now();
        seconds[step] = std::chrono::duration<double>(t1 - t0).count() /
                        static_cast<double>(fitted.iterations);
        counts[step] = sim.observed.size();
        csv << run_sc.eta << ',' << counts[step] << ',' << fitted.iterations << ','
            << seconds[step] << '\n';
    }
    csv << "# ratio " << (seconds[1] / seconds[0]) << '\n';
    write_text_file(dir / "bench.csv", csv.str());
    std::cout << csv.str();
}

}  // namespace detail

}  // namespace bmm
