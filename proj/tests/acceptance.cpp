// Acceptance suite: one test case per release criterion, each printing a
// single "ACCEPTANCE Cn <label>: PASS|FAIL" line. Tolerance bands around
// reference numbers are fixed here and never derived from runs.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "bmm/bmm.hpp"
#include "oracles.hpp"

using Catch::Approx;

namespace {

void report(int n, const char* label, bool ok) {
    std::printf("ACCEPTANCE C%d %s: %s\n", n, label, ok ? "PASS" : "FAIL");
    std::fflush(stdout);
}

bool trace_is_monotone(const std::vector<double>& trace) {
    for (std::size_t i = 1; i < trace.size(); ++i) {
        const double prev = trace[i - 1];
        if (trace[i] < prev - 1e-8 * std::max(1.0, std::abs(prev))) return false;
    }
    return true;
}

bmm::EvalReport fit_and_score(const bmm::RatingDataset& train, const bmm::RatingDataset& hidden,
                              const bmm::ModelConfig& config) {
    const auto fitted = bmm::fit(train, config);
    const auto est = bmm::estimate_memberships(fitted.state);
    const auto truth = bmm::to_rated_pairs(hidden);
    const auto preds = bmm::predict_many(est, fitted.mu, train.scale(), truth);
    return bmm::evaluate(preds, truth);
}

}  // namespace

TEST_CASE("objective is non-decreasing across coordinate updates", "[c1]") {
    bool ok = true;

    // Many small random problems, alternating both initialization modes.
    std::mt19937_64 rng(101);
    for (int t = 0; t < 50 && ok; ++t) {
        auto inst = oracle::random_instance(rng, 20, 20, 3, 3, 5);
        inst.config.max_iters = 60;
        inst.config.rel_tol = 0.0;
        bmm::EngineOptions opts;
        opts.init_strategy = t % 2 == 0 ? bmm::EngineOptions::Init::uniform_jitter
                                        : bmm::EngineOptions::Init::random_dirichlet;
        const auto fitted = bmm::fit(inst.data, inst.config, opts);
        if (!trace_is_monotone(fitted.elbo_trace)) {
            ok = false;
            std::printf("  monotonicity broke on random instance %d\n", t);
        }
    }

    // One full-size synthetic problem.
    auto sc = bmm::builtin_scenario(5);
    sc.seed = 11;
    const auto sim = bmm::generate(sc);
    bmm::ModelConfig config = bmm::ModelConfig::uniform(5, 5);
    config.max_iters = 120;
    config.rel_tol = 0.0;
    config.seed = 1;
    const auto fitted = bmm::fit(sim.observed, config);
    if (!trace_is_monotone(fitted.elbo_trace)) {
        ok = false;
        std::printf("  monotonicity broke on the bundled scenario\n");
    }

    report(1, "objective never decreases during fitting", ok);
    REQUIRE(ok);
}

TEST_CASE("updates match independent reference evaluations", "[c2]") {
    bool ok = true;
    std::mt19937_64 rng(202);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    auto perturbation_decreases = [&](const bmm::RatingDataset& data,
                                      const bmm::ModelConfig& config,
                                      bmm::VariationalState state, bmm::BlockArray mu,
                                      int block) {
        const double base = oracle::elbo_reference(data, state, mu, config);
        const double slack = 1e-9 * std::max(1.0, std::abs(base));
        for (int trial = 0; trial < 20; ++trial) {
            bmm::VariationalState s = state;
            bmm::BlockArray m = mu;
            const double eps = trial % 2 == 0 ? 1e-2 : 1e-3;
            auto mix_row = [&](std::span<double> row) {
                double total = 0.0;
                std::vector<double> noise(row.size());
                for (double& v : noise) {
                    v = unit(rng) + 1e-3;
                    total += v;
                }
                double after = 0.0;
                for (std::size_t c = 0; c < row.size(); ++c) {
                    row[c] = (1.0 - eps) * row[c] + eps * noise[c] / total;
                    after += row[c];
                }
                for (std::size_t c = 0; c < row.size(); ++c) row[c] /= after;
            };
            if (block == 0) {
                for (std::size_t r = 0; r < s.phi_u.rows(); ++r) mix_row(s.phi_u.row(r));
            } else if (block == 1) {
                for (std::size_t r = 0; r < s.phi_i.rows(); ++r) mix_row(s.phi_i.row(r));
            } else if (block == 2) {
                for (std::size_t i = 0; i < s.gamma_u.rows(); ++i)
                    for (std::size_t k = 0; k < s.gamma_u.cols(); ++k)
                        s.gamma_u(i, k) *= 1.0 + eps * (2.0 * unit(rng) - 1.0);
                for (std::size_t j = 0; j < s.gamma_i.rows(); ++j)
                    for (std::size_t l = 0; l < s.gamma_i.cols(); ++l)
                        s.gamma_i(j, l) *= 1.0 + eps * (2.0 * unit(rng) - 1.0);
            } else {
                for (std::size_t k = 0; k < m.K(); ++k)
                    for (std::size_t l = 0; l < m.L(); ++l) mix_row(m.row(k, l));
            }
            const double moved = oracle::elbo_reference(data, s, m, config);
            if (moved > base + slack) return false;
        }
        return true;
    };

    for (int t = 0; t < 20 && ok; ++t) {
        auto inst = oracle::random_instance(rng, 4, 4, 3, 3, 3, 0.35);
        bmm::VariationalState state;
        bmm::BlockArray mu(1, 1, 1);
        oracle::randomize_state(rng, inst.data, inst.config, state, mu);

        // Engine objective against the literal reference.
        const double engine_elbo = bmm::elbo(inst.data, state, mu, inst.config);
        const double ref_elbo = oracle::elbo_reference(inst.data, state, mu, inst.config);
        if (std::abs(engine_elbo - ref_elbo) >
            1e-9 * std::max(1.0, std::abs(ref_elbo))) {
            ok = false;
            std::printf("  objective mismatch: engine %.12g reference %.12g\n", engine_elbo,
                        ref_elbo);
            break;
        }

        // User-side responsibilities against direct evaluation.
        bmm::update_phi_u(inst.data, state, mu);
        for (std::size_t r = 0; r < inst.data.size() && ok; ++r) {
            const auto& rat = inst.data.ratings()[r];
            const auto ref = oracle::phi_u_row(state.gamma_u.row(rat.user), state.phi_i.row(r),
                                               mu, rat.level);
            for (std::size_t k = 0; k < ref.size(); ++k)
                if (std::abs(state.phi_u(r, k) - ref[k]) > 1e-10) {
                    ok = false;
                    std::printf("  user responsibility mismatch at rating %zu\n", r);
                    break;
                }
        }
        if (ok && !perturbation_decreases(inst.data, inst.config, state, mu, 0)) {
            ok = false;
            std::printf("  user responsibilities are not a coordinate maximum\n");
        }

        // Item-side responsibilities, which see the refreshed user side.
        bmm::update_phi_i(inst.data, state, mu);
        for (std::size_t r = 0; r < inst.data.size() && ok; ++r) {
            const auto& rat = inst.data.ratings()[r];
            const auto ref = oracle::phi_i_row(state.gamma_i.row(rat.item), state.phi_u.row(r),
                                               mu, rat.level);
            for (std::size_t l = 0; l < ref.size(); ++l)
                if (std::abs(state.phi_i(r, l) - ref[l]) > 1e-10) {
                    ok = false;
                    std::printf("  item responsibility mismatch at rating %zu\n", r);
                    break;
                }
        }
        if (ok && !perturbation_decreases(inst.data, inst.config, state, mu, 1)) {
            ok = false;
            std::printf("  item responsibilities are not a coordinate maximum\n");
        }

        // Variational Dirichlet parameters: prior plus responsibility mass.
        bmm::update_gamma(inst.data, state, inst.config);
        for (std::size_t i = 0; i < inst.data.n_users() && ok; ++i)
            for (std::size_t k = 0; k < inst.config.K; ++k) {
                long double expect = inst.config.alpha[k];
                for (std::size_t r = 0; r < inst.data.size(); ++r)
                    if (inst.data.ratings()[r].user == i) expect += state.phi_u(r, k);
                if (std::abs(state.gamma_u(i, k) - static_cast<double>(expect)) > 1e-12) {
                    ok = false;
                    std::printf("  gamma mismatch at user %zu\n", i);
                    break;
                }
            }
        if (ok && !perturbation_decreases(inst.data, inst.config, state, mu, 2)) {
            ok = false;
            std::printf("  gamma is not a coordinate maximum\n");
        }

        // Rating table: closed-form cell check plus grid search on two-level rows.
        bmm::update_mu(inst.data, state, mu);
        const std::size_t S = inst.data.scale().size();
        for (std::size_t k = 0; k < inst.config.K && ok; ++k)
            for (std::size_t l = 0; l < inst.config.L && ok; ++l) {
                std::vector<double> w(S, 0.0);
                long double total = 0.0L;
                for (std::size_t r = 0; r < inst.data.size(); ++r) {
                    const double m = state.phi_u(r, k) * state.phi_i(r, l);
                    w[inst.data.ratings()[r].level] += m;
                    total += m;
                }
                if (total < 1e-8) continue;  // uniform fallback cells
                for (std::size_t s = 0; s < S; ++s)
                    if (std::abs(mu(k, l, s) - w[s] / static_cast<double>(total)) > 1e-12) {
                        ok = false;
                        std::printf("  rating table mismatch in cell (%zu, %zu)\n", k, l);
                        break;
                    }
                if (ok && S == 2 && w[0] > 0.0 && w[1] > 0.0) {
                    const double grid = oracle::best_first_prob_grid(w[0], w[1], 5e-4);
                    if (std::abs(mu(k, l, 0) - grid) > 1e-3) {
                        ok = false;
                        std::printf("  grid search disagrees in cell (%zu, %zu)\n", k, l);
                    }
                    const double probs_impl[2] = {mu(k, l, 0), mu(k, l, 1)};
                    const double probs_grid[2] = {grid, 1.0 - grid};
                    if (oracle::row_objective(w, probs_impl) <
                        oracle::row_objective(w, probs_grid) - 1e-12) {
                        ok = false;
                        std::printf("  grid search beat the closed form in cell (%zu, %zu)\n", k,
                                    l);
                    }
                }
            }
        if (ok && !perturbation_decreases(inst.data, inst.config, state, mu, 3)) {
            ok = false;
            std::printf("  rating table is not a coordinate maximum\n");
        }
    }

    report(2, "each update matches its reference evaluation", ok);
    REQUIRE(ok);
}

TEST_CASE("synthetic benchmark accuracy sits in the reference band", "[c3]") {
    const int reps = 30;
    std::vector<bmm::EvalReport> reports;
    for (int rep = 0; rep < reps; ++rep) {
        auto sc = bmm::builtin_scenario(5);
        sc.eta = 0.2;
        sc.seed = bmm::derive_seed(1000, static_cast<std::uint64_t>(rep));
        const auto sim = bmm::generate(sc);
        bmm::ModelConfig config = bmm::ModelConfig::uniform(5, 5);
        config.max_iters = 500;
        config.rel_tol = 1e-6;
        config.seed = bmm::derive_seed(2000, static_cast<std::uint64_t>(rep));
        reports.push_back(fit_and_score(sim.observed, sim.hidden, config));
    }
    const auto stats = bmm::aggregate(reports);
    std::printf("  mean over %d runs: mae %.4f (se %.4f), mse %.4f (se %.4f), ar %.4f (se %.4f)\n",
                reps, stats.mae_mean, stats.mae_se, stats.mse_mean, stats.mse_se, stats.ar_mean,
                stats.ar_se);
    const bool mae_ok = std::abs(stats.mae_mean - 0.7994) <= 0.06;
    const bool mse_ok = std::abs(stats.mse_mean - 1.2807) <= 0.17;
    const bool ar_ok = std::abs(stats.ar_mean - 0.4012) <= 0.03;
    const bool ok = mae_ok && mse_ok && ar_ok;
    report(3, "synthetic five-cluster accuracy matches the reference numbers", ok);
    REQUIRE(ok);
}

TEST_CASE("knowing the true proportions never hurts on average", "[c4]") {
    const int reps = 30;
    double non_informative = 0.0, informative = 0.0;
    for (int rep = 0; rep < reps; ++rep) {
        auto sc = bmm::builtin_scenario(5);
        sc.eta = 0.2;
        sc.seed = bmm::derive_seed(3000, static_cast<std::uint64_t>(rep));
        const auto sim = bmm::generate(sc);

        bmm::ModelConfig flat = bmm::ModelConfig::uniform(5, 5);
        flat.max_iters = 500;
        flat.rel_tol = 1e-6;
        flat.seed = bmm::derive_seed(3500, static_cast<std::uint64_t>(rep));
        bmm::ModelConfig informed = flat;
        informed.alpha = sc.alpha;
        informed.beta = sc.beta;

        non_informative += fit_and_score(sim.observed, sim.hidden, flat).mae;
        informative += fit_and_score(sim.observed, sim.hidden, informed).mae;
    }
    non_informative /= reps;
    informative /= reps;
    std::printf("  paired means over %d runs: informative %.4f vs flat %.4f\n", reps, informative,
                non_informative);
    const bool ok = informative <= non_informative + 1e-12;
    report(4, "informative priors do not degrade mean accuracy", ok);
    REQUIRE(ok);
}

TEST_CASE("public ratings benchmark reproduces the reference table", "[c5]") {
    const std::string path = std::string(BMM_SOURCE_DIR) + "/data/ml-100k/u.data";
    if (!std::filesystem::exists(path)) {
        std::printf("  ratings file not found at %s\n", path.c_str());
        std::printf("  place the 100k ratings file there to run this benchmark\n");
        report(5, "held-out accuracy on the public ratings set", false);
        REQUIRE(false);
    }
    const auto loaded = bmm::load_movielens(path);
    const auto [train, hidden] = bmm::split_train_hidden(loaded.data, 0.2, 42);
    std::printf("  %zu train / %zu hidden ratings, %zu users, %zu items\n", train.size(),
                hidden.size(), train.n_users(), train.n_items());
    const auto truth = bmm::to_rated_pairs(hidden);

    bmm::ModelConfig config = bmm::ModelConfig::uniform(10, 10);
    config.max_iters = 500;
    config.rel_tol = 1e-6;
    config.seed = 0;
    const auto fitted = bmm::fit(train, config);
    const auto est = bmm::estimate_memberships(fitted.state);
    const auto model_report =
        bmm::evaluate(bmm::predict_many(est, fitted.mu, train.scale(), truth), truth);

    const bmm::BaselineContext ctx(train);
    auto score_baseline = [&](auto&& predict_one) {
        std::vector<bmm::RatedPair> preds;
        preds.reserve(truth.size());
        for (const auto& t : truth) preds.push_back({t.user, t.item, predict_one(t)});
        return bmm::evaluate(preds, truth);
    };
    const auto naive_report = score_baseline(
        [&](const bmm::RatedPair& t) { return ctx.clip(bmm::naive_predict(ctx, t.user)); });
    const auto user_report = score_baseline(
        [&](const bmm::RatedPair& t) { return bmm::user_based_predict(ctx, t.user, t.item); });
    const auto item_report = score_baseline(
        [&](const bmm::RatedPair& t) { return bmm::item_based_predict(ctx, t.user, t.item); });
    const auto pmf_model = bmm::pmf_fit(train, {});
    const auto pmf_report = score_baseline(
        [&](const bmm::RatedPair& t) { return bmm::pmf_predict(pmf_model, t.user, t.item); });

    struct Check {
        const char* name;
        double mae, target, band;
    };
    const Check checks[] = {
        {"model", model_report.mae, 0.7300, 0.02},
        {"naive", naive_report.mae, 1.3269, 0.02},
        {"user", user_report.mae, 0.8110, 0.02},
        {"item", item_report.mae, 0.8068, 0.02},
        {"pmf", pmf_report.mae, 0.8493, 0.04},
    };
    bool ok = true;
    for (const auto& c : checks) {
        const bool pass = std::abs(c.mae - c.target) <= c.band;
        std::printf("  %-6s mae %.4f (target %.4f +/- %.2f) %s\n", c.name, c.mae, c.target,
                    c.band, pass ? "ok" : "OUT OF BAND");
        ok = ok && pass;
    }
    const bool mse_ok = std::abs(model_report.mse - 1.1613) <= 0.06;
    const bool ar_ok = std::abs(model_report.ar - 0.4417) <= 0.015;
    std::printf("  model mse %.4f (target 1.1613 +/- 0.06) %s, ar %.4f (target 0.4417 +/- 0.015) %s\n",
                model_report.mse, mse_ok ? "ok" : "OUT OF BAND", model_report.ar,
                ar_ok ? "ok" : "OUT OF BAND");
    ok = ok && mse_ok && ar_ok;
    report(5, "held-out accuracy on the public ratings set", ok);
    REQUIRE(ok);
}

// The selection study runs on the fully observed, outlier-free version of
// the planted benchmark: masking and outlier handling are exercised by the
// accuracy and generator criteria, and this regime gives the cluster-count
// signal its best chance of surfacing in the fold MAE.
TEST_CASE("cross validation never selects fewer clusters than planted", "[c6]") {
    const int reps = 20;
    bool ok = true;
    std::vector<std::size_t> selections;
    for (int rep = 0; rep < reps; ++rep) {
        auto sc = bmm::builtin_scenario(5);
        sc.seed = bmm::derive_seed(4000, static_cast<std::uint64_t>(rep));
        sc.eta = 1.0;
        sc.outlier_rate = 0.0;
        const auto sim = bmm::generate(sc);
        bmm::CvPlan plan;
        plan.n_folds = 5;
        plan.candidates = {{3, 3}, {4, 4}, {5, 5}, {6, 6}, {7, 7}};
        plan.seed = bmm::derive_seed(5000, static_cast<std::uint64_t>(rep));
        bmm::ModelConfig tmpl;
        tmpl.max_iters = 200;
        tmpl.rel_tol = 1e-5;
        bmm::EngineOptions opts;
        opts.elbo_check_every = 5;
        const auto result = bmm::cross_validate(sim.observed, plan, tmpl, opts);
        std::printf("  rep %2d:", rep);
        for (const auto& row : result.rows) std::printf("  K=%zu %.4f", row.K, row.mean_mae);
        const auto [K, L] = result.selected_candidate();
        std::printf("  -> %zu\n", K);
        std::fflush(stdout);
        selections.push_back(K);
        if (K < 5) ok = false;
    }
    std::printf("  selected cluster counts:");
    for (std::size_t k : selections) std::printf(" %zu", k);
    std::printf("\n");
    report(6, "cross validation never under-selects the cluster count", ok);
    REQUIRE(ok);
}

TEST_CASE("iteration cost scales at most linearly in the rating count", "[c7]") {
    const std::size_t iters = 30;
    double per_iter[2] = {0.0, 0.0};
    std::size_t counts[2] = {0, 0};
    for (int step = 0; step < 2; ++step) {
        auto sc = bmm::builtin_scenario(5);
        sc.eta = step == 0 ? 0.2 : 0.4;
        sc.seed = 123;
        const auto sim = bmm::generate(sc);
        counts[step] = sim.observed.size();
        bmm::ModelConfig config = bmm::ModelConfig::uniform(5, 5);
        config.max_iters = iters;
        config.rel_tol = 0.0;
        config.seed = 9;
        bmm::EngineOptions opts;
        opts.elbo_check_every = iters;
        double best = 1e300;
        for (int attempt = 0; attempt < 3; ++attempt) {
            const auto t0 = std::chrono::steady_clock::now();
            const auto fitted = bmm::fit(sim.observed, config, opts);
            const auto t1 = std::chrono::steady_clock::now();
            REQUIRE(fitted.iterations == iters);
            best = std::min(best, std::chrono::duration<double>(t1 - t0).count() /
                                      static_cast<double>(iters));
        }
        per_iter[step] = best;
    }
    const double count_ratio = static_cast<double>(counts[1]) / static_cast<double>(counts[0]);
    const double time_ratio = per_iter[1] / per_iter[0];
    std::printf("  ratings %zu -> %zu (x%.2f), per-iteration %.4fms -> %.4fms (x%.2f)\n",
                counts[0], counts[1], count_ratio, 1e3 * per_iter[0], 1e3 * per_iter[1],
                time_ratio);
    const bool ok = count_ratio > 1.8 && count_ratio < 2.2 && time_ratio <= 2.5;
    report(7, "doubling the ratings at most doubles the iteration cost", ok);
    REQUIRE(ok);
}

TEST_CASE("generator draws levels from the block distribution", "[c8]") {
    bool ok = true;

    // Goodness of fit on a single-block scenario observed in full.
    {
        bmm::SimScenario sc;
        sc.n_users = 400;
        sc.n_items = 250;
        sc.K = 1;
        sc.L = 1;
        sc.scale = bmm::RatingScale::integers(5);
        sc.alpha = {1.0};
        sc.beta = {1.0};
        sc.mu = bmm::BlockArray(1, 1, 5);
        const double raw[5] = {6.0, 5.0, 4.0, 3.0, 2.0};  // normalizes to 0.30 .. 0.10
        for (std::size_t s = 0; s < 5; ++s) sc.mu(0, 0, s) = raw[s];
        sc.eta = 1.0;
        sc.outlier_rate = 0.0;
        sc.seed = 31;
        const auto sim = bmm::generate(sc);
        REQUIRE(sim.observed.size() == 100000);
        const auto hist = sim.observed.level_histogram();
        double chi2 = 0.0;
        for (std::size_t s = 0; s < 5; ++s) {
            const double expected = raw[s] / 20.0 * 100000.0;
            const double diff = static_cast<double>(hist[s]) - expected;
            chi2 += diff * diff / expected;
        }
        std::printf("  chi-square %.3f against the 1%% critical value %.3f\n", chi2,
                    bmm::chi_square_critical_1pct(4));
        if (!(chi2 < bmm::chi_square_critical_1pct(4))) {
            ok = false;
            std::printf("  level histogram rejects the block distribution\n");
        }
    }

    // Exact outlier accounting on deterministic corner blocks.
    {
        bmm::SimScenario sc;
        sc.n_users = 80;
        sc.n_items = 50;
        sc.K = 2;
        sc.L = 2;
        sc.scale = bmm::RatingScale::integers(5);
        sc.alpha = {0.5, 0.5};
        sc.beta = {0.5, 0.5};
        sc.mu = bmm::BlockArray(2, 2, 5);
        sc.mu.fill(0.2);
        for (std::size_t s = 0; s < 5; ++s) {
            sc.mu(0, 0, s) = s == 0 ? 1.0 : 0.0;
            sc.mu(1, 1, s) = s == 4 ? 1.0 : 0.0;
        }
        sc.eta = 1.0;
        sc.outlier_rate = 0.1;
        sc.seed = 33;
        const auto sim = bmm::generate(sc);
        std::size_t high_low = 0, high_high = 0, low_low = 0, low_high = 0;
        for (const auto& r : sim.observed.ratings()) {
            const bool high = sim.user_cluster[r.user] == 1 && sim.item_cluster[r.item] == 1;
            const bool low = sim.user_cluster[r.user] == 0 && sim.item_cluster[r.item] == 0;
            if (high && r.level == 0) ++high_low;
            if (high && r.level == 4) ++high_high;
            if (low && r.level == 4) ++low_high;
            if (low && r.level == 0) ++low_low;
        }
        const auto& o = sim.outliers;
        const auto expect_high =
            static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(o.high_eligible)));
        const auto expect_low =
            static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(o.low_eligible)));
        std::printf("  high corner: %zu eligible, %zu flipped; low corner: %zu eligible, %zu flipped\n",
                    o.high_eligible, o.high_flipped, o.low_eligible, o.low_flipped);
        if (o.high_flipped != expect_high || o.low_flipped != expect_low) ok = false;
        if (high_low != o.high_flipped || high_high != o.high_eligible - o.high_flipped) ok = false;
        if (low_high != o.low_flipped || low_low != o.low_eligible - o.low_flipped) ok = false;
    }

    // Exact-count masking hits its target size.
    {
        auto sc = bmm::builtin_scenario(5);
        sc.eta = 0.37;
        sc.exact_count_mask = true;
        sc.seed = 5;
        const auto sim = bmm::generate(sc);
        if (sim.observed.size() !=
            static_cast<std::size_t>(std::llround(0.37 * 300.0 * 200.0)))
            ok = false;
    }

    report(8, "synthetic ratings follow their configured distribution", ok);
    REQUIRE(ok);
}
