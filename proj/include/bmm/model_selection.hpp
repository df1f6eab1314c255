#pragma once

// Cluster-count selection by k-fold cross-validation on held-out rating
// error. Candidates are (K, L) pairs; the winner minimises mean MAE across
// folds, with ties preferring fewer total blocks.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"
#include "engine.hpp"
#include "math.hpp"
#include "predict.hpp"

namespace bmm {

struct CvPlan {
    std::size_t n_folds = 5;
    std::vector<std::pair<std::size_t, std::size_t>> candidates;  // (K, L)
    std::uint64_t seed = 0;

    void validate() const {
        if (n_folds < 2) throw std::invalid_argument("CvPlan: need at least 2 folds");
        if (candidates.empty()) throw std::invalid_argument("CvPlan: no candidates");
        for (auto [k, l] : candidates)
            if (k == 0 || l == 0) throw std::invalid_argument("CvPlan: candidate K and L must be at least 1");
    }
};

struct FoldSplit {
    RatingDataset train;
    RatingDataset test;
};

/// Shuffles the rating triplets and deals them into n_folds test sets with
/// sizes differing by at most one; every rating lands in exactly one test
/// set. User and item dimensions and the scale carry over unchanged, so a
/// test rating may involve a user or item absent from its training side
/// (such nodes keep their prior weights when fitted).
inline std::vector<FoldSplit> split_folds(const RatingDataset& data, std::size_t n_folds,
                                          std::uint64_t seed) {
    if (n_folds < 2) throw std::invalid_argument("split_folds: need at least 2 folds");
    if (n_folds > data.size())
        throw std::invalid_argument("split_folds: more folds than ratings");
    std::vector<std::uint32_t> order(data.size());
    std::iota(order.begin(), order.end(), 0u);
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<FoldSplit> out;
    out.reserve(n_folds);
    std::size_t start = 0;
    for (std::size_t f = 0; f < n_folds; ++f) {
        const std::size_t size = data.size() / n_folds + (f < data.size() % n_folds ? 1 : 0);
        std::vector<char> in_test(data.size(), 0);
        for (std::size_t n = start; n < start + size; ++n) in_test[order[n]] = 1;
        start += size;
        std::vector<Rating> train, test;
        train.reserve(data.size() - size);
        test.reserve(size);
        for (std::size_t r = 0; r < data.size(); ++r)
            (in_test[r] ? test : train).push_back(data.ratings()[r]);
        out.push_back(FoldSplit{
            RatingDataset(data.n_users(), data.n_items(), data.scale(), std::move(train)),
            RatingDataset(data.n_users(), data.n_items(), data.scale(), std::move(test)),
        });
    }
    return out;
}

struct CvRow {
    std::size_t K = 0;
    std::size_t L = 0;
    double mean_mae = 0.0;
    std::vector<double> fold_mae;
};

struct CvResult {
    std::vector<CvRow> rows;      // one per candidate, in input order
    std::size_t selected = 0;     // index into rows
    std::pair<std::size_t, std::size_t> selected_candidate() const {
        return {rows.at(selected).K, rows.at(selected).L};
    }
};

/// Fits every candidate on every fold and scores held-out MAE. From the
/// config template only max_iters and rel_tol are used; priors are flat
/// (1/K, 1/L) per candidate and the engine seed is derived from the plan
/// seed per (candidate, fold). Selection: smallest mean MAE, ties broken
/// by smaller K + L, then smaller K.
inline CvResult cross_validate(const RatingDataset& data, const CvPlan& plan,
                               const ModelConfig& config_template = {},
                               const EngineOptions& opts = {}) {
    plan.validate();
    opts.validate();
    const auto folds = split_folds(data, plan.n_folds, plan.seed);

    CvResult result;
    result.rows.reserve(plan.candidates.size());
    for (std::size_t c = 0; c < plan.candidates.size(); ++c) {
        const auto [K, L] = plan.candidates[c];
        CvRow row;
        row.K = K;
        row.L = L;
        for (std::size_t f = 0; f < folds.size(); ++f) {
            ModelConfig config = ModelConfig::uniform(K, L);
            config.max_iters = config_template.max_iters;
            config.rel_tol = config_template.rel_tol;
            config.seed = derive_seed(plan.seed, c * plan.n_folds + f);
            const FitResult fitted = fit(folds[f].train, config, opts);
            const auto est = estimate_memberships(fitted.state);
            const auto truth = to_rated_pairs(folds[f].test);
            const auto preds = predict_many(est, fitted.mu, data.scale(), truth);
            row.fold_mae.push_back(evaluate(preds, truth).mae);
        }
        row.mean_mae = std::accumulate(row.fold_mae.begin(), row.fold_mae.end(), 0.0) /
                       static_cast<double>(row.fold_mae.size());
        result.rows.push_back(std::move(row));
    }

    result.selected = 0;
    for (std::size_t c = 1; c < result.rows.size(); ++c) {
        const CvRow& best = result.rows[result.selected];
        const CvRow& cur = result.rows[c];
        const bool better = cur.mean_mae < best.mean_mae ||
            (cur.mean_mae == best.mean_mae &&
             (cur.K + cur.L < best.K + best.L ||
              (cur.K + cur.L == best.K + best.L && cur.K < best.K)));
        if (better) result.selected = c;
    }
    return result;
}

/// CSV rendering: one row per candidate plus a selected flag.
inline std::string cv_to_csv(const CvResult& result) {
    std::ostringstream os;
    os << "K,L,mean_mae";
    const std::size_t n_folds = result.rows.empty() ? 0 : result.rows.front().fold_mae.size();
    for (std::size_t f = 0; f < n_folds; ++f) os << ",fold_" << f;
    os << ",selected\n";
    char buf[64];
    for (std::size_t c = 0; c < result.rows.size(); ++c) {
        const CvRow& row = result.rows[c];
        os << row.K << ',' << row.L;
        std::snprintf(buf, sizeof buf, "%.17g", row.mean_mae);
        os << ',' << buf;
        for (double v : row.fold_mae) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            os << ',' << buf;
        }
        os << ',' << (c == result.selected ? 1 : 0) << '\n';
    }
    return os.str();
}

}  // namespace bmm
