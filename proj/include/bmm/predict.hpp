#pragma once

// Rating prediction from a fitted model and evaluation metrics. Point
// memberships are the normalised Dirichlet parameters; the predicted level
// maximises the bilinear mixture of block rating distributions.

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "core.hpp"

namespace bmm {

/// Row-stochastic point estimates of user and item block memberships.
struct MembershipEstimates {
    Matrix user_weights;  // N x K
    Matrix item_weights;  // M x L
};

/// Normalises each gamma row to sum to one. Rows are strictly positive by
/// construction (gamma >= prior > 0), so no zero-sum guard is needed.
inline MembershipEstimates estimate_memberships(const VariationalState& state) {
    MembershipEstimates est;
    auto normalise = [](const Matrix& gamma) {
        Matrix out(gamma.rows(), gamma.cols());
        for (std::size_t r = 0; r < gamma.rows(); ++r) {
            auto src = gamma.row(r);
            double total = 0.0;
            for (double v : src) {
                if (!(v > 0.0)) throw std::domain_error("estimate_memberships: gamma entries must be positive");
                total += v;
            }
            auto dst = out.row(r);
            for (std::size_t c = 0; c < gamma.cols(); ++c) dst[c] = src[c] / total;
        }
        return out;
    };
    est.user_weights = normalise(state.gamma_u);
    est.item_weights = normalise(state.gamma_i);
    return est;
}

/// Distribution over rating levels for pair (user, item):
/// p_s = sum_k sum_l w_u[k] * mu(k, l, s) * w_i[l]. Sums to one because
/// each mu row does.
inline std::vector<double> predict_distribution(const MembershipEstimates& est,
                                                const BlockArray& mu,
                                                std::size_t user, std::size_t item) {
    if (user >= est.user_weights.rows()) throw std::out_of_range("predict_distribution: user out of range");
    if (item >= est.item_weights.rows()) throw std::out_of_range("predict_distribution: item out of range");
    const std::size_t K = mu.K();
    const std::size_t L = mu.L();
    const std::size_t S = mu.S();
    auto wu = est.user_weights.row(user);
    auto wi = est.item_weights.row(item);
    std::vector<double> p(S, 0.0);
    for (std::size_t k = 0; k < K; ++k) {
        const double a = wu[k];
        for (std::size_t l = 0; l < L; ++l) {
            const double w = a * wi[l];
            auto row = mu.row(k, l);
            for (std::size_t s = 0; s < S; ++s) p[s] += w * row[s];
        }
    }
    return p;
}

/// Index of the most probable level; ties resolve to the smallest index.
inline std::size_t predict_level(const MembershipEstimates& est, const BlockArray& mu,
                                 std::size_t user, std::size_t item) {
    const auto p = predict_distribution(est, mu, user, item);
    std::size_t best = 0;
    for (std::size_t s = 1; s < p.size(); ++s)
        if (p[s] > p[best]) best = s;
    return best;
}

/// Predicted rating value: the scale value of the most probable level.
inline double predict(const MembershipEstimates& est, const BlockArray& mu,
                      const RatingScale& scale, std::size_t user, std::size_t item) {
    if (scale.size() != mu.S()) throw std::invalid_argument("predict: scale size does not match mu");
    return scale.value(predict_level(est, mu, user, item));
}

/// A (user, item) key with a rating value; used for predictions and ground
/// truth alike.
struct RatedPair {
    std::uint32_t user = 0;
    std::uint32_t item = 0;
    double value = 0.0;
};

/// Predictions for every pair in `pairs`, keyed like the input.
inline std::vector<RatedPair> predict_many(const MembershipEstimates& est, const BlockArray& mu,
                                           const RatingScale& scale,
                                           std::span<const RatedPair> pairs) {
    std::vector<RatedPair> out;
    out.reserve(pairs.size());
    for (const RatedPair& p : pairs)
        out.push_back({p.user, p.item, predict(est, mu, scale, p.user, p.item)});
    return out;
}

inline std::vector<RatedPair> to_rated_pairs(const RatingDataset& data) {
    std::vector<RatedPair> out;
    out.reserve(data.size());
    for (const Rating& r : data.ratings())
        out.push_back({r.user, r.item, data.scale().value(r.level)});
    return out;
}

/// Mean absolute error, mean squared error, and agreement ratio (exact
/// value match) over a prediction set.
struct EvalReport {
    double mae = 0.0;
    double mse = 0.0;
    double ar = 0.0;
    std::size_t n = 0;
};

/// Compares predictions against ground truth over identical key sets.
/// A key present on one side only is an error; the message lists up to
/// five missing keys per side.
inline EvalReport evaluate(std::span<const RatedPair> predictions,
                           std::span<const RatedPair> truth) {
    if (truth.empty()) throw std::invalid_argument("evaluate: empty ground truth");
    auto key = [](const RatedPair& p) {
        return (static_cast<std::uint64_t>(p.user) << 32) | p.item;
    };
    std::unordered_map<std::uint64_t, double> pred;
    pred.reserve(predictions.size() * 2);
    for (const RatedPair& p : predictions) pred.emplace(key(p), p.value);

    std::string missing;
    std::size_t n_missing = 0;
    auto note_missing = [&](const RatedPair& p, const char* side) {
        if (n_missing < 5)
            missing += " (" + std::to_string(p.user) + "," + std::to_string(p.item) + ") " + side;
        ++n_missing;
    };

    EvalReport rep;
    for (const RatedPair& t : truth) {
        auto it = pred.find(key(t));
        if (it == pred.end()) {
            note_missing(t, "missing from predictions");
            continue;
        }
        const double err = it->second - t.value;
        rep.mae += std::abs(err);
        rep.mse += err * err;
        rep.ar += (it->second == t.value) ? 1.0 : 0.0;
        ++rep.n;
        pred.erase(it);
    }
    if (!pred.empty()) {
        for (const RatedPair& p : predictions)
            if (pred.count(key(p))) note_missing(p, "missing from ground truth");
    }
    if (n_missing > 0)
        throw std::invalid_argument("evaluate: prediction and truth keys differ, " +
                                    std::to_string(n_missing) + " mismatched:" + missing);
    rep.mae /= static_cast<double>(rep.n);
    rep.mse /= static_cast<double>(rep.n);
    rep.ar /= static_cast<double>(rep.n);
    return rep;
}

/// Mean and standard error of each metric across replicate reports.
/// Standard errors use the n-1 sample variance; a single report gets 0.
struct ReportStats {
    double mae_mean = 0.0, mae_se = 0.0;
    double mse_mean = 0.0, mse_se = 0.0;
    double ar_mean = 0.0, ar_se = 0.0;
    std::size_t n_reports = 0;
};

inline ReportStats aggregate(std::span<const EvalReport> reports) {
    if (reports.empty()) throw std::invalid_argument("aggregate: no reports");
    ReportStats st;
    st.n_reports = reports.size();
    auto stats = [&](auto field, double& mean, double& se) {
        double m = 0.0;
        for (const EvalReport& r : reports) m += field(r);
        m /= static_cast<double>(reports.size());
        double var = 0.0;
        for (const EvalReport& r : reports) {
            const double d = field(r) - m;
            var += d * d;
        }
        mean = m;
        se = reports.size() > 1
           ? std::sqrt(var / static_cast<double>(reports.size() - 1) / static_cast<double>(reports.size()))
           : 0.0;
    };
    stats([](const EvalReport& r) { return r.mae; }, st.mae_mean, st.mae_se);
    stats([](const EvalReport& r) { return r.mse; }, st.mse_mean, st.mse_se);
    stats([](const EvalReport& r) { return r.ar; }, st.ar_mean, st.ar_se);
    return st;
}

/// Hard cluster of each row: argmax entry, ties to the smallest index.
inline std::vector<std::size_t> hard_assignments(const Matrix& weights) {
    std::vector<std::size_t> out(weights.rows());
    for (std::size_t r = 0; r < weights.rows(); ++r) {
        auto row = weights.row(r);
        std::size_t best = 0;
        for (std::size_t c = 1; c < row.size(); ++c)
            if (row[c] > row[best]) best = c;
        out[r] = best;
    }
    return out;
}

/// Per-cluster membership count and mean observed rating value. user_side
/// selects whether assignments index users or items.
struct ClusterSummaryRow {
    std::size_t cluster = 0;
    std::size_t size = 0;
    double mean_rating = 0.0;  // 0 when the cluster's members have no ratings
    std::size_t n_ratings = 0;
};

inline std::vector<ClusterSummaryRow> cluster_summary(const RatingDataset& data,
                                                      std::span<const std::size_t> assignments,
                                                      std::size_t n_clusters, bool user_side) {
    const std::size_t expected = user_side ? data.n_users() : data.n_items();
    if (assignments.size() != expected)
        throw std::invalid_argument("cluster_summary: one assignment per node required");
    std::vector<ClusterSummaryRow> rows(n_clusters);
    for (std::size_t c = 0; c < n_clusters; ++c) rows[c].cluster = c;
    for (std::size_t n = 0; n < assignments.size(); ++n) {
        if (assignments[n] >= n_clusters) throw std::invalid_argument("cluster_summary: assignment out of range");
        ++rows[assignments[n]].size;
    }
    std::vector<double> sums(n_clusters, 0.0);
    for (const Rating& r : data.ratings()) {
        const std::size_t c = assignments[user_side ? r.user : r.item];
        sums[c] += data.scale().value(r.level);
        ++rows[c].n_ratings;
    }
    for (std::size_t c = 0; c < n_clusters; ++c)
        if (rows[c].n_ratings > 0)
            rows[c].mean_rating = sums[c] / static_cast<double>(rows[c].n_ratings);
    return rows;
}

}  // namespace bmm
