#pragma once

// Reference predictors: per-user mean, cosine-similarity neighborhood
// models on both sides of the matrix, and regularised matrix
// factorisation trained by stochastic gradient descent.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "core.hpp"
#include "math.hpp"

namespace bmm {

struct NeighborConfig {
    enum class Fallback { user_mean, global_mean };

    std::size_t k_neighbors = 0;  // 0 keeps every qualifying neighbor
    std::size_t min_overlap = 1;  // co-rated coordinates required for a similarity
    Fallback fallback = Fallback::user_mean;

    void validate() const {
        if (min_overlap == 0) throw std::invalid_argument("NeighborConfig: min_overlap must be at least 1");
    }
};

struct PmfConfig {
    std::size_t rank = 10;
    double lambda = 0.05;
    double learning_rate = 0.005;
    std::size_t max_epochs = 200;
    double tol = 1e-5;
    std::uint64_t seed = 0;

    void validate() const {
        if (rank == 0) throw std::invalid_argument("PmfConfig: rank must be at least 1");
        if (!(lambda >= 0.0)) throw std::invalid_argument("PmfConfig: lambda must be nonnegative");
        if (!(learning_rate > 0.0)) throw std::invalid_argument("PmfConfig: learning_rate must be positive");
        if (max_epochs == 0) throw std::invalid_argument("PmfConfig: max_epochs must be at least 1");
        if (!(tol >= 0.0)) throw std::invalid_argument("PmfConfig: tol must be nonnegative");
    }
};

/// Sparse row view: (index, value) pairs sorted by index.
using SparseEntry = std::pair<std::uint32_t, double>;

/// Cosine similarity restricted to co-rated coordinates: both the dot
/// product and the two norms run over the shared indices only. Returns 0
/// when the overlap is below min_overlap or either restricted norm is 0.
inline double cosine_similarity(std::span<const SparseEntry> a, std::span<const SparseEntry> b,
                                std::size_t min_overlap = 1) {
    std::size_t ia = 0, ib = 0, overlap = 0;
    double dot = 0.0, na = 0.0, nb = 0.0;
    while (ia < a.size() && ib < b.size()) {
        if (a[ia].first < b[ib].first) ++ia;
        else if (b[ib].first < a[ia].first) ++ib;
        else {
            dot += a[ia].second * b[ib].second;
            na += a[ia].second * a[ia].second;
            nb += b[ib].second * b[ib].second;
            ++overlap;
            ++ia;
            ++ib;
        }
    }
    if (overlap < min_overlap || na == 0.0 || nb == 0.0) return 0.0;
    return dot / std::sqrt(na * nb);
}

/// Shared precomputation for the memory-based predictors: per-user and
/// per-item sparse vectors (sorted), row means, and the global mean.
class BaselineContext {
public:
    explicit BaselineContext(const RatingDataset& train) : train_(&train) {
        user_rows_.resize(train.n_users());
        item_rows_.resize(train.n_items());
        user_means_.assign(train.n_users(), 0.0);
        item_means_.assign(train.n_items(), 0.0);
        double total = 0.0;
        for (const Rating& r : train.ratings()) {
            const double v = train.scale().value(r.level);
            user_rows_[r.user].emplace_back(r.item, v);
            item_rows_[r.item].emplace_back(r.user, v);
            user_means_[r.user] += v;
            item_means_[r.item] += v;
            total += v;
        }
        for (auto& row : user_rows_) std::sort(row.begin(), row.end());
        for (auto& row : item_rows_) std::sort(row.begin(), row.end());
        for (std::size_t i = 0; i < user_rows_.size(); ++i)
            if (!user_rows_[i].empty()) user_means_[i] /= static_cast<double>(user_rows_[i].size());
        for (std::size_t j = 0; j < item_rows_.size(); ++j)
            if (!item_rows_[j].empty()) item_means_[j] /= static_cast<double>(item_rows_[j].size());
        // Empty training data degrades to the scale midpoint.
        global_mean_ = train.size() > 0 ? total / static_cast<double>(train.size())
                                        : 0.5 * (train.scale().min_value() + train.scale().max_value());
    }

    const RatingDataset& train() const { return *train_; }
    std::span<const SparseEntry> user_row(std::size_t user) const { return user_rows_.at(user); }
    std::span<const SparseEntry> item_row(std::size_t item) const { return item_rows_.at(item); }
    bool user_seen(std::size_t user) const { return !user_rows_.at(user).empty(); }
    double user_mean(std::size_t user) const { return user_means_.at(user); }
    double item_mean(std::size_t item) const { return item_means_.at(item); }
    double global_mean() const { return global_mean_; }
    double clip(double v) const {
        return std::clamp(v, train_->scale().min_value(), train_->scale().max_value());
    }

private:
    const RatingDataset* train_;
    std::vector<std::vector<SparseEntry>> user_rows_;
    std::vector<std::vector<SparseEntry>> item_rows_;
    std::vector<double> user_means_;
    std::vector<double> item_means_;
    double global_mean_ = 0.0;
};

/// Mean of the user's observed rating values; the global mean when the
/// user has no training ratings.
inline double naive_predict(const BaselineContext& ctx, std::size_t user) {
    return ctx.user_seen(user) ? ctx.user_mean(user) : ctx.global_mean();
}

inline double naive_predict(const RatingDataset& train, std::size_t user) {
    return naive_predict(BaselineContext(train), user);
}

namespace detail {

inline double neighbor_fallback(const BaselineContext& ctx, std::size_t user,
                                const NeighborConfig& cfg) {
    if (cfg.fallback == NeighborConfig::Fallback::user_mean && ctx.user_seen(user))
        return ctx.user_mean(user);
    return ctx.global_mean();
}

/// Similarity-weighted mean over the top-k positive-similarity neighbors.
/// `candidates` holds (similarity, tie_break_index, rating value).
inline double weighted_neighbor_mean(std::vector<std::tuple<double, std::uint32_t, double>>& candidates,
                                     std::size_t k_neighbors) {
    std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
        if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
        return std::get<1>(a) < std::get<1>(b);
    });
    const std::size_t take = k_neighbors == 0 ? candidates.size()
                                              : std::min(k_neighbors, candidates.size());
    double num = 0.0, den = 0.0;
    for (std::size_t n = 0; n < take; ++n) {
        num += std::get<0>(candidates[n]) * std::get<2>(candidates[n]);
        den += std::get<0>(candidates[n]);
    }
    return num / den;  // caller guarantees at least one positive similarity
}

}  // namespace detail

/// Rating of (user, item) predicted from other users who rated the item,
/// weighted by user-user cosine similarity over co-rated items. Falls back
/// per the config when no neighbor has positive similarity.
inline double user_based_predict(const BaselineContext& ctx, std::size_t user, std::size_t item,
                                 const NeighborConfig& cfg = {}) {
    cfg.validate();
    const auto own = ctx.user_row(user);
    std::vector<std::tuple<double, std::uint32_t, double>> candidates;
    for (const SparseEntry& e : ctx.item_row(item)) {
        if (e.first == user) continue;
        const double sim = cosine_similarity(own, ctx.user_row(e.first), cfg.min_overlap);
        if (sim > 0.0) candidates.emplace_back(sim, e.first, e.second);
    }
    if (candidates.empty()) return ctx.clip(detail::neighbor_fallback(ctx, user, cfg));
    return ctx.clip(detail::weighted_neighbor_mean(candidates, cfg.k_neighbors));
}

inline double user_based_predict(const RatingDataset& train, std::size_t user, std::size_t item,
                                 const NeighborConfig& cfg = {}) {
    return user_based_predict(BaselineContext(train), user, item, cfg);
}

/// Item-side mirror: items the user rated, weighted by item-item cosine
/// similarity over shared raters.
inline double item_based_predict(const BaselineContext& ctx, std::size_t user, std::size_t item,
                                 const NeighborConfig& cfg = {}) {
    cfg.validate();
    const auto own = ctx.item_row(item);
    std::vector<std::tuple<double, std::uint32_t, double>> candidates;
    for (const SparseEntry& e : ctx.user_row(user)) {
        if (e.first == item) continue;
        const double sim = cosine_similarity(own, ctx.item_row(e.first), cfg.min_overlap);
        if (sim > 0.0) candidates.emplace_back(sim, e.first, e.second);
    }
    if (candidates.empty()) return ctx.clip(detail::neighbor_fallback(ctx, user, cfg));
    return ctx.clip(detail::weighted_neighbor_mean(candidates, cfg.k_neighbors));
}

inline double item_based_predict(const RatingDataset& train, std::size_t user, std::size_t item,
                                 const NeighborConfig& cfg = {}) {
    return item_based_predict(BaselineContext(train), user, item, cfg);
}

/// Low-rank factor model fit by per-rating stochastic gradient descent.
struct PmfModel {
    Matrix user_factors;  // N x rank
    Matrix item_factors;  // M x rank
    std::vector<double> objective_trace;  // one entry per epoch
    double clip_lo = 0.0;
    double clip_hi = 0.0;
    std::size_t epochs = 0;
    bool converged = false;
};

namespace detail {

/// Squared-error objective with the penalty counted once per observation:
/// sum_r (R_r - u_i . v_j)^2 + lambda * sum_r (|u_i|^2 + |v_j|^2).
inline double pmf_objective(const RatingDataset& data, const Matrix& U, const Matrix& V,
                            double lambda) {
    double obj = 0.0;
    for (const Rating& r : data.ratings()) {
        auto u = U.row(r.user);
        auto v = V.row(r.item);
        double dot = 0.0, nu = 0.0, nv = 0.0;
        for (std::size_t f = 0; f < u.size(); ++f) {
            dot += u[f] * v[f];
            nu += u[f] * u[f];
            nv += v[f] * v[f];
        }
        const double e = data.scale().value(r.level) - dot;
        obj += e * e + lambda * (nu + nv);
    }
    return obj;
}

}  // namespace detail

/// Trains the factor model. Each epoch sweeps the ratings in storage
/// order; each observation takes one gradient step on its user and item
/// rows. Training stops when the relative objective change drops below
/// tol. Three consecutive objective increases abort with an error
/// suggesting a smaller learning_rate.
inline PmfModel pmf_fit(const RatingDataset& train, const PmfConfig& cfg = {}) {
    cfg.validate();
    if (train.size() == 0) throw std::invalid_argument("pmf_fit: empty training data");
    Rng rng(cfg.seed);
    std::normal_distribution<double> init(0.0, 0.1);

    PmfModel model;
    model.user_factors = Matrix(train.n_users(), cfg.rank);
    model.item_factors = Matrix(train.n_items(), cfg.rank);
    model.clip_lo = train.scale().min_value();
    model.clip_hi = train.scale().max_value();
    for (std::size_t i = 0; i < train.n_users(); ++i)
        for (std::size_t f = 0; f < cfg.rank; ++f) model.user_factors(i, f) = init(rng);
    for (std::size_t j = 0; j < train.n_items(); ++j)
        for (std::size_t f = 0; f < cfg.rank; ++f) model.item_factors(j, f) = init(rng);

    double last = detail::pmf_objective(train, model.user_factors, model.item_factors, cfg.lambda);
    std::size_t rises = 0;
    std::vector<double> u_old(cfg.rank);
    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        for (const Rating& r : train.ratings()) {
            auto u = model.user_factors.row(r.user);
            auto v = model.item_factors.row(r.item);
            double dot = 0.0;
            for (std::size_t f = 0; f < cfg.rank; ++f) dot += u[f] * v[f];
            const double e = train.scale().value(r.level) - dot;
            for (std::size_t f = 0; f < cfg.rank; ++f) {
                u_old[f] = u[f];
                u[f] += cfg.learning_rate * (e * v[f] - cfg.lambda * u[f]);
            }
            for (std::size_t f = 0; f < cfg.rank; ++f)
                v[f] += cfg.learning_rate * (e * u_old[f] - cfg.lambda * v[f]);
        }
        const double obj = detail::pmf_objective(train, model.user_factors, model.item_factors, cfg.lambda);
        model.objective_trace.push_back(obj);
        model.epochs = epoch;
        if (!std::isfinite(obj))
            throw std::runtime_error("pmf_fit: objective is not finite at epoch " +
                                     std::to_string(epoch) + "; reduce learning_rate");
        if (std::abs(obj - last) <= cfg.tol * std::abs(last)) {
            model.converged = true;
            break;
        }
        if (obj > last) {
            if (++rises >= 3)
                throw std::runtime_error("pmf_fit: objective increased for 3 consecutive epochs at epoch " +
                                         std::to_string(epoch) + "; reduce learning_rate");
        } else {
            rises = 0;
        }
        last = obj;
    }
    return model;
}

/// Factor dot product clipped to the training scale's value range.
inline double pmf_predict(const PmfModel& model, std::size_t user, std::size_t item) {
    if (user >= model.user_factors.rows()) throw std::out_of_range("pmf_predict: user out of range");
    if (item >= model.item_factors.rows()) throw std::out_of_range("pmf_predict: item out of range");
    auto u = model.user_factors.row(user);
    auto v = model.item_factors.row(item);
    double dot = 0.0;
    for (std::size_t f = 0; f < u.size(); ++f) dot += u[f] * v[f];
    return std::clamp(dot, model.clip_lo, model.clip_hi);
}

}  // namespace bmm
