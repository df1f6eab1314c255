#pragma once

// Core data types: rating scales, sparse rating datasets stored as triplets
// with adjacency indices, dense row-major matrices, and the K x L x S block
// parameter array.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace bmm {

/// Ordered list of S >= 2 distinct rating values C_1 < ... < C_S.
/// Ratings everywhere else in the library are stored as level indices
/// 0..S-1 into this list.
class RatingScale {
public:
    explicit RatingScale(std::vector<double> values) : values_(std::move(values)) {
        if (values_.size() < 2)
            throw std::invalid_argument("RatingScale: need at least two levels");
        for (std::size_t s = 1; s < values_.size(); ++s)
            if (!(values_[s - 1] < values_[s]))
                throw std::invalid_argument("RatingScale: values must be strictly increasing");
    }

    /// The scale 1, 2, ..., s_levels.
    static RatingScale integers(std::size_t s_levels) {
        std::vector<double> v(s_levels);
        for (std::size_t s = 0; s < s_levels; ++s) v[s] = static_cast<double>(s + 1);
        return RatingScale(std::move(v));
    }

    std::size_t size() const { return values_.size(); }
    double value(std::size_t level) const {
        if (level >= values_.size()) throw std::out_of_range("RatingScale: level out of range");
        return values_[level];
    }
    std::span<const double> values() const { return values_; }
    double min_value() const { return values_.front(); }
    double max_value() const { return values_.back(); }

    /// Exact-match lookup of a value's level index.
    std::optional<std::size_t> index_of(double value) const {
        for (std::size_t s = 0; s < values_.size(); ++s)
            if (values_[s] == value) return s;
        return std::nullopt;
    }

    bool operator==(const RatingScale& other) const { return values_ == other.values_; }

private:
    std::vector<double> values_;
};

/// One observed rating: user and item index plus the level index into the
/// dataset's scale.
struct Rating {
    std::uint32_t user = 0;
    std::uint32_t item = 0;
    std::uint32_t level = 0;
};

/// Immutable sparse rating store. Keeps the triplets in insertion order and
/// an index of rating positions per user and per item. At most one rating
/// per (user, item) pair.
class RatingDataset {
public:
    RatingDataset(std::size_t n_users, std::size_t n_items, RatingScale scale,
                  std::vector<Rating> ratings)
        : n_users_(n_users), n_items_(n_items), scale_(std::move(scale)),
          ratings_(std::move(ratings)) {
        if (n_users_ == 0 || n_items_ == 0)
            throw std::invalid_argument("RatingDataset: need at least one user and one item");
        std::unordered_set<std::uint64_t> seen;
        seen.reserve(ratings_.size() * 2);
        for (const Rating& r : ratings_) {
            if (r.user >= n_users_)
                throw std::invalid_argument("RatingDataset: user index " + std::to_string(r.user) + " out of range");
            if (r.item >= n_items_)
                throw std::invalid_argument("RatingDataset: item index " + std::to_string(r.item) + " out of range");
            if (r.level >= scale_.size())
                throw std::invalid_argument("RatingDataset: rating level " + std::to_string(r.level) + " out of range");
            const std::uint64_t key = static_cast<std::uint64_t>(r.user) * n_items_ + r.item;
            if (!seen.insert(key).second)
                throw std::invalid_argument("RatingDataset: duplicate rating for user " +
                                            std::to_string(r.user) + ", item " + std::to_string(r.item));
        }
        by_user_.assign(n_users_, {});
        by_item_.assign(n_items_, {});
        for (std::size_t r = 0; r < ratings_.size(); ++r) {
            by_user_[ratings_[r].user].push_back(static_cast<std::uint32_t>(r));
            by_item_[ratings_[r].item].push_back(static_cast<std::uint32_t>(r));
        }
    }

    std::size_t n_users() const { return n_users_; }
    std::size_t n_items() const { return n_items_; }
    const RatingScale& scale() const { return scale_; }
    std::span<const Rating> ratings() const { return ratings_; }
    std::size_t size() const { return ratings_.size(); }

    /// Positions into ratings() of the given user's observations.
    std::span<const std::uint32_t> by_user(std::size_t user) const { return by_user_.at(user); }
    /// Positions into ratings() of the given item's observations.
    std::span<const std::uint32_t> by_item(std::size_t item) const { return by_item_.at(item); }

    double value_at(std::size_t r) const { return scale_.value(ratings_.at(r).level); }

    /// Counts per level over all observed ratings.
    std::vector<std::size_t> level_histogram() const {
        std::vector<std::size_t> h(scale_.size(), 0);
        for (const Rating& r : ratings_) ++h[r.level];
        return h;
    }

private:
    std::size_t n_users_;
    std::size_t n_items_;
    RatingScale scale_;
    std::vector<Rating> ratings_;
    std::vector<std::vector<std::uint32_t>> by_user_;
    std::vector<std::vector<std::uint32_t>> by_item_;
};

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<const double> data() const { return data_; }
    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool operator==(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// K x L x S array holding one distribution over rating levels per block
/// pair (k, l). Stored row-major with s fastest.
class BlockArray {
public:
    BlockArray() = default;
    BlockArray(std::size_t k_dim, std::size_t l_dim, std::size_t s_dim, double fill = 0.0)
        : k_(k_dim), l_(l_dim), s_(s_dim), data_(k_dim * l_dim * s_dim, fill) {}

    std::size_t K() const { return k_; }
    std::size_t L() const { return l_; }
    std::size_t S() const { return s_; }

    double& operator()(std::size_t k, std::size_t l, std::size_t s) {
        return data_[(k * l_ + l) * s_ + s];
    }
    double operator()(std::size_t k, std::size_t l, std::size_t s) const {
        return data_[(k * l_ + l) * s_ + s];
    }

    std::span<double> row(std::size_t k, std::size_t l) {
        return {data_.data() + (k * l_ + l) * s_, s_};
    }
    std::span<const double> row(std::size_t k, std::size_t l) const {
        return {data_.data() + (k * l_ + l) * s_, s_};
    }

    double row_sum(std::size_t k, std::size_t l) const {
        double t = 0.0;
        for (double v : row(k, l)) t += v;
        return t;
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    /// Scales every (k, l) row to sum to one; rows with no mass become uniform.
    void normalize_rows() {
        for (std::size_t k = 0; k < k_; ++k)
            for (std::size_t l = 0; l < l_; ++l) {
                auto r = row(k, l);
                double t = 0.0;
                for (double v : r) {
                    if (v < 0.0) throw std::domain_error("BlockArray: negative entry under normalization");
                    t += v;
                }
                if (t > 0.0)
                    for (double& v : r) v /= t;
                else
                    for (double& v : r) v = 1.0 / static_cast<double>(s_);
            }
    }

    std::span<const double> data() const { return data_; }

    bool operator==(const BlockArray& other) const {
        return k_ == other.k_ && l_ == other.l_ && s_ == other.s_ && data_ == other.data_;
    }

private:
    std::size_t k_ = 0;
    std::size_t l_ = 0;
    std::size_t s_ = 0;
    std::vector<double> data_;
};

/// Model hyperparameters and fitting controls.
struct ModelConfig {
    std::size_t K = 1;
    std::size_t L = 1;
    std::vector<double> alpha;  // user-side Dirichlet prior, size K
    std::vector<double> beta;   // item-side Dirichlet prior, size L
    std::size_t max_iters = 500;
    double rel_tol = 1e-6;
    std::uint64_t seed = 0;

    /// Flat priors 1/K and 1/L on both sides.
    static ModelConfig uniform(std::size_t k_dim, std::size_t l_dim) {
        ModelConfig c;
        c.K = k_dim;
        c.L = l_dim;
        c.alpha.assign(k_dim, 1.0 / static_cast<double>(k_dim));
        c.beta.assign(l_dim, 1.0 / static_cast<double>(l_dim));
        return c;
    }

    void validate() const {
        if (K == 0 || L == 0) throw std::invalid_argument("ModelConfig: K and L must be at least 1");
        if (alpha.size() != K) throw std::invalid_argument("ModelConfig: alpha must have K entries");
        if (beta.size() != L) throw std::invalid_argument("ModelConfig: beta must have L entries");
        for (double a : alpha)
            if (!(a > 0.0)) throw std::invalid_argument("ModelConfig: alpha entries must be positive");
        for (double b : beta)
            if (!(b > 0.0)) throw std::invalid_argument("ModelConfig: beta entries must be positive");
        if (max_iters == 0) throw std::invalid_argument("ModelConfig: max_iters must be at least 1");
        if (!(rel_tol >= 0.0)) throw std::invalid_argument("ModelConfig: rel_tol must be nonnegative");
    }
};

/// Variational parameters. gamma_u is N x K, gamma_i is M x L; phi_u and
/// phi_i hold one row per observed rating, aligned with the dataset's
/// rating order.
struct VariationalState {
    Matrix gamma_u;
    Matrix gamma_i;
    Matrix phi_u;
    Matrix phi_i;
};

/// Everything a fit produces: final variational state, block rating
/// distributions, and the ELBO trace (first entry at initialization, then
/// one entry per checked iteration).
struct FitResult {
    VariationalState state;
    BlockArray mu;
    std::vector<double> elbo_trace;
    std::size_t iterations = 0;
    bool converged = false;
};

}  // namespace bmm
