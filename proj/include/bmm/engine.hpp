#pragma once

// Mean-field coordinate ascent for the bipartite mixed-membership block
// model. The variational family factorises into per-node Dirichlet weight
// posteriors (gamma_u, gamma_i) and per-rating assignment distributions
// (phi_u, phi_i); block rating distributions mu are point-estimated. Each
// update below is the exact maximiser of the evidence lower bound over its
// own block with the others held fixed, so the ELBO never decreases across
// iterations beyond floating point rounding.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"
#include "math.hpp"

namespace bmm {

struct EngineOptions {
    enum class Init { uniform_jitter, random_dirichlet };

    // Dirichlet node draws spread the starting memberships widely; the
    // near-uniform jitter alternative starts close to the symmetric point
    // and can stay stuck there on evenly balanced data.
    Init init_strategy = Init::random_dirichlet;
    double jitter_scale = 0.1;      // multiplicative spread of initial rows, in (0, 0.5)
    double min_prob_floor = 1e-10;  // clamp applied before logs, in (0, 1e-3]
    std::size_t elbo_check_every = 1;

    void validate() const {
        if (!(jitter_scale > 0.0 && jitter_scale < 0.5))
            throw std::invalid_argument("EngineOptions: jitter_scale must lie in (0, 0.5)");
        if (!(min_prob_floor > 0.0 && min_prob_floor <= 1e-3))
            throw std::invalid_argument("EngineOptions: min_prob_floor must lie in (0, 1e-3]");
        if (elbo_check_every == 0)
            throw std::invalid_argument("EngineOptions: elbo_check_every must be at least 1");
    }
};

struct Initialization {
    VariationalState state;
    BlockArray mu;
};

namespace detail {

/// Per-row expected log weights under Dirichlet(row):
/// out(r, c) = digamma(row_c) - digamma(sum of row).
inline Matrix expected_log_weights(const Matrix& gamma) {
    Matrix out(gamma.rows(), gamma.cols());
    for (std::size_t r = 0; r < gamma.rows(); ++r) {
        auto row = gamma.row(r);
        double total = 0.0;
        for (double v : row) total += v;
        const double dg_total = digamma(total);
        for (std::size_t c = 0; c < gamma.cols(); ++c)
            out(r, c) = digamma(row[c]) - dg_total;
    }
    return out;
}

/// Elementwise log with entries clamped up to the floor first.
inline BlockArray log_floored(const BlockArray& mu, double floor) {
    BlockArray out(mu.K(), mu.L(), mu.S());
    for (std::size_t k = 0; k < mu.K(); ++k)
        for (std::size_t l = 0; l < mu.L(); ++l) {
            auto src = mu.row(k, l);
            auto dst = out.row(k, l);
            for (std::size_t s = 0; s < mu.S(); ++s)
                dst[s] = std::log(std::max(src[s], floor));
        }
    return out;
}

/// Normalised exponential of the logits written into `out`, max-subtracted
/// for stability. Entries are clamped up to the floor and renormalised so
/// the row stays on the simplex with no zero coordinates.
inline void softmax_into(std::span<const double> logits, std::span<double> out, double floor) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        total += out[i];
    }
    double clamped = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = std::max(out[i] / total, floor);
        clamped += out[i];
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i] /= clamped;
}

}  // namespace detail

/// Recomputes every user-side assignment row from the current item-side
/// rows, user Dirichlet parameters, and block distributions. For rating
/// (i, j, s): phi_u[k] is proportional to
///   exp{ E[log user weight k] + sum_l phi_i[l] log mu(k, l, s) }.
inline void update_phi_u(const RatingDataset& data, VariationalState& state,
                         const BlockArray& mu, const EngineOptions& opts = {}) {
    const std::size_t K = state.gamma_u.cols();
    const std::size_t L = state.gamma_i.cols();
    const Matrix elog_u = detail::expected_log_weights(state.gamma_u);
    const BlockArray log_mu = detail::log_floored(mu, opts.min_prob_floor);
    std::vector<double> logits(K);
    for (std::size_t r = 0; r < data.size(); ++r) {
        const Rating& rt = data.ratings()[r];
        auto phi_i_row = state.phi_i.row(r);
        for (std::size_t k = 0; k < K; ++k) {
            double acc = elog_u(rt.user, k);
            for (std::size_t l = 0; l < L; ++l)
                acc += phi_i_row[l] * log_mu(k, l, rt.level);
            logits[k] = acc;
        }
        detail::softmax_into(logits, state.phi_u.row(r), opts.min_prob_floor);
    }
}

/// Item-side mirror of update_phi_u, consuming the current phi_u rows.
inline void update_phi_i(const RatingDataset& data, VariationalState& state,
                         const BlockArray& mu, const EngineOptions& opts = {}) {
    const std::size_t K = state.gamma_u.cols();
    const std::size_t L = state.gamma_i.cols();
    const Matrix elog_i = detail::expected_log_weights(state.gamma_i);
    const BlockArray log_mu = detail::log_floored(mu, opts.min_prob_floor);
    std::vector<double> logits(L);
    for (std::size_t r = 0; r < data.size(); ++r) {
        const Rating& rt = data.ratings()[r];
        auto phi_u_row = state.phi_u.row(r);
        for (std::size_t l = 0; l < L; ++l) {
            double acc = elog_i(rt.item, l);
            for (std::size_t k = 0; k < K; ++k)
                acc += phi_u_row[k] * log_mu(k, l, rt.level);
            logits[l] = acc;
        }
        detail::softmax_into(logits, state.phi_i.row(r), opts.min_prob_floor);
    }
}

/// Dirichlet parameters are the prior plus the matching assignment mass:
/// gamma_u[i] = alpha + sum of phi_u rows over user i's observed ratings,
/// and likewise on the item side. Hence gamma_u(i, k) >= alpha_k always.
inline void update_gamma(const RatingDataset& data, VariationalState& state,
                         const ModelConfig& config) {
    if (state.gamma_u.rows() != data.n_users() || state.gamma_u.cols() != config.K)
        state.gamma_u = Matrix(data.n_users(), config.K);
    if (state.gamma_i.rows() != data.n_items() || state.gamma_i.cols() != config.L)
        state.gamma_i = Matrix(data.n_items(), config.L);
    for (std::size_t i = 0; i < data.n_users(); ++i) {
        auto row = state.gamma_u.row(i);
        for (std::size_t k = 0; k < config.K; ++k) row[k] = config.alpha[k];
    }
    for (std::size_t j = 0; j < data.n_items(); ++j) {
        auto row = state.gamma_i.row(j);
        for (std::size_t l = 0; l < config.L; ++l) row[l] = config.beta[l];
    }
    for (std::size_t r = 0; r < data.size(); ++r) {
        const Rating& rt = data.ratings()[r];
        auto pu = state.phi_u.row(r);
        auto pi = state.phi_i.row(r);
        auto gu = state.gamma_u.row(rt.user);
        auto gi = state.gamma_i.row(rt.item);
        for (std::size_t k = 0; k < pu.size(); ++k) gu[k] += pu[k];
        for (std::size_t l = 0; l < pi.size(); ++l) gi[l] += pi[l];
    }
}

/// Block rating distributions: joint assignment mass accumulated per level
/// and normalised within each (k, l) cell. Cells that received no mass
/// fall back to the uniform distribution.
inline void update_mu(const RatingDataset& data, const VariationalState& state, BlockArray& mu) {
    const std::size_t K = mu.K();
    const std::size_t L = mu.L();
    const std::size_t S = mu.S();
    std::vector<double> num(K * L * S, 0.0);
    for (std::size_t r = 0; r < data.size(); ++r) {
        const Rating& rt = data.ratings()[r];
        auto pu = state.phi_u.row(r);
        auto pi = state.phi_i.row(r);
        for (std::size_t k = 0; k < K; ++k) {
            const double w = pu[k];
            double* cell = num.data() + (k * L) * S + rt.level;
            for (std::size_t l = 0; l < L; ++l, cell += S) *cell += w * pi[l];
        }
    }
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t l = 0; l < L; ++l) {
            const double* src = num.data() + (k * L + l) * S;
            double total = 0.0;
            for (std::size_t s = 0; s < S; ++s) total += src[s];
            auto dst = mu.row(k, l);
            if (total < std::numeric_limits<double>::min()) {
                for (std::size_t s = 0; s < S; ++s) dst[s] = 1.0 / static_cast<double>(S);
            } else {
                for (std::size_t s = 0; s < S; ++s) dst[s] = src[s] / total;
            }
        }
}

/// Evidence lower bound of the current variational state. Terms, in order:
/// prior normalisers, per-node expected log prior minus the node's own
/// posterior normaliser, per-rating expected log assignment prior plus
/// assignment entropy, and the expected log likelihood of each observed
/// level under mu.
inline double elbo(const RatingDataset& data, const VariationalState& state,
                   const BlockArray& mu, const ModelConfig& config,
                   const EngineOptions& opts = {}) {
    const std::size_t K = config.K;
    const std::size_t L = config.L;
    // Grouping the prior normalizer with each node's own term keeps the
    // value exactly zero when every gamma row still equals its prior.
    const double f1_alpha = f1(config.alpha);
    const double f1_beta = f1(config.beta);
    double value = 0.0;

    const Matrix elog_u = detail::expected_log_weights(state.gamma_u);
    const Matrix elog_i = detail::expected_log_weights(state.gamma_i);
    for (std::size_t i = 0; i < data.n_users(); ++i) {
        auto row = state.gamma_u.row(i);
        for (std::size_t k = 0; k < K; ++k)
            value += (config.alpha[k] - row[k]) * elog_u(i, k);
        value += f1_alpha - f1(row);
    }
    for (std::size_t j = 0; j < data.n_items(); ++j) {
        auto row = state.gamma_i.row(j);
        for (std::size_t l = 0; l < L; ++l)
            value += (config.beta[l] - row[l]) * elog_i(j, l);
        value += f1_beta - f1(row);
    }

    const BlockArray log_mu = detail::log_floored(mu, opts.min_prob_floor);
    for (std::size_t r = 0; r < data.size(); ++r) {
        const Rating& rt = data.ratings()[r];
        auto pu = state.phi_u.row(r);
        auto pi = state.phi_i.row(r);
        for (std::size_t k = 0; k < K; ++k)
            if (pu[k] > 0.0) value += pu[k] * (elog_u(rt.user, k) - std::log(pu[k]));
        for (std::size_t l = 0; l < L; ++l)
            if (pi[l] > 0.0) value += pi[l] * (elog_i(rt.item, l) - std::log(pi[l]));
        for (std::size_t k = 0; k < K; ++k) {
            const double w = pu[k];
            for (std::size_t l = 0; l < L; ++l)
                value += w * pi[l] * log_mu(k, l, rt.level);
        }
    }
    return value;
}

/// Starting point for the coordinate ascent. Randomness is drawn per node,
/// not per rating: every user and item gets one random membership row that
/// all of its ratings share. Per-rating noise averages out over a node's
/// ratings and leaves the ascent trapped near the symmetric fixed point on
/// balanced data; node-level draws keep the user-item asymmetry correlated.
/// Gamma follows from the assignment sums and mu from the corresponding
/// table update, so the state is a coordinate-ascent iterate from the start.
inline Initialization init_state(const RatingDataset& data, const ModelConfig& config,
                                 const EngineOptions& opts = {}) {
    config.validate();
    opts.validate();
    Rng rng(config.seed);
    const std::size_t K = config.K;
    const std::size_t L = config.L;
    const std::size_t R = data.size();

    std::uniform_real_distribution<double> jitter(1.0 - opts.jitter_scale, 1.0 + opts.jitter_scale);
    const std::vector<double> flat_k(K, 1.0), flat_l(L, 1.0);
    auto fill_row = [&](std::span<double> row, const std::vector<double>& flat) {
        if (opts.init_strategy == EngineOptions::Init::uniform_jitter) {
            double total = 0.0;
            for (double& v : row) {
                v = jitter(rng);
                total += v;
            }
            for (double& v : row) v /= total;
        } else {
            auto draw = dirichlet_draw(flat, rng);
            std::copy(draw.begin(), draw.end(), row.begin());
        }
    };
    Matrix user_start(data.n_users(), K);
    Matrix item_start(data.n_items(), L);
    for (std::size_t i = 0; i < data.n_users(); ++i) fill_row(user_start.row(i), flat_k);
    for (std::size_t j = 0; j < data.n_items(); ++j) fill_row(item_start.row(j), flat_l);

    VariationalState state;
    state.phi_u = Matrix(R, K);
    state.phi_i = Matrix(R, L);
    for (std::size_t r = 0; r < R; ++r) {
        const Rating& rt = data.ratings()[r];
        std::copy_n(user_start.row(rt.user).begin(), K, state.phi_u.row(r).begin());
        std::copy_n(item_start.row(rt.item).begin(), L, state.phi_i.row(r).begin());
    }
    update_gamma(data, state, config);
    BlockArray mu(K, L, data.scale().size());
    update_mu(data, state, mu);
    return {std::move(state), std::move(mu)};
}

/// Runs the full coordinate ascent: per iteration phi_u, then phi_i, then
/// gamma, then mu. The ELBO is evaluated at initialization and every
/// elbo_check_every iterations; the fit stops once the relative ELBO change
/// falls below rel_tol or max_iters is reached. A non-finite ELBO aborts
/// with the iteration index in the message.
inline FitResult fit(const RatingDataset& data, const ModelConfig& config,
                     const EngineOptions& opts = {}) {
    config.validate();
    opts.validate();
    auto [state, mu] = init_state(data, config, opts);
    FitResult out;
    out.state = std::move(state);
    out.mu = std::move(mu);

    double last = elbo(data, out.state, out.mu, config, opts);
    if (!std::isfinite(last))
        throw std::runtime_error("fit: ELBO is not finite at iteration 0");
    out.elbo_trace.push_back(last);

    for (std::size_t t = 1; t <= config.max_iters; ++t) {
        update_phi_u(data, out.state, out.mu, opts);
        update_phi_i(data, out.state, out.mu, opts);
        update_gamma(data, out.state, config);
        update_mu(data, out.state, out.mu);
        out.iterations = t;
        if (t % opts.elbo_check_every == 0 || t == config.max_iters) {
            const double e = elbo(data, out.state, out.mu, config, opts);
            if (!std::isfinite(e))
                throw std::runtime_error("fit: ELBO is not finite at iteration " + std::to_string(t));
            out.elbo_trace.push_back(e);
            if (std::abs(e - last) <= config.rel_tol * std::abs(last)) {
                out.converged = true;
                break;
            }
            last = e;
        }
    }
    return out;
}

}  // namespace bmm
