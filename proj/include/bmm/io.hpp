#pragma once

// File formats: ratings loader (user, item, rating, optional timestamp per
// line), train/hidden splitting, plain-text matrix serialisation that
// round-trips doubles exactly, CSV writers, and graph export.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "core.hpp"
#include "math.hpp"
#include "predict.hpp"

namespace bmm {

/// Loader result: dense dataset plus the original id of each dense index.
struct LoadedRatings {
    RatingDataset data;
    std::vector<std::int64_t> user_ids;  // dense user index -> original id
    std::vector<std::int64_t> item_ids;  // dense item index -> original id
    std::size_t n_duplicates = 0;        // repeated (user, item) keys; last kept
    std::vector<std::string> warnings;
};

/// Reads whitespace-separated lines of user id, item id, rating value, and
/// an optional ignored timestamp. Ids may be arbitrary integers; dense
/// indices are assigned in ascending id order and reported. The rating
/// scale is the sorted set of distinct values present. Repeated (user,
/// item) keys keep the last occurrence with a warning. Malformed lines
/// fail with their line number.
inline LoadedRatings load_movielens(std::istream& is, const std::string& origin = "<stream>") {
    struct Triple { std::int64_t user, item; double value; };
    std::vector<Triple> triples;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        Triple t{};
        std::int64_t timestamp;
        if (!(ls >> t.user >> t.item >> t.value))
            throw std::runtime_error(origin + ":" + std::to_string(line_no) +
                                     ": expected 'user item rating [timestamp]'");
        ls >> timestamp;  // optional fourth column
        std::string extra;
        if (ls >> extra)
            throw std::runtime_error(origin + ":" + std::to_string(line_no) + ": trailing content '" + extra + "'");
        if (!std::isfinite(t.value))
            throw std::runtime_error(origin + ":" + std::to_string(line_no) + ": non-finite rating");
        triples.push_back(t);
    }
    if (triples.empty()) throw std::runtime_error(origin + ": no ratings found");

    std::set<std::int64_t> users, items;
    std::set<double> values;
    for (const Triple& t : triples) {
        users.insert(t.user);
        items.insert(t.item);
        values.insert(t.value);
    }
    LoadedRatings out{
        RatingDataset(1, 1, RatingScale::integers(2), {}),  // replaced below
        {users.begin(), users.end()},
        {items.begin(), items.end()},
        0,
        {},
    };
    if (values.size() < 2)
        throw std::runtime_error(origin + ": need at least two distinct rating values, found " +
                                 std::to_string(values.size()));

    std::unordered_map<std::int64_t, std::uint32_t> user_index, item_index;
    for (std::size_t i = 0; i < out.user_ids.size(); ++i) user_index[out.user_ids[i]] = static_cast<std::uint32_t>(i);
    for (std::size_t j = 0; j < out.item_ids.size(); ++j) item_index[out.item_ids[j]] = static_cast<std::uint32_t>(j);
    RatingScale scale{std::vector<double>(values.begin(), values.end())};

    // Last occurrence of each key wins, in first-occurrence position.
    std::unordered_map<std::uint64_t, std::size_t> slot;
    std::vector<Rating> ratings;
    ratings.reserve(triples.size());
    for (const Triple& t : triples) {
        const Rating r{user_index[t.user], item_index[t.item],
                       static_cast<std::uint32_t>(*scale.index_of(t.value))};
        const std::uint64_t key = (static_cast<std::uint64_t>(r.user) << 32) | r.item;
        auto [it, inserted] = slot.emplace(key, ratings.size());
        if (inserted) {
            ratings.push_back(r);
        } else {
            ratings[it->second] = r;
            ++out.n_duplicates;
        }
    }
    if (out.n_duplicates > 0)
        out.warnings.push_back(origin + ": " + std::to_string(out.n_duplicates) +
                               " duplicate (user, item) keys; kept the last value of each");
    out.data = RatingDataset(out.user_ids.size(), out.item_ids.size(), std::move(scale), std::move(ratings));
    return out;
}

inline LoadedRatings load_movielens(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_movielens: cannot open '" + path + "'");
    return load_movielens(is, path);
}

/// Splits the ratings into a training part of exactly
/// round(fraction * size) ratings and the hidden remainder, both keeping
/// full dimensions and scale. Deterministic in the seed.
inline std::pair<RatingDataset, RatingDataset> split_train_hidden(const RatingDataset& data,
                                                                  double fraction,
                                                                  std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction <= 1.0))
        throw std::invalid_argument("split_train_hidden: fraction must lie in [0, 1]");
    std::vector<std::uint32_t> order(data.size());
    for (std::size_t r = 0; r < order.size(); ++r) order[r] = static_cast<std::uint32_t>(r);
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_train = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(data.size())));
    std::vector<char> in_train(data.size(), 0);
    for (std::size_t n = 0; n < n_train; ++n) in_train[order[n]] = 1;
    std::vector<Rating> train, hidden;
    train.reserve(n_train);
    hidden.reserve(data.size() - n_train);
    for (std::size_t r = 0; r < data.size(); ++r)
        (in_train[r] ? train : hidden).push_back(data.ratings()[r]);
    return {
        RatingDataset(data.n_users(), data.n_items(), data.scale(), std::move(train)),
        RatingDataset(data.n_users(), data.n_items(), data.scale(), std::move(hidden)),
    };
}

namespace detail {

inline void print_17g(std::ostream& os, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
}

}  // namespace detail

/// Matrix text format: a header line "matrix <rows> <cols>" followed by
/// one row per line. Values are printed with 17 significant digits, which
/// reads back to the identical double.
inline void write_matrix(std::ostream& os, const Matrix& m) {
    os << "matrix " << m.rows() << ' ' << m.cols() << '\n';
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto row = m.row(r);
        for (std::size_t c = 0; c < m.cols(); ++c) {
            if (c) os << ' ';
            detail::print_17g(os, row[c]);
        }
        os << '\n';
    }
}

inline Matrix read_matrix(std::istream& is, const std::string& origin = "<stream>") {
    std::string tag;
    std::size_t rows = 0, cols = 0;
    if (!(is >> tag >> rows >> cols) || tag != "matrix")
        throw std::runtime_error(origin + ": expected 'matrix <rows> <cols>' header");
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            if (!(is >> m(r, c)))
                throw std::runtime_error(origin + ": truncated matrix body at row " + std::to_string(r));
    return m;
}

/// Block array text format: "blockarray <K> <L> <S>" then one line of S
/// values per (k, l) cell, k-major.
inline void write_block_array(std::ostream& os, const BlockArray& b) {
    os << "blockarray " << b.K() << ' ' << b.L() << ' ' << b.S() << '\n';
    for (std::size_t k = 0; k < b.K(); ++k)
        for (std::size_t l = 0; l < b.L(); ++l) {
            auto row = b.row(k, l);
            for (std::size_t s = 0; s < b.S(); ++s) {
                if (s) os << ' ';
                detail::print_17g(os, row[s]);
            }
            os << '\n';
        }
}

inline BlockArray read_block_array(std::istream& is, const std::string& origin = "<stream>") {
    std::string tag;
    std::size_t K = 0, L = 0, S = 0;
    if (!(is >> tag >> K >> L >> S) || tag != "blockarray")
        throw std::runtime_error(origin + ": expected 'blockarray <K> <L> <S>' header");
    BlockArray b(K, L, S);
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t l = 0; l < L; ++l)
            for (std::size_t s = 0; s < S; ++s)
                if (!(is >> b(k, l, s)))
                    throw std::runtime_error(origin + ": truncated block array body");
    return b;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    os << content;
    if (!os) throw std::runtime_error("failed writing '" + path.string() + "'");
}

template <typename Writer>
inline void write_file_with(const std::filesystem::path& path, Writer&& writer) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    writer(os);
    if (!os) throw std::runtime_error("failed writing '" + path.string() + "'");
}

/// Metrics rows as CSV and as an aligned text table.
inline std::string metrics_to_csv(std::span<const std::pair<std::string, EvalReport>> rows) {
    std::ostringstream os;
    os << "method,mae,mse,ar,n\n";
    for (const auto& [label, rep] : rows) {
        os << label << ',';
        detail::print_17g(os, rep.mae);
        os << ',';
        detail::print_17g(os, rep.mse);
        os << ',';
        if (std::isfinite(rep.ar)) detail::print_17g(os, rep.ar);
        os << ',' << rep.n << '\n';
    }
    return os.str();
}

inline std::string metrics_to_text(std::span<const std::pair<std::string, EvalReport>> rows) {
    std::ostringstream os;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-12s %10s %10s %10s %10s\n", "method", "mae", "mse", "ar", "n");
    os << buf;
    for (const auto& [label, rep] : rows) {
        if (std::isfinite(rep.ar))
            std::snprintf(buf, sizeof buf, "%-12s %10.4f %10.4f %10.4f %10zu\n",
                          label.c_str(), rep.mae, rep.mse, rep.ar, rep.n);
        else
            std::snprintf(buf, sizeof buf, "%-12s %10.4f %10.4f %10s %10zu\n",
                          label.c_str(), rep.mae, rep.mse, "-", rep.n);
        os << buf;
    }
    return os.str();
}

/// ELBO trace CSV: check index and value, with the check interval noted.
inline std::string elbo_trace_to_csv(std::span<const double> trace, std::size_t check_every) {
    std::ostringstream os;
    os << "# first row is the initial state; later rows are checked every "
       << check_every << " iteration(s)\n";
    os << "check,elbo\n";
    for (std::size_t n = 0; n < trace.size(); ++n) {
        os << n << ',';
        detail::print_17g(os, trace[n]);
        os << '\n';
    }
    return os.str();
}

/// Cluster summary as an aligned text table.
inline std::string cluster_summary_to_text(std::span<const ClusterSummaryRow> rows,
                                           const std::string& side) {
    std::ostringstream os;
    char buf[128];
    os << side << " clusters\n";
    std::snprintf(buf, sizeof buf, "%-8s %8s %12s %10s\n", "cluster", "size", "mean_rating", "n_ratings");
    os << buf;
    for (const ClusterSummaryRow& r : rows) {
        std::snprintf(buf, sizeof buf, "%-8zu %8zu %12.4f %10zu\n",
                      r.cluster + 1, r.size, r.mean_rating, r.n_ratings);
        os << buf;
    }
    return os.str();
}

/// Bipartite edge list: one "u<id>\ti<id>\t<value>" line per rating.
/// Original ids are used when provided, dense indices otherwise.
inline void write_edge_list(std::ostream& os, const RatingDataset& data,
                            std::span<const std::int64_t> user_ids = {},
                            std::span<const std::int64_t> item_ids = {}) {
    for (const Rating& r : data.ratings()) {
        const std::int64_t u = user_ids.empty() ? static_cast<std::int64_t>(r.user) : user_ids[r.user];
        const std::int64_t i = item_ids.empty() ? static_cast<std::int64_t>(r.item) : item_ids[r.item];
        os << 'u' << u << '\t' << 'i' << i << '\t';
        detail::print_17g(os, data.scale().value(r.level));
        os << '\n';
    }
}

/// Ratings in loader format: user, item, value, zero timestamp.
inline void write_ratings(std::ostream& os, const RatingDataset& data) {
    for (const Rating& r : data.ratings()) {
        os << r.user << '\t' << r.item << '\t';
        detail::print_17g(os, data.scale().value(r.level));
        os << '\t' << 0 << '\n';
    }
}

/// Nearest scale value; exact midpoints resolve to the smaller value.
inline double round_to_scale(const RatingScale& scale, double v) {
    std::size_t best = 0;
    double best_dist = std::abs(v - scale.value(0));
    for (std::size_t s = 1; s < scale.size(); ++s) {
        const double d = std::abs(v - scale.value(s));
        if (d < best_dist) {
            best = s;
            best_dist = d;
        }
    }
    return scale.value(best);
}

}  // namespace bmm
