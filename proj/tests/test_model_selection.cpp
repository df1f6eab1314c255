#include <algorithm>
#include <set>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "bmm/model_selection.hpp"
#include "bmm/simulate.hpp"

using Catch::Approx;

namespace {

bmm::RatingDataset small_synthetic(std::uint64_t seed) {
    auto sc = bmm::builtin_scenario(5);
    sc.n_users = 30;
    sc.n_items = 20;
    sc.eta = 1.0;
    sc.seed = seed;
    return bmm::generate(sc).observed;
}

}  // namespace

TEST_CASE("fold splitting partitions the ratings") {
    const auto data = small_synthetic(3);
    const auto folds = bmm::split_folds(data, 4, 17);
    REQUIRE(folds.size() == 4);
    std::size_t total_test = 0;
    std::multiset<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>> seen;
    for (const auto& fold : folds) {
        CHECK(fold.train.size() + fold.test.size() == data.size());
        CHECK(fold.train.n_users() == data.n_users());
        CHECK(fold.train.n_items() == data.n_items());
        total_test += fold.test.size();
        for (const auto& r : fold.test.ratings()) seen.insert({r.user, r.item, r.level});
    }
    CHECK(total_test == data.size());
    CHECK(seen.size() == data.size());
    // Fold sizes differ by at most one.
    std::vector<std::size_t> sizes;
    for (const auto& fold : folds) sizes.push_back(fold.test.size());
    CHECK(*std::max_element(sizes.begin(), sizes.end()) -
              *std::min_element(sizes.begin(), sizes.end()) <= 1);
}

TEST_CASE("fold splitting is deterministic in its seed") {
    const auto data = small_synthetic(4);
    const auto a = bmm::split_folds(data, 3, 5);
    const auto b = bmm::split_folds(data, 3, 5);
    for (std::size_t f = 0; f < 3; ++f) {
        CHECK(a[f].test.ratings().size() == b[f].test.ratings().size());
        for (std::size_t r = 0; r < a[f].test.size(); ++r) {
            CHECK(a[f].test.ratings()[r].user == b[f].test.ratings()[r].user);
            CHECK(a[f].test.ratings()[r].item == b[f].test.ratings()[r].item);
        }
    }
}

TEST_CASE("fold splitting rejects impossible fold counts") {
    const auto data = small_synthetic(5);
    CHECK_THROWS_AS(bmm::split_folds(data, 1, 0), std::invalid_argument);
    CHECK_THROWS_AS(bmm::split_folds(data, data.size() + 1, 0), std::invalid_argument);
}

TEST_CASE("cross validation scores every candidate on every fold") {
    const auto data = small_synthetic(6);
    bmm::CvPlan plan;
    plan.n_folds = 3;
    plan.candidates = {{1, 1}, {2, 2}};
    plan.seed = 11;
    bmm::ModelConfig tmpl;
    tmpl.max_iters = 40;
    tmpl.rel_tol = 1e-4;
    const auto result = bmm::cross_validate(data, plan, tmpl);
    REQUIRE(result.rows.size() == 2);
    double best = 1e300;
    for (const auto& row : result.rows) {
        REQUIRE(row.fold_mae.size() == 3);
        double mean = 0.0;
        for (double m : row.fold_mae) mean += m;
        mean /= 3.0;
        CHECK(row.mean_mae == Approx(mean).epsilon(1e-12));
        best = std::min(best, row.mean_mae);
    }
    CHECK(result.rows.at(result.selected).mean_mae == Approx(best));
    const auto [K, L] = result.selected_candidate();
    CHECK(K == result.rows.at(result.selected).K);
    CHECK(L == result.rows.at(result.selected).L);
}

TEST_CASE("cross validation is reproducible") {
    const auto data = small_synthetic(7);
    bmm::CvPlan plan;
    plan.n_folds = 2;
    plan.candidates = {{2, 2}};
    plan.seed = 19;
    bmm::ModelConfig tmpl;
    tmpl.max_iters = 30;
    const auto a = bmm::cross_validate(data, plan, tmpl);
    const auto b = bmm::cross_validate(data, plan, tmpl);
    REQUIRE(a.rows.size() == b.rows.size());
    CHECK(a.rows[0].fold_mae == b.rows[0].fold_mae);
    CHECK(a.selected == b.selected);
}

TEST_CASE("cross validation validates its plan") {
    const auto data = small_synthetic(8);
    bmm::CvPlan plan;
    plan.candidates = {};
    CHECK_THROWS_AS(bmm::cross_validate(data, plan, {}), std::invalid_argument);
    plan.candidates = {{0, 1}};
    plan.n_folds = 2;
    CHECK_THROWS_AS(bmm::cross_validate(data, plan, {}), std::invalid_argument);
}

TEST_CASE("cross validation table serializes with fold columns") {
    bmm::CvResult result;
    result.rows.push_back({2, 3, 0.5, {0.4, 0.6}});
    result.rows.push_back({3, 3, 0.7, {0.7, 0.7}});
    result.selected = 0;
    const std::string csv = bmm::cv_to_csv(result);
    CHECK(csv.find("K,L,mean_mae") != std::string::npos);
    CHECK(csv.find("2,3,") != std::string::npos);
    CHECK(csv.find("selected") != std::string::npos);
}
