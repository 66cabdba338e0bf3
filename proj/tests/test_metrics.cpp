#include <gtest/gtest.h>

#include <cmath>
#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "tsccn/error.hpp"
#include "tsccn/metrics.hpp"

namespace tsccn::metrics {
namespace {

namespace oracle = testing::oracle;

ConfusionState state_from(const std::vector<ScoredSample>& samples) {
    ConfusionState st;
    for (const auto& s : samples) accumulate(st, s.truth, s.predicted, s.scores);
    return st;
}

// Samples realizing a given confusion matrix, scores one-hot on the prediction.
ConfusionState state_from_counts(const std::array<std::array<int, 3>, 3>& counts) {
    ConfusionState st;
    for (int t = 0; t < 3; ++t)
        for (int p = 0; p < 3; ++p)
            for (int i = 0; i < counts[t][p]; ++i) {
                std::array<double, 3> s{};
                s[p] = 1.0;
                accumulate(st, t, p, s);
            }
    return st;
}

TEST(Accumulate, SingleIncrementAndConservation) {
    ConfusionState st;
    accumulate(st, 0, 0, std::array<double, 3>{0.9, 0.05, 0.05});
    EXPECT_EQ(st.counts[0][0], 1);
    for (int i = 0; i < 9; ++i) accumulate(st, i % 3, (i + 1) % 3, std::array<double, 3>{0.2, 0.3, 0.5});
    EXPECT_EQ(st.total(), 10);
    EXPECT_EQ(st.samples.size(), 10u);
}

TEST(Accumulate, RejectsBadInput) {
    ConfusionState st;
    EXPECT_THROW(accumulate(st, 3, 0, std::array<double, 3>{}), InvalidArgument);
    EXPECT_THROW(accumulate(st, 0, -1, std::array<double, 3>{}), InvalidArgument);
    EXPECT_THROW(accumulate(st, 0, 0, std::array<double, 3>{NAN, 0, 0}), InvalidArgument);
    EXPECT_THROW(accumulate(st, 0, 0, std::array<double, 3>{INFINITY, 0, 0}), InvalidArgument);
    EXPECT_THROW(accumulate(st, 0, 0, std::vector<double>{0.5, 0.5}), InvalidArgument);
    EXPECT_EQ(st.total(), 0);
}

TEST(PerClass, PerfectClassifier) {
    const auto rates = per_class_se_sp(state_from_counts({{{5, 0, 0}, {0, 3, 0}, {0, 0, 2}}}));
    for (const auto& r : rates) {
        EXPECT_EQ(*r.se, 1.0);
        EXPECT_EQ(*r.sp, 1.0);
    }
}

TEST(PerClass, OneVsRestTally) {
    const auto rates = per_class_se_sp(state_from_counts({{{8, 1, 1}, {2, 6, 2}, {1, 1, 8}}}));
    EXPECT_NEAR(*rates[0].se, 0.8, 1e-15);
    EXPECT_NEAR(*rates[0].sp, 17.0 / 20.0, 1e-15);
    EXPECT_NEAR(*rates[1].se, 0.6, 1e-15);
    EXPECT_NEAR(*rates[1].sp, 18.0 / 20.0, 1e-15);
}

TEST(PerClass, AbsentClassIsUndefined) {
    const auto st = state_from_counts({{{4, 1, 0}, {1, 3, 0}, {0, 0, 0}}});
    const auto rates = per_class_se_sp(st);
    EXPECT_FALSE(rates[2].se.has_value());
    EXPECT_TRUE(rates[2].sp.has_value());
    const auto m = macro_metrics(st);
    EXPECT_GE(m.undefined_components, 3);  // SE_2, AUC_2, AP_2
    const auto j = to_json(m, st);
    EXPECT_EQ(j["undefined_count"], m.undefined_components);
    EXPECT_TRUE(j["per_class"][2]["SE"].is_null());
}

TEST(Macro, PerfectRankingGivesOne) {
    std::vector<ScoredSample> s;
    for (int i = 0; i < 30; ++i) {
        ScoredSample x;
        x.truth = x.predicted = i % 3;
        x.scores = {0.1, 0.1, 0.1};
        x.scores[static_cast<std::size_t>(i % 3)] = 0.8;
        s.push_back(x);
    }
    const auto m = macro_metrics(state_from(s));
    EXPECT_EQ(m.aAUC, 1.0);
    EXPECT_EQ(m.mAP, 1.0);
    EXPECT_EQ(m.aSE, 1.0);
    EXPECT_EQ(m.accuracy, 1.0);
}

TEST(Macro, RandomScoresGiveChanceAuc) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ConfusionState st;
    for (int i = 0; i < 3000; ++i) {
        const std::array<double, 3> s{u(rng), u(rng), u(rng)};
        accumulate(st, i % 3, static_cast<int>(rng() % 3), s);
    }
    EXPECT_NEAR(macro_metrics(st).aAUC, 0.5, 0.05);
}

TEST(Macro, NothingDefinedIsNaN) {
    const auto m = macro_metrics(ConfusionState{});
    EXPECT_TRUE(std::isnan(m.aSE));
    EXPECT_TRUE(std::isnan(m.aAUC));
}

TEST(Auc, TiesCountHalf) {
    ConfusionState st;
    accumulate(st, 0, 0, std::array<double, 3>{0.5, 0.25, 0.25});
    accumulate(st, 1, 0, std::array<double, 3>{0.5, 0.25, 0.25});
    EXPECT_DOUBLE_EQ(*auc_one_vs_rest(st, 0), 0.5);
    EXPECT_FALSE(auc_one_vs_rest(st, 2).has_value());
    EXPECT_FALSE(average_precision(st, 2).has_value());
}

TEST(OracleEquivalence, RandomFixtures) {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const auto samples = oracle::random_fixture(rng);
        const auto st = state_from(samples);
        const auto rates = per_class_se_sp(st);
        const auto ref = oracle::se_sp(samples);
        for (int k = 0; k < 3; ++k) {
            ASSERT_EQ(rates[k].se.has_value(), ref[k].se.has_value());
            if (ref[k].se) {
                EXPECT_NEAR(*rates[k].se, *ref[k].se, 1e-9);
            }
            ASSERT_EQ(rates[k].sp.has_value(), ref[k].sp.has_value());
            if (ref[k].sp) {
                EXPECT_NEAR(*rates[k].sp, *ref[k].sp, 1e-9);
            }
            const auto a = auc_one_vs_rest(st, k), ra = oracle::auc(samples, k);
            ASSERT_EQ(a.has_value(), ra.has_value());
            if (ra) {
                EXPECT_NEAR(*a, *ra, 1e-9);
            }
            const auto p = average_precision(st, k), rp = oracle::ap(samples, k);
            ASSERT_EQ(p.has_value(), rp.has_value());
            if (rp) {
                EXPECT_NEAR(*p, *rp, 1e-9);
            }
        }
        const auto m = macro_metrics(st);
        const auto r = oracle::macro(samples);
        EXPECT_NEAR(m.aSE, r.aSE, 1e-9);
        EXPECT_NEAR(m.aSP, r.aSP, 1e-9);
        if (!std::isnan(r.aAUC)) {
            EXPECT_NEAR(m.aAUC, r.aAUC, 1e-9);
        }
        EXPECT_NEAR(m.mAP, r.mAP, 1e-9);
    }
}

TEST(Properties, PermutationInvariance) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        auto samples = oracle::random_fixture(rng);
        const auto a = macro_metrics(state_from(samples));
        std::shuffle(samples.begin(), samples.end(), rng);
        const auto b = macro_metrics(state_from(samples));
        EXPECT_DOUBLE_EQ(a.aSE, b.aSE);
        EXPECT_DOUBLE_EQ(a.aSP, b.aSP);
        if (!std::isnan(a.aAUC)) {
            EXPECT_NEAR(a.aAUC, b.aAUC, 1e-12);
        }
        EXPECT_NEAR(a.mAP, b.mAP, 1e-12);
    }
}

TEST(Properties, MonotoneScoreTransformKeepsAuc) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        auto samples = oracle::random_fixture(rng);
        const auto st = state_from(samples);
        for (auto& s : samples)
            for (auto& v : s.scores) v = std::exp(3.0 * v) + 0.5;
        const auto st2 = state_from(samples);
        for (int k = 0; k < 3; ++k) {
            const auto a = auc_one_vs_rest(st, k), b = auc_one_vs_rest(st2, k);
            ASSERT_EQ(a.has_value(), b.has_value());
            if (a) {
                EXPECT_NEAR(*a, *b, 1e-12);
            }
        }
    }
}

TEST(Properties, MergeIsAssociativeAndMatchesWhole) {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 30; ++trial) {
        const auto samples = oracle::random_fixture(rng);
        const std::size_t c1 = samples.size() / 3, c2 = 2 * samples.size() / 3;
        const auto part = [&](std::size_t lo, std::size_t hi) {
            return state_from(std::vector<ScoredSample>(samples.begin() + lo, samples.begin() + hi));
        };
        const auto a = part(0, c1), b = part(c1, c2), c = part(c2, samples.size());
        const auto left = merge(merge(a, b), c), right = merge(a, merge(b, c));
        EXPECT_EQ(left.counts, right.counts);
        const auto whole = macro_metrics(state_from(samples));
        const auto merged = macro_metrics(left);
        EXPECT_EQ(left.counts, state_from(samples).counts);
        EXPECT_DOUBLE_EQ(whole.aSE, merged.aSE);
        EXPECT_NEAR(whole.mAP, merged.mAP, 1e-12);
    }
}

TEST(Report, JsonHasConfusionMatrixAndMacro) {
    const auto st = state_from_counts({{{8, 1, 1}, {2, 6, 2}, {1, 1, 8}}});
    const auto j = to_json(macro_metrics(st), st);
    EXPECT_EQ(j["confusion_matrix"][1][0], 2);
    EXPECT_TRUE(j["macro"].contains("aSE"));
    EXPECT_EQ(j["samples"], 30);
}

}  // namespace
}  // namespace tsccn::metrics
