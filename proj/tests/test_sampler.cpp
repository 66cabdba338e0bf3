#include <gtest/gtest.h>

#include "support.hpp"
#include "tsccn/error.hpp"
#include "tsccn/sampler.hpp"

namespace tsccn::sampler {
namespace {

data::DatasetManifest manifest_with_counts(std::array<int, 3> counts) {
    data::DatasetManifest m;
    int pos = 0;
    for (int k = 0; k < 3; ++k)
        for (int i = 0; i < counts[static_cast<std::size_t>(k)]; ++i)
            m.entries.push_back({"P", "S", pos++, "x.pgm", k});
    m.tally();
    return m;
}

std::array<double, 3> class_frequencies(IndexStream& s, const data::DatasetManifest& m, std::size_t draws) {
    std::array<double, 3> f{};
    for (std::size_t i = 0; i < draws; ++i) {
        const std::size_t idx = s.next();
        EXPECT_LT(idx, m.entries.size());
        f[static_cast<std::size_t>(m.entries[idx].label)] += 1.0 / static_cast<double>(draws);
    }
    return f;
}

TEST(Oversampling, ImbalancedCountsBecomeUniform) {
    const auto m = manifest_with_counts({400, 30, 20});
    auto s = oversampled_index_stream(m, {64, true, true}, 99);
    for (double f : class_frequencies(s, m, 30000)) {
        EXPECT_GE(f, 0.30);
        EXPECT_LE(f, 0.37);
    }
}

TEST(Oversampling, DisabledMatchesRawProportions) {
    const auto m = manifest_with_counts({400, 30, 20});
    auto s = oversampled_index_stream(m, {64, true, false}, 99);
    const auto f = class_frequencies(s, m, 30000);
    EXPECT_NEAR(f[0], 400.0 / 450.0, 0.03);
    EXPECT_NEAR(f[1], 30.0 / 450.0, 0.03);
    EXPECT_NEAR(f[2], 20.0 / 450.0, 0.03);
}

TEST(Oversampling, DisabledWalksFullPasses) {
    const auto m = manifest_with_counts({5, 3, 2});
    IndexStream s(m, {4, false, false}, 1);
    for (int pass = 0; pass < 3; ++pass) {
        auto idx = s.take(10);
        std::sort(idx.begin(), idx.end());
        for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(idx[i], i);
    }
}

TEST(Oversampling, DeterministicUnderSeed) {
    const auto m = manifest_with_counts({10, 10, 10});
    IndexStream a(m, {}, 5), b(m, {}, 5), c(m, {}, 6);
    const auto xa = a.take(200), xb = b.take(200), xc = c.take(200);
    EXPECT_EQ(xa, xb);
    EXPECT_NE(xa, xc);
}

TEST(Oversampling, AbsentClassIsAnError) {
    const auto m = manifest_with_counts({10, 0, 3});
    EXPECT_THROW(oversampled_index_stream(m, {}, 0), InvalidArgument);
    EXPECT_NO_THROW(oversampled_index_stream(m, {64, true, false}, 0));
}

TEST(BatchSpec, TripletMiningNeedsTwo) {
    EXPECT_THROW((BatchSpec{1, true, true}).validate(true), InvalidArgument);
    EXPECT_NO_THROW((BatchSpec{1, true, true}).validate(false));
    EXPECT_THROW((BatchSpec{0, true, true}).validate(false), InvalidArgument);
}

TEST(Augment, IdentityParamsReturnInput) {
    std::mt19937_64 rng(3);
    const Image img = testing::random_image(16, rng);
    EXPECT_EQ(apply_augment(img, {}), img);
}

TEST(Augment, DoubleFlipIsInvolution) {
    std::mt19937_64 rng(4);
    const Image img = testing::random_image(15, rng);
    for (AugmentParams p : {AugmentParams{true, false, 0.0}, AugmentParams{false, true, 0.0}, AugmentParams{true, true, 0.0}})
        EXPECT_EQ(apply_augment(apply_augment(img, p), p), img);
    const Image h = apply_augment(img, {true, false, 0.0});
    EXPECT_EQ(h.at(2, 0), img.at(2, 14));
    const Image v = apply_augment(img, {false, true, 0.0});
    EXPECT_EQ(v.at(0, 3), img.at(14, 3));
}

TEST(Augment, ConstantImageStaysConstantAwayFromBorder) {
    const Image img(21, 21, 0.6f);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Image out = augment(img, seed);
        // The inscribed disc never samples outside the source under rotation.
        for (int r = 0; r < 21; ++r)
            for (int c = 0; c < 21; ++c)
                if ((r - 10) * (r - 10) + (c - 10) * (c - 10) <= 64) {
                    EXPECT_NEAR(out.at(r, c), 0.6f, 1e-5);
                }
    }
}

TEST(Augment, PropertyShapeAndRange) {
    std::mt19937_64 rng(8);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const Image img = testing::random_image(12, rng);
        const Image out = augment(img, seed);
        EXPECT_EQ(out.rows, img.rows);
        EXPECT_EQ(out.cols, img.cols);
        EXPECT_TRUE(out.in_unit_range());
        const auto p = draw_augment(seed);
        EXPECT_LE(std::abs(p.angle_deg), kMaxRotationDegrees);
    }
}

TEST(Augment, DrawsCoverBothFlipOutcomes) {
    int h = 0, v = 0;
    const int n = 2000;
    for (int s = 0; s < n; ++s) {
        const auto p = draw_augment(static_cast<std::uint64_t>(s));
        h += p.hflip;
        v += p.vflip;
    }
    EXPECT_NEAR(h / double(n), 0.5, 0.05);
    EXPECT_NEAR(v / double(n), 0.5, 0.05);
}

TEST(MineTriplets, ForcedChoice) {
    Eigen::MatrixXd e(3, 2);
    e << 0, 0, 1, 0, 0, 1;
    const std::vector<int> y{1, 1, 2};
    const auto t = mine_triplets(e, y);
    ASSERT_EQ(t.size(), 2u);
    EXPECT_EQ(t[0], (TripletIndex{0, 1, 2}));
    EXPECT_EQ(t[1], (TripletIndex{1, 0, 2}));
}

TEST(MineTriplets, NoNegativesGivesEmpty) {
    Eigen::MatrixXd e = Eigen::MatrixXd::Random(3, 4);
    EXPECT_TRUE(mine_triplets(e, std::vector<int>{1, 1, 1}).empty());
    EXPECT_TRUE(mine_triplets(e, std::vector<int>{0, 0, 2}).empty());
}

TEST(MineTriplets, HardestByDistance) {
    Eigen::MatrixXd e(3, 2);
    e << 0, 0, 1, 0, 0.2, 0;
    const auto t = mine_triplets(e, std::vector<int>{1, 1, 2});
    ASSERT_FALSE(t.empty());
    EXPECT_EQ(t[0], (TripletIndex{0, 1, 2}));
}

TEST(MineTriplets, NormalsNeverParticipate) {
    Eigen::MatrixXd e(4, 1);
    e << 0, 5, 0.1, 0.05;
    const auto t = mine_triplets(e, std::vector<int>{1, 1, 2, 0});
    for (const auto& tr : t) EXPECT_NE(tr.negative, 3u);
}

// Brute-force oracle: scan every candidate, keep the extreme (lowest index on ties).
std::vector<TripletIndex> oracle_mine(const Eigen::MatrixXd& e, const std::vector<int>& y) {
    std::vector<TripletIndex> out;
    const auto n = static_cast<std::size_t>(e.rows());
    for (std::size_t a = 0; a < n; ++a) {
        if (y[a] == 0) continue;
        int pos = -1, neg = -1;
        double dp = 0, dn = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == a || y[j] == 0) continue;
            double d = 0;
            for (Eigen::Index c = 0; c < e.cols(); ++c) d += (e(a, c) - e(j, c)) * (e(a, c) - e(j, c));
            if (y[j] == y[a] && (pos < 0 || d > dp)) pos = static_cast<int>(j), dp = d;
            if (y[j] != y[a] && (neg < 0 || d < dn)) neg = static_cast<int>(j), dn = d;
        }
        if (pos >= 0 && neg >= 0) out.push_back({a, static_cast<std::size_t>(pos), static_cast<std::size_t>(neg)});
    }
    return out;
}

TEST(MineTriplets, PropertyMatchesOracleAndLabelRule) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        const auto n = static_cast<Eigen::Index>(2 + rng() % 14);
        const Eigen::MatrixXd e = testing::random_matrix(n, 1 + static_cast<Eigen::Index>(rng() % 5), rng);
        const auto y = testing::random_labels(static_cast<std::size_t>(n), rng);
        const auto t = mine_triplets(e, y);
        EXPECT_EQ(t, oracle_mine(e, y));
        for (const auto& tr : t) {
            EXPECT_EQ(y[tr.anchor], y[tr.positive]);
            EXPECT_NE(y[tr.anchor], y[tr.negative]);
            EXPECT_NE(y[tr.negative], 0);
            EXPECT_NE(tr.anchor, tr.positive);
        }
    }
}

}  // namespace
}  // namespace tsccn::sampler
