#include <gtest/gtest.h>

#include <fstream>

#include "support.hpp"
#include "tsccn/data_model.hpp"
#include "tsccn/error.hpp"

namespace tsccn::data {
namespace {

using testing::TempDir;
using testing::tagged_sequence;

// Pixel value identifies which patch an image came from.
float tag(const Image& img) { return img.pixels.front(); }

TEST(BinarizeLabel, MapsNormalToZeroAndFracturesToOne) {
    EXPECT_EQ(binarize_label(0), 0);
    EXPECT_EQ(binarize_label(1), 1);
    EXPECT_EQ(binarize_label(2), 1);
}

TEST(BinarizeLabel, RejectsOutOfRange) {
    EXPECT_THROW(binarize_label(3), InvalidArgument);
    EXPECT_THROW(binarize_label(-1), InvalidArgument);
}

TEST(BinarizeLabel, ZeroIffNormal) {
    for (int y = 0; y < kNumClasses; ++y) EXPECT_EQ(binarize_label(y) == 0, y == 0);
}

TEST(ExtractTriplets, ThreePatchesReplicateAtEnds) {
    const auto seq = tagged_sequence("P", {0, 1, 2});
    const float a = tag(seq.patches[0].image), b = tag(seq.patches[1].image), c = tag(seq.patches[2].image);
    const auto t = extract_triplets(seq);
    ASSERT_EQ(t.size(), 3u);
    const float expected[3][3] = {{a, a, b}, {a, b, c}, {b, c, c}};
    for (int i = 0; i < 3; ++i) {
        EXPECT_EQ(tag(t[i].x_p), expected[i][0]);
        EXPECT_EQ(tag(t[i].x_c), expected[i][1]);
        EXPECT_EQ(tag(t[i].x_n), expected[i][2]);
    }
    EXPECT_EQ(t[0].y_p, 0);
    EXPECT_EQ(t[2].y_n, 2);
    EXPECT_EQ(t[1].binary_c, 1);
    EXPECT_EQ(t[0].binary_c, 0);
}

TEST(ExtractTriplets, SingleAndPair) {
    const auto one = extract_triplets(tagged_sequence("P", {1}));
    ASSERT_EQ(one.size(), 1u);
    EXPECT_EQ(tag(one[0].x_p), tag(one[0].x_c));
    EXPECT_EQ(tag(one[0].x_n), tag(one[0].x_c));

    const auto seq = tagged_sequence("P", {0, 0});
    const float a = tag(seq.patches[0].image), b = tag(seq.patches[1].image);
    const auto two = extract_triplets(seq);
    ASSERT_EQ(two.size(), 2u);
    EXPECT_EQ(tag(two[0].x_p), a);
    EXPECT_EQ(tag(two[0].x_n), b);
    EXPECT_EQ(tag(two[1].x_p), a);
    EXPECT_EQ(tag(two[1].x_n), b);
}

TEST(ExtractTriplets, PropertyCountAndCentreMultiset) {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng() % 12;
        const auto seq = tagged_sequence("P", testing::random_labels(n, rng));
        const auto t = extract_triplets(seq);
        ASSERT_EQ(t.size(), n);
        std::vector<float> centres, images;
        for (const auto& tr : t) centres.push_back(tag(tr.x_c));
        for (const auto& p : seq.patches) images.push_back(tag(p.image));
        std::sort(centres.begin(), centres.end());
        std::sort(images.begin(), images.end());
        EXPECT_EQ(centres, images);
        for (const auto& tr : t) {
            EXPECT_EQ(tr.binary_p == 0, tr.y_p == 0);
            EXPECT_EQ(tr.binary_c == 0, tr.y_c == 0);
            EXPECT_EQ(tr.binary_n == 0, tr.y_n == 0);
        }
    }
}

TEST(ExtractTriplets, EmptySequenceThrows) { EXPECT_THROW(extract_triplets(SpineSequence{}), InvalidArgument); }

TEST(SpineSequence, ValidateRejectsBadPositions) {
    auto seq = tagged_sequence("P", {0, 0, 0});
    EXPECT_NO_THROW(seq.validate());
    seq.patches[2].position = 1;
    EXPECT_THROW(seq.validate(), InvalidArgument);
    seq.patches[2].position = 2;
    seq.patches[1].patient_id = "Q";
    EXPECT_THROW(seq.validate(), InvalidArgument);
}

TEST(VertebraPatch, ValidateChecksShapeRangeLabel) {
    VertebraPatch p;
    p.image = Image(4, 4, 0.5f);
    EXPECT_NO_THROW(p.validate(4));
    EXPECT_THROW(p.validate(5), InvalidArgument);
    p.image.at(0, 0) = 1.5f;
    EXPECT_THROW(p.validate(4), InvalidArgument);
    p.image.at(0, 0) = 0.5f;
    p.label = 3;
    EXPECT_THROW(p.validate(4), InvalidArgument);
}

void write_text(const std::filesystem::path& path, const std::string& text) { std::ofstream(path) << text; }

TEST(Manifest, ClassCountsTally) {
    TempDir dir("manifest");
    std::string text = std::string(kManifestHeader) + "\n";
    const int labels[] = {0, 0, 0, 0, 1, 2};
    for (int i = 0; i < 6; ++i)
        text += "P0,S0," + std::to_string(i) + ",img" + std::to_string(i) + ".pgm," + std::to_string(labels[i]) + "\n";
    write_text(dir / "m.csv", text);
    const auto m = load_manifest(dir / "m.csv");
    EXPECT_EQ(m.entries.size(), 6u);
    EXPECT_EQ(m.class_counts.at(0), 4u);
    EXPECT_EQ(m.class_counts.at(1), 1u);
    EXPECT_EQ(m.class_counts.at(2), 1u);
    EXPECT_EQ(m.base_dir, dir.path());
}

TEST(Manifest, EmptyFileIsAnError) {
    TempDir dir("manifest");
    write_text(dir / "m.csv", "");
    try {
        load_manifest(dir / "m.csv");
        FAIL() << "expected ManifestError";
    } catch (const ManifestError& e) {
        EXPECT_NE(std::string(e.what()).find("empty manifest"), std::string::npos);
    }
    write_text(dir / "h.csv", std::string(kManifestHeader) + "\n");
    EXPECT_THROW(load_manifest(dir / "h.csv"), ManifestError);
}

TEST(Manifest, BadLabelNamesTheRow) {
    TempDir dir("manifest");
    write_text(dir / "m.csv", std::string(kManifestHeader) + "\nP,S,0,a.pgm,0\nP,S,1,b.pgm,3\n");
    try {
        load_manifest(dir / "m.csv");
        FAIL() << "expected ManifestError";
    } catch (const ManifestError& e) {
        EXPECT_EQ(e.row(), 3u);
        EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos);
    }
}

TEST(Manifest, DuplicateAndMalformedRows) {
    TempDir dir("manifest");
    write_text(dir / "dup.csv", std::string(kManifestHeader) + "\nP,S,0,a.pgm,0\nP,S,0,b.pgm,1\n");
    try {
        load_manifest(dir / "dup.csv");
        FAIL();
    } catch (const ManifestError& e) {
        EXPECT_EQ(e.row(), 3u);
    }
    write_text(dir / "short.csv", std::string(kManifestHeader) + "\nP,S,0,a.pgm\n");
    EXPECT_THROW(load_manifest(dir / "short.csv"), ManifestError);
    write_text(dir / "nan.csv", std::string(kManifestHeader) + "\nP,S,x,a.pgm,0\n");
    EXPECT_THROW(load_manifest(dir / "nan.csv"), ManifestError);
    EXPECT_THROW(load_manifest(dir / "missing.csv"), ManifestError);
}

TEST(Manifest, RoundTripProperty) {
    TempDir dir("manifest");
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        DatasetManifest m;
        const int patients = 1 + static_cast<int>(rng() % 4);
        for (int p = 0; p < patients; ++p)
            for (int pos = 0; pos < 1 + static_cast<int>(rng() % 5); ++pos)
                m.entries.push_back({"P" + std::to_string(p), "S" + std::to_string(rng() % 2), pos,
                                     "images/x" + std::to_string(p) + "_" + std::to_string(pos) + ".pgm",
                                     static_cast<int>(rng() % 3)});
        // Same (patient, slice, position) may repeat across the random slice draw; keep unique.
        std::sort(m.entries.begin(), m.entries.end(), [](const auto& a, const auto& b) {
            return std::tie(a.patient_id, a.slice_id, a.position) < std::tie(b.patient_id, b.slice_id, b.position);
        });
        m.entries.erase(std::unique(m.entries.begin(), m.entries.end(),
                                    [](const auto& a, const auto& b) {
                                        return a.patient_id == b.patient_id && a.slice_id == b.slice_id &&
                                               a.position == b.position;
                                    }),
                        m.entries.end());
        m.tally();
        write_manifest(dir / "rt.csv", m);
        const auto back = load_manifest(dir / "rt.csv");
        EXPECT_EQ(back.entries, m.entries);
        EXPECT_EQ(back.class_counts, m.class_counts);
    }
}

TEST(Manifest, SubsetByPatients) {
    DatasetManifest m;
    m.entries = {{"A", "S", 0, "a", 0}, {"B", "S", 0, "b", 1}, {"A", "S", 1, "c", 2}};
    m.tally();
    EXPECT_EQ(m.patient_ids(), (std::vector<std::string>{"A", "B"}));
    const auto sub = m.subset_by_patients({"A"}, Split::Val);
    EXPECT_EQ(sub.entries.size(), 2u);
    EXPECT_EQ(sub.split, Split::Val);
    EXPECT_EQ(sub.class_counts.at(2), 1u);
}

TEST(Split, ParseAndPrint) {
    for (Split s : {Split::Train, Split::Val, Split::Test}) EXPECT_EQ(parse_split(to_string(s)), s);
    EXPECT_THROW(parse_split("holdout"), InvalidArgument);
}

TEST(TripletIndices, MatchesReplicationRule) {
    const auto idx = triplet_indices(3);
    ASSERT_EQ(idx.size(), 3u);
    EXPECT_EQ(idx[0], (std::array<std::size_t, 3>{0, 0, 1}));
    EXPECT_EQ(idx[1], (std::array<std::size_t, 3>{0, 1, 2}));
    EXPECT_EQ(idx[2], (std::array<std::size_t, 3>{1, 2, 2}));
}

TEST(LoadSequences, ReadsImagesAndGroups) {
    TempDir dir("seq");
    DatasetManifest m;
    std::filesystem::create_directories(dir / "images");
    for (int i = 0; i < 3; ++i) {
        const std::string rel = "images/p" + std::to_string(i) + ".pgm";
        write_pgm(dir / rel, Image(6, 6, 0.25f * static_cast<float>(i)), 16);
        m.entries.push_back({"P", "S", 2 - i, rel, i});
    }
    m.tally();
    write_manifest(dir / "m.csv", m);
    const auto loaded = load_sequences(load_manifest(dir / "m.csv"), 4);
    ASSERT_EQ(loaded.sequences.size(), 1u);
    const auto& seq = loaded.sequences[0];
    ASSERT_EQ(seq.patches.size(), 3u);
    EXPECT_EQ(seq.patches[0].position, 0);
    EXPECT_EQ(seq.patches[0].label, 2);
    EXPECT_EQ(loaded.entry_index[0], (std::vector<std::size_t>{2, 1, 0}));
    EXPECT_EQ(seq.patches[0].image.rows, 4);
    EXPECT_NEAR(seq.patches[0].image.at(1, 1), 0.5f, 1e-4);
}

}  // namespace
}  // namespace tsccn::data
