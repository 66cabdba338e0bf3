#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tsccn/image.hpp"

namespace tsccn::data {

inline constexpr int kNumClasses = 3;
inline constexpr int kDefaultPatchSide = 224;

// 0 = normal vertebra, 1 = benign VCF, 2 = malignant VCF.
enum class VertebraClass : int { Normal = 0, Benign = 1, Malignant = 2 };

bool is_valid_label(int label) noexcept;

// Normal -> 0, any fracture -> 1. Throws InvalidArgument for labels outside {0,1,2}.
int binarize_label(int label);

struct VertebraPatch {
    Image image;
    int label = 0;
    int position = 0;  // 0-based, superior to inferior
    std::string patient_id;

    // Throws InvalidArgument when the image is not side x side in [0,1] or the label is invalid.
    void validate(int side) const;
};

struct SpineSequence {
    std::vector<VertebraPatch> patches;
    std::string slice_id;

    const std::string& patient_id() const { return patches.front().patient_id; }
    // Non-empty, one patient, strictly increasing positions.
    void validate() const;
};

struct NeighborTriplet {
    Image x_p;
    Image x_c;
    Image x_n;
    int y_p = 0;
    int y_c = 0;
    int y_n = 0;
    int binary_p = 0;
    int binary_c = 0;
    int binary_n = 0;
};

// One triplet per patch; missing neighbours at either end replicate the centre.
std::vector<NeighborTriplet> extract_triplets(const SpineSequence& seq);

// Index form of extract_triplets: (previous, current, next) indices into seq.patches.
std::vector<std::array<std::size_t, 3>> triplet_indices(std::size_t sequence_length);

enum class Split { Train, Val, Test };
std::string to_string(Split split);
Split parse_split(const std::string& text);

struct ManifestEntry {
    std::string patient_id;
    std::string slice_id;
    int position = 0;
    std::string image_path;  // relative to the manifest directory
    int label = 0;

    bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    Split split = Split::Train;
    std::map<int, std::size_t> class_counts;
    std::filesystem::path base_dir;  // directory image paths resolve against

    // Recomputes class_counts from entries.
    void tally();
    std::filesystem::path resolve(const ManifestEntry& e) const { return base_dir / e.image_path; }
    std::vector<std::string> patient_ids() const;  // in first-appearance order
    DatasetManifest subset_by_patients(const std::vector<std::string>& patients, Split split) const;
};

inline constexpr const char* kManifestHeader = "patient_id,slice_id,position,image_path,label";

// Parses and validates a manifest. Errors carry the offending 1-based line.
DatasetManifest load_manifest(const std::filesystem::path& path, Split split = Split::Train);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

// Reads the entry's image, rescaled to [0,1]; resized to side x side when side > 0.
Image load_entry_image(const DatasetManifest& manifest, const ManifestEntry& entry, int side = 0);

// Groups entries into spine sequences (per patient and slice, sorted by
// position) with images loaded. entry_index[i][j] gives the manifest index
// of sequences[i].patches[j].
struct LoadedDataset {
    std::vector<SpineSequence> sequences;
    std::vector<std::vector<std::size_t>> entry_index;
};
LoadedDataset load_sequences(const DatasetManifest& manifest, int side);

}  // namespace tsccn::data
