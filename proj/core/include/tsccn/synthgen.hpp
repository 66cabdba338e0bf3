#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tsccn/data_model.hpp"
#include "tsccn/image.hpp"
#include "tsccn/mask.hpp"

namespace tsccn::synth {

struct SynthConfig {
    int n_patients = 20;
    int slices_per_patient = 3;
    int vertebrae_per_slice = 8;
    std::array<double, 3> class_ratio{0.8, 0.12, 0.08};
    double noise_level = 0.02;  // std-dev of additive Gaussian noise, [0, 0.2]
    std::uint64_t seed = 0;
    int patch_side = data::kDefaultPatchSide;

    // Throws InvalidArgument on nonpositive counts, bad ratios or noise.
    void validate() const;
    bool operator==(const SynthConfig&) const = default;
};

// Ground-truth drawing parameters of one patch (debug sidecar only).
struct PatchParams {
    std::string patient_id;
    std::string slice_id;
    int position = 0;
    int label = 0;
    double body_height = 0.0;  // fraction of the patch side
    double body_width = 0.0;
    double intensity = 0.0;
    double collapse = 0.0;     // fractional height loss, 0 for intact bodies
    int texture_blobs = 0;
};

struct SynthDataset {
    std::vector<data::SpineSequence> sequences;
    data::DatasetManifest manifest;  // image_path of entry i names sequences' patch in generation order
    std::vector<PatchParams> params;  // parallel to manifest.entries
};

// Deterministic for a fixed config. Labels follow class_ratio by largest-remainder
// quota over all vertebrae (shuffled), shared across a patient's slices.
SynthDataset generate(const SynthConfig& cfg);

// Writes images/ (16-bit PGM), manifest.csv and generation.json under out_dir.
void write_dataset(const SynthDataset& ds, const std::filesystem::path& out_dir);

// ---- segmentation-mask fixtures -------------------------------------------

struct VertebraTruth {
    int position = 0;
    Box box;
    std::array<double, 2> centroid{};  // (row, col)
    std::size_t area = 0;
    BinaryMask footprint;  // slice-sized, this vertebra only (pre-corruption)
    bool deleted = false;
    bool shrunk = false;
};

// Which vertebrae of a slice lose or shrink their mask.
struct MaskCorruption {
    std::vector<int> deleted;
    std::vector<int> shrunk;
    double shrink_factor = 0.1;  // area scale of shrunk components
};

struct MaskFixture {
    std::string patient_id;
    std::string slice_id;
    Image slice;          // rendered sagittal column
    BinaryMask mask;      // corrupted coarse segmentation
    std::vector<VertebraTruth> truth;  // every vertebra, superior to inferior
};

// One fixture per (patient, slice). Every vertebra is drawn at intact geometry;
// the corruption is applied to every slice.
std::vector<MaskFixture> generate_masks(const SynthConfig& cfg, const MaskCorruption& corruption = {});

// Picks `count` pairwise non-adjacent interior positions in [1, n-2].
std::vector<int> pick_nonadjacent_interior(int n, int count, std::uint64_t seed);

void write_mask_fixtures(const std::vector<MaskFixture>& fixtures, const std::filesystem::path& out_dir);

}  // namespace tsccn::synth
