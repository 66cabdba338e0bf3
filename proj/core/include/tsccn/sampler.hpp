#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "tsccn/data_model.hpp"
#include "tsccn/image.hpp"

namespace tsccn::sampler {

struct BatchSpec {
    int batch_size = 64;
    bool augment = true;
    bool oversample = true;

    void validate(bool triplet_mining) const;
    bool operator==(const BatchSpec&) const = default;
};

// Endless stream of manifest entry indices. With oversampling each draw picks
// a class uniformly and then an entry of that class uniformly (with
// replacement); without it the stream walks successive shuffled passes.
class IndexStream {
public:
    IndexStream(const data::DatasetManifest& manifest, const BatchSpec& spec, std::uint64_t seed);

    std::size_t next();
    std::vector<std::size_t> take(std::size_t count);

private:
    bool oversample_;
    std::mt19937_64 rng_;
    std::array<std::vector<std::size_t>, data::kNumClasses> by_class_;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
};

// Throws InvalidArgument when oversampling and some class is absent.
IndexStream oversampled_index_stream(const data::DatasetManifest& manifest, const BatchSpec& spec, std::uint64_t seed);

inline constexpr double kMaxRotationDegrees = 15.0;

struct AugmentParams {
    bool hflip = false;
    bool vflip = false;
    double angle_deg = 0.0;

    bool is_identity() const { return !hflip && !vflip && angle_deg == 0.0; }
};

AugmentParams draw_augment(std::uint64_t seed);
Image apply_augment(const Image& img, const AugmentParams& params);
Image augment(const Image& img, std::uint64_t seed);

struct TripletIndex {
    std::size_t anchor = 0;
    std::size_t positive = 0;
    std::size_t negative = 0;
    bool operator==(const TripletIndex&) const = default;
};

// Batch-hard mining over rows of `embeddings`. Only samples labelled 1 or 2
// participate; each eligible anchor gets its farthest same-class positive and
// nearest other-class negative (ties go to the lower index). Empty when the
// batch has no eligible anchor.
std::vector<TripletIndex> mine_triplets(const Eigen::MatrixXd& embeddings, std::span<const int> labels);

}  // namespace tsccn::sampler
