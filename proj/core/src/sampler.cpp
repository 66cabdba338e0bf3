#include "tsccn/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "tsccn/error.hpp"

namespace tsccn::sampler {

void BatchSpec::validate(bool triplet_mining) const {
    if (batch_size < 1) throw InvalidArgument("batch_size must be positive");
    if (triplet_mining && batch_size < 2) throw InvalidArgument("triplet mining needs batch_size >= 2");
}

IndexStream::IndexStream(const data::DatasetManifest& manifest, const BatchSpec& spec, std::uint64_t seed)
    : oversample_(spec.oversample), rng_(seed) {
    if (manifest.entries.empty()) throw InvalidArgument("index stream over an empty manifest");
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        const int label = manifest.entries[i].label;
        if (!data::is_valid_label(label)) throw InvalidArgument("manifest label outside {0,1,2}");
        by_class_[static_cast<std::size_t>(label)].push_back(i);
    }
    if (oversample_) {
        for (int k = 0; k < data::kNumClasses; ++k)
            if (by_class_[static_cast<std::size_t>(k)].empty())
                throw InvalidArgument("class " + std::to_string(k) + " absent from manifest; cannot oversample");
    } else {
        order_.resize(manifest.entries.size());
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        std::shuffle(order_.begin(), order_.end(), rng_);
    }
}

std::size_t IndexStream::next() {
    if (oversample_) {
        const auto k = std::uniform_int_distribution<std::size_t>(0, data::kNumClasses - 1)(rng_);
        const auto& pool = by_class_[k];
        return pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng_)];
    }
    if (cursor_ == order_.size()) {
        std::shuffle(order_.begin(), order_.end(), rng_);
        cursor_ = 0;
    }
    return order_[cursor_++];
}

std::vector<std::size_t> IndexStream::take(std::size_t count) {
    std::vector<std::size_t> out(count);
    for (auto& i : out) i = next();
    return out;
}

IndexStream oversampled_index_stream(const data::DatasetManifest& manifest, const BatchSpec& spec, std::uint64_t seed) {
    return IndexStream(manifest, spec, seed);
}

AugmentParams draw_augment(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(0.5);
    AugmentParams p;
    p.hflip = coin(rng);
    p.vflip = coin(rng);
    p.angle_deg = std::uniform_real_distribution<double>(-kMaxRotationDegrees, kMaxRotationDegrees)(rng);
    return p;
}

Image apply_augment(const Image& img, const AugmentParams& params) {
    Image out = img;
    if (params.hflip)
        for (int r = 0; r < out.rows; ++r)
            std::reverse(out.pixels.begin() + static_cast<std::ptrdiff_t>(r) * out.cols,
                         out.pixels.begin() + static_cast<std::ptrdiff_t>(r + 1) * out.cols);
    if (params.vflip)
        for (int r = 0; r < out.rows / 2; ++r)
            std::swap_ranges(out.pixels.begin() + static_cast<std::ptrdiff_t>(r) * out.cols,
                             out.pixels.begin() + static_cast<std::ptrdiff_t>(r + 1) * out.cols,
                             out.pixels.begin() + static_cast<std::ptrdiff_t>(out.rows - 1 - r) * out.cols);
    if (params.angle_deg != 0.0) {
        const Image src = out;
        const double theta = params.angle_deg * std::numbers::pi / 180.0;
        const double cs = std::cos(theta), sn = std::sin(theta);
        const double cr = (src.rows - 1) / 2.0, cc = (src.cols - 1) / 2.0;
        for (int r = 0; r < out.rows; ++r)
            for (int c = 0; c < out.cols; ++c) {
                // inverse rotation of the output pixel into the source
                const double dr = r - cr, dc = c - cc;
                const double sr = cs * dr + sn * dc + cr;
                const double sc = -sn * dr + cs * dc + cc;
                out.at(r, c) = sample_bilinear(src, sr, sc);
            }
    }
    clamp_unit(out);
    return out;
}

Image augment(const Image& img, std::uint64_t seed) { return apply_augment(img, draw_augment(seed)); }

std::vector<TripletIndex> mine_triplets(const Eigen::MatrixXd& embeddings, std::span<const int> labels) {
    if (static_cast<std::size_t>(embeddings.rows()) != labels.size())
        throw InvalidArgument("mine_triplets: embeddings and labels differ in length");
    std::vector<std::size_t> vcf;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == 1 || labels[i] == 2) vcf.push_back(i);

    std::vector<TripletIndex> out;
    for (std::size_t a : vcf) {
        double far_pos = -1.0, near_neg = std::numeric_limits<double>::infinity();
        std::size_t pos = a, neg = a;
        bool has_pos = false, has_neg = false;
        for (std::size_t j : vcf) {
            if (j == a) continue;
            const double d = (embeddings.row(static_cast<Eigen::Index>(a)) - embeddings.row(static_cast<Eigen::Index>(j)))
                                 .squaredNorm();
            if (labels[j] == labels[a]) {
                if (d > far_pos) {
                    far_pos = d;
                    pos = j;
                    has_pos = true;
                }
            } else if (d < near_neg) {
                near_neg = d;
                neg = j;
                has_neg = true;
            }
        }
        if (has_pos && has_neg) out.push_back({a, pos, neg});
    }
    return out;
}

}  // namespace tsccn::sampler
