#pragma once

#include <Eigen/Core>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "tsccn/data_model.hpp"
#include "tsccn/image.hpp"
#include "tsccn/nn/tensor.hpp"

namespace tsccn::testing {

// Fresh scratch directory under the system temp dir, removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "t") {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("tsccn_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline Image random_image(int side, std::mt19937_64& rng) {
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    Image img(side, side);
    for (auto& p : img.pixels) p = u(rng);
    return img;
}

inline nn::Tensor random_tensor(const nn::Shape& shape, std::mt19937_64& rng, float lo = -1.0f, float hi = 1.0f) {
    std::uniform_real_distribution<float> u(lo, hi);
    nn::Tensor t(shape);
    for (auto& v : t.values()) v = u(rng);
    return t;
}

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 2.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    return m;
}

inline std::vector<int> random_labels(std::size_t n, std::mt19937_64& rng, int classes = 3) {
    std::uniform_int_distribution<int> u(0, classes - 1);
    std::vector<int> y(n);
    for (auto& v : y) v = u(rng);
    return y;
}

// Sequence with constant-intensity patches so images are distinguishable by value.
inline data::SpineSequence tagged_sequence(const std::string& patient, const std::vector<int>& labels, int side = 8) {
    data::SpineSequence seq;
    seq.slice_id = "S0";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        data::VertebraPatch p;
        p.image = Image(side, side, static_cast<float>(i + 1) / static_cast<float>(labels.size() + 1));
        p.label = labels[i];
        p.position = static_cast<int>(i);
        p.patient_id = patient;
        seq.patches.push_back(std::move(p));
    }
    return seq;
}

}  // namespace tsccn::testing
