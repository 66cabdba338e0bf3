#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace tsccn::nn {

using Shape = std::vector<int>;

std::string shape_string(const Shape& shape);
std::size_t shape_volume(const Shape& shape);

// Dense row-major float tensor. Image batches use NCHW layout.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, float fill = 0.0f);
    Tensor(Shape shape, std::vector<float> values);

    const Shape& shape() const noexcept { return shape_; }
    int rank() const noexcept { return static_cast<int>(shape_.size()); }
    int dim(int axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    float* data() noexcept { return data_.data(); }
    const float* data() const noexcept { return data_.data(); }
    std::span<float> values() noexcept { return data_; }
    std::span<const float> values() const noexcept { return data_; }

    float& operator[](std::size_t i) { return data_[i]; }
    float operator[](std::size_t i) const { return data_[i]; }

    // 2-D / 4-D element access, bounds unchecked.
    float& at(int i, int j) { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }
    float at(int i, int j) const { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }
    float& at(int n, int c, int h, int w) {
        return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }
    float at(int n, int c, int h, int w) const {
        return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }

    void fill(float value);
    void add_(const Tensor& other);            // this += other
    void add_scaled_(const Tensor& other, float alpha);
    Tensor reshaped(Shape shape) const;

    bool all_finite() const;
    double squared_norm() const;

private:
    Shape shape_;
    std::vector<float> data_;
};

}  // namespace tsccn::nn
