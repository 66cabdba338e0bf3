#include "tsccn/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "tsccn/error.hpp"

namespace tsccn::nn {

std::string shape_string(const Shape& shape) {
    std::string out = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) out += ", ";
        out += std::to_string(shape[i]);
    }
    return out + ")";
}

std::size_t shape_volume(const Shape& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d < 0) throw InvalidArgument("negative dimension in shape " + shape_string(shape));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

Tensor::Tensor(Shape shape, float fill)
    : shape_(std::move(shape)), data_(shape_volume(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<float> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
    if (data_.size() != shape_volume(shape_))
        throw ShapeMismatch("tensor data size " + std::to_string(data_.size()) +
                            " does not match shape " + shape_string(shape_));
}

void Tensor::fill(float value) { std::fill(data_.begin(), data_.end(), value); }

void Tensor::add_(const Tensor& other) {
    if (other.shape_ != shape_)
        throw ShapeMismatch("add_: " + shape_string(shape_) + " vs " + shape_string(other.shape_));
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
}

void Tensor::add_scaled_(const Tensor& other, float alpha) {
    if (other.shape_ != shape_)
        throw ShapeMismatch("add_scaled_: " + shape_string(shape_) + " vs " +
                            shape_string(other.shape_));
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += alpha * other.data_[i];
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_volume(shape) != data_.size())
        throw ShapeMismatch("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

double Tensor::squared_norm() const {
    double s = 0.0;
    for (float v : data_) s += static_cast<double>(v) * v;
    return s;
}

}  // namespace tsccn::nn
