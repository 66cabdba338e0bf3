#pragma once

#include <cstdint>
#include <vector>

#include "tsccn/image.hpp"

namespace tsccn {

struct Box {
    int r0 = 0, c0 = 0, r1 = 0, c1 = 0;  // half-open [r0, r1) x [c0, c1)
    int height() const { return r1 - r0; }
    int width() const { return c1 - c0; }
    bool operator==(const Box&) const = default;
};

// Binary raster; nonzero = foreground.
struct BinaryMask {
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> data;

    BinaryMask() = default;
    BinaryMask(int rows, int cols) : rows(rows), cols(cols), data(static_cast<std::size_t>(rows) * cols, 0) {}
    std::uint8_t& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    std::uint8_t at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
    std::size_t count() const;
    bool operator==(const BinaryMask&) const = default;
};

BinaryMask mask_from_image(const Image& img, float threshold = 0.5f);
Image image_from_mask(const BinaryMask& mask);

// |a & b| / |a | b|; 0 when both are empty.
double iou(const BinaryMask& a, const BinaryMask& b);

}  // namespace tsccn
