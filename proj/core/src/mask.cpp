#include "tsccn/mask.hpp"

#include <algorithm>

#include "tsccn/error.hpp"

namespace tsccn {

std::size_t BinaryMask::count() const {
    return static_cast<std::size_t>(std::count_if(data.begin(), data.end(), [](std::uint8_t v) { return v != 0; }));
}

BinaryMask mask_from_image(const Image& img, float threshold) {
    BinaryMask m(img.rows, img.cols);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) m.data[i] = img.pixels[i] >= threshold ? 1 : 0;
    return m;
}

Image image_from_mask(const BinaryMask& mask) {
    Image img(mask.rows, mask.cols);
    for (std::size_t i = 0; i < mask.data.size(); ++i) img.pixels[i] = mask.data[i] ? 1.0f : 0.0f;
    return img;
}

double iou(const BinaryMask& a, const BinaryMask& b) {
    if (a.rows != b.rows || a.cols != b.cols) throw ShapeMismatch("iou: mask sizes differ");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const bool x = a.data[i] != 0, y = b.data[i] != 0;
        inter += (x && y) ? 1 : 0;
        uni += (x || y) ? 1 : 0;
    }
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace tsccn
