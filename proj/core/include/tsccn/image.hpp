#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace tsccn {

// Single-channel float raster, row-major, nominal range [0, 1].
struct Image {
    int rows = 0;
    int cols = 0;
    std::vector<float> pixels;

    Image() = default;
    Image(int rows, int cols, float fill = 0.0f);

    float& at(int r, int c) { return pixels[static_cast<std::size_t>(r) * cols + c]; }
    float at(int r, int c) const { return pixels[static_cast<std::size_t>(r) * cols + c]; }
    bool empty() const noexcept { return pixels.empty(); }
    bool is_square() const noexcept { return rows == cols; }
    bool in_unit_range() const;

    bool operator==(const Image&) const = default;
};

// Bilinear sample with zero outside the image.
float sample_bilinear(const Image& img, double r, double c);

// Resize with bilinear interpolation (pixel-center aligned).
Image resize_bilinear(const Image& img, int rows, int cols);

void clamp_unit(Image& img);

// Binary PGM (P5). Reading rescales by maxval into [0, 1]; 16-bit samples are
// big-endian per the format.
Image read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Image& img, int bit_depth = 8);

// Colour raster for plots, written as binary PPM (P6).
struct RgbImage {
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> rgb;  // 3 bytes per pixel

    RgbImage(int rows, int cols, std::uint8_t fill = 255);
    void set(int r, int c, std::uint8_t red, std::uint8_t green, std::uint8_t blue);
};

void write_ppm(const std::filesystem::path& path, const RgbImage& img);

}  // namespace tsccn
