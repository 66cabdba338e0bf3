#include "tsccn/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "tsccn/error.hpp"

namespace tsccn {

Image::Image(int rows, int cols, float fill)
    : rows(rows), cols(cols), pixels(static_cast<std::size_t>(rows) * cols, fill) {
    if (rows < 0 || cols < 0) throw InvalidArgument("negative image size");
}

bool Image::in_unit_range() const {
    return std::all_of(pixels.begin(), pixels.end(), [](float v) { return v >= 0.0f && v <= 1.0f; });
}

float sample_bilinear(const Image& img, double r, double c) {
    const int r0 = static_cast<int>(std::floor(r));
    const int c0 = static_cast<int>(std::floor(c));
    const double fr = r - r0;
    const double fc = c - c0;
    auto px = [&](int rr, int cc) -> double {
        if (rr < 0 || rr >= img.rows || cc < 0 || cc >= img.cols) return 0.0;
        return img.at(rr, cc);
    };
    const double v = (1 - fr) * ((1 - fc) * px(r0, c0) + fc * px(r0, c0 + 1)) +
                     fr * ((1 - fc) * px(r0 + 1, c0) + fc * px(r0 + 1, c0 + 1));
    return static_cast<float>(v);
}

Image resize_bilinear(const Image& img, int rows, int cols) {
    if (img.empty()) throw InvalidArgument("resize of empty image");
    if (rows <= 0 || cols <= 0) throw InvalidArgument("resize target must be positive");
    if (rows == img.rows && cols == img.cols) return img;
    Image out(rows, cols);
    const double sr = static_cast<double>(img.rows) / rows;
    const double sc = static_cast<double>(img.cols) / cols;
    for (int r = 0; r < rows; ++r) {
        const double src_r = std::clamp((r + 0.5) * sr - 0.5, 0.0, static_cast<double>(img.rows - 1));
        for (int c = 0; c < cols; ++c) {
            const double src_c = std::clamp((c + 0.5) * sc - 0.5, 0.0, static_cast<double>(img.cols - 1));
            out.at(r, c) = sample_bilinear(img, src_r, src_c);
        }
    }
    return out;
}

void clamp_unit(Image& img) {
    for (float& v : img.pixels) v = std::clamp(v, 0.0f, 1.0f);
}

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in) {
    std::string tok;
    while (in) {
        int ch = in.peek();
        if (ch == '#') {
            std::string comment;
            std::getline(in, comment);
        } else if (std::isspace(ch)) {
            in.get();
        } else {
            break;
        }
    }
    in >> tok;
    return tok;
}

}  // namespace

Image read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image '" + path.string() + "'");
    if (next_token(in) != "P5") throw IoError("'" + path.string() + "' is not a binary PGM (P5)");
    int cols = 0, rows = 0, maxval = 0;
    try {
        cols = std::stoi(next_token(in));
        rows = std::stoi(next_token(in));
        maxval = std::stoi(next_token(in));
    } catch (const std::exception&) {
        throw IoError("malformed PGM header in '" + path.string() + "'");
    }
    if (cols <= 0 || rows <= 0 || maxval <= 0 || maxval > 65535)
        throw IoError("invalid PGM header in '" + path.string() + "'");
    in.get();  // single whitespace after maxval

    Image img(rows, cols);
    const std::size_t n = img.pixels.size();
    const float scale = 1.0f / static_cast<float>(maxval);
    if (maxval < 256) {
        std::vector<unsigned char> raw(n);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n));
        if (in.gcount() != static_cast<std::streamsize>(n)) throw IoError("truncated PGM '" + path.string() + "'");
        for (std::size_t i = 0; i < n; ++i) img.pixels[i] = std::min(1.0f, raw[i] * scale);
    } else {
        std::vector<unsigned char> raw(2 * n);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(2 * n));
        if (in.gcount() != static_cast<std::streamsize>(2 * n)) throw IoError("truncated PGM '" + path.string() + "'");
        for (std::size_t i = 0; i < n; ++i)
            img.pixels[i] = std::min(1.0f, static_cast<float>((raw[2 * i] << 8) | raw[2 * i + 1]) * scale);
    }
    return img;
}

void write_pgm(const std::filesystem::path& path, const Image& img, int bit_depth) {
    if (bit_depth != 8 && bit_depth != 16) throw InvalidArgument("PGM bit depth must be 8 or 16");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write image '" + path.string() + "'");
    const int maxval = bit_depth == 8 ? 255 : 65535;
    out << "P5\n" << img.cols << " " << img.rows << "\n" << maxval << "\n";
    std::vector<unsigned char> raw;
    raw.reserve(img.pixels.size() * (bit_depth / 8));
    for (float v : img.pixels) {
        const auto q = static_cast<unsigned>(std::lround(std::clamp(v, 0.0f, 1.0f) * maxval));
        if (bit_depth == 16) raw.push_back(static_cast<unsigned char>(q >> 8));
        raw.push_back(static_cast<unsigned char>(q & 0xff));
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw IoError("failed writing image '" + path.string() + "'");
}

RgbImage::RgbImage(int rows, int cols, std::uint8_t fill)
    : rows(rows), cols(cols), rgb(static_cast<std::size_t>(rows) * cols * 3, fill) {}

void RgbImage::set(int r, int c, std::uint8_t red, std::uint8_t green, std::uint8_t blue) {
    if (r < 0 || r >= rows || c < 0 || c >= cols) return;
    const std::size_t i = (static_cast<std::size_t>(r) * cols + c) * 3;
    rgb[i] = red;
    rgb[i + 1] = green;
    rgb[i + 2] = blue;
}

void write_ppm(const std::filesystem::path& path, const RgbImage& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write image '" + path.string() + "'");
    out << "P6\n" << img.cols << " " << img.rows << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
}

}  // namespace tsccn
