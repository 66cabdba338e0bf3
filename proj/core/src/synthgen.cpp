#include "tsccn/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>

#include "tsccn/error.hpp"

namespace tsccn::synth {

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

// Convex quadrilateral with corners in (row, col), clockwise from top-left.
struct Quad {
    std::array<std::array<double, 2>, 4> pts;

    bool contains(double r, double c) const {
        bool pos = false, neg = false;
        for (int i = 0; i < 4; ++i) {
            const auto& a = pts[i];
            const auto& b = pts[(i + 1) % 4];
            const double cross = (b[1] - a[1]) * (r - a[0]) - (b[0] - a[0]) * (c - a[1]);
            pos = pos || cross > 0;
            neg = neg || cross < 0;
        }
        return !(pos && neg);
    }
};

// Vertebral body: flat inferior endplate, superior endplate lowered by
// collapse (optionally wedged), centred at (cr, cc).
Quad body_quad(double cr, double cc, double height, double width, double wedge) {
    const double bottom = cr + height / 2.0;
    const double left_h = height * (1.0 - wedge);
    const double right_h = height * (1.0 + wedge);
    return Quad{{{{bottom - left_h, cc - width / 2.0},
                  {bottom - right_h, cc + width / 2.0},
                  {bottom, cc + width / 2.0},
                  {bottom, cc - width / 2.0}}}};
}

struct Blob {
    double dr, dc;  // offset from body centre, fraction of body height / width
    double radius;  // fraction of patch side
    double delta;   // intensity offset
};

struct VertebraSpec {
    int label = 0;
    double height = 0.0;
    double width = 0.0;
    double intensity = 0.0;
    double collapse = 0.0;
    double wedge = 0.0;
    std::vector<Blob> blobs;
};

std::vector<int> quota_labels(const std::array<double, 3>& ratio, int total, Rng& rng) {
    std::array<int, 3> counts{};
    std::array<double, 3> frac{};
    int assigned = 0;
    for (int k = 0; k < 3; ++k) {
        const double exact = ratio[k] * total;
        counts[k] = static_cast<int>(std::floor(exact));
        frac[k] = exact - counts[k];
        assigned += counts[k];
    }
    std::array<int, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return frac[a] > frac[b]; });
    for (int i = 0; assigned < total; ++i, ++assigned) ++counts[order[i % 3]];
    std::vector<int> labels;
    labels.reserve(total);
    for (int k = 0; k < 3; ++k) labels.insert(labels.end(), counts[k], k);
    std::shuffle(labels.begin(), labels.end(), rng);
    return labels;
}

Image render_patch(const VertebraSpec& v, int side, double background, double width_scale, double intensity_shift,
                   double centre_jitter_r, double centre_jitter_c, double noise, Rng& rng) {
    const double s = side;
    const double height = v.height * (1.0 - v.collapse) * s;
    const double width = v.width * width_scale * s;
    const double cr = s / 2.0 + centre_jitter_r * s;
    const double cc = s / 2.0 + centre_jitter_c * s;
    const Quad q = body_quad(cr, cc, height, width, v.wedge);
    const double body = std::clamp(v.intensity + intensity_shift, 0.0, 1.0);

    Image img(side, side);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int r = 0; r < side; ++r) {
        for (int c = 0; c < side; ++c) {
            int inside = 0;
            for (int sr = 0; sr < 2; ++sr)
                for (int sc = 0; sc < 2; ++sc) inside += q.contains(r + 0.25 + 0.5 * sr, c + 0.25 + 0.5 * sc) ? 1 : 0;
            double value = background;
            if (inside > 0) {
                double tex = 0.0;
                for (const auto& b : v.blobs) {
                    const double br = cr + b.dr * height;
                    const double bc = cc + b.dc * width;
                    const double rad = b.radius * s;
                    const double d2 = (r + 0.5 - br) * (r + 0.5 - br) + (c + 0.5 - bc) * (c + 0.5 - bc);
                    tex += b.delta * std::exp(-d2 / (2.0 * rad * rad));
                }
                value += (inside / 4.0) * (body + tex - background);
            }
            if (noise > 0.0) value += noise * gauss(rng);
            img.at(r, c) = static_cast<float>(std::clamp(value, 0.0, 1.0));
        }
    }
    return img;
}

std::string patient_name(int p) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "P%03d", p);
    return buf;
}

std::string slice_name(int s) { return "S" + std::to_string(s); }

}  // namespace

void SynthConfig::validate() const {
    if (n_patients <= 0 || slices_per_patient <= 0 || vertebrae_per_slice <= 0)
        throw InvalidArgument("synth config counts must be positive");
    double sum = 0.0;
    for (double r : class_ratio) {
        if (!(r >= 0.0)) throw InvalidArgument("class_ratio components must be nonnegative");
        sum += r;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw InvalidArgument("class_ratio must sum to 1");
    if (!(noise_level >= 0.0 && noise_level <= 0.2)) throw InvalidArgument("noise_level must lie in [0, 0.2]");
    if (patch_side < 8) throw InvalidArgument("patch_side must be at least 8");
}

SynthDataset generate(const SynthConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    const std::vector<int> labels = quota_labels(cfg.class_ratio, cfg.n_patients * cfg.vertebrae_per_slice, rng);

    SynthDataset ds;
    ds.manifest.split = data::Split::Train;
    std::size_t label_cursor = 0;
    for (int p = 0; p < cfg.n_patients; ++p) {
        const std::string pid = patient_name(p);
        // Patient-level anatomy: neighbouring intact bodies look alike.
        const double h0 = uniform(rng, 0.34, 0.50);
        const double w0 = uniform(rng, 0.55, 0.70);
        const double i0 = uniform(rng, 0.55, 0.80);
        const double bg = uniform(rng, 0.05, 0.15);

        std::vector<VertebraSpec> column(cfg.vertebrae_per_slice);
        for (auto& v : column) {
            v.label = labels[label_cursor++];
            v.height = h0 * (1.0 + uniform(rng, -0.04, 0.04));
            v.width = w0 * (1.0 + uniform(rng, -0.03, 0.03));
            v.intensity = i0 + uniform(rng, -0.03, 0.03);
            v.wedge = uniform(rng, -0.02, 0.02);
            const bool collapsed = v.label == 1 || (v.label == 2 && uniform(rng, 0.0, 1.0) < 0.5);
            if (collapsed) {
                v.collapse = uniform(rng, 0.3, 0.6);
                v.wedge = (uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0) * uniform(rng, 0.0, 0.2);
            }
            if (v.label == 2) {
                const int n_blobs = std::uniform_int_distribution<int>(3, 6)(rng);
                for (int b = 0; b < n_blobs; ++b) {
                    Blob blob;
                    blob.dr = uniform(rng, -0.3, 0.3);
                    blob.dc = uniform(rng, -0.35, 0.35);
                    blob.radius = uniform(rng, 0.04, 0.09);
                    blob.delta = (uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0) * uniform(rng, 0.25, 0.45);
                    v.blobs.push_back(blob);
                }
            }
        }

        const int middle = cfg.slices_per_patient / 2;
        for (int s = 0; s < cfg.slices_per_patient; ++s) {
            const std::string sid = slice_name(s);
            const double width_scale = s == middle ? 1.0 : uniform(rng, 0.92, 1.0);
            const double slice_shift = uniform(rng, -0.02, 0.02);
            data::SpineSequence seq;
            seq.slice_id = sid;
            for (int pos = 0; pos < cfg.vertebrae_per_slice; ++pos) {
                const auto& v = column[pos];
                data::VertebraPatch patch;
                patch.image = render_patch(v, cfg.patch_side, bg, width_scale, slice_shift, uniform(rng, -0.02, 0.02),
                                           uniform(rng, -0.02, 0.02), cfg.noise_level, rng);
                patch.label = v.label;
                patch.position = pos;
                patch.patient_id = pid;

                char name[64];
                std::snprintf(name, sizeof name, "images/%s_%s_%02d.pgm", pid.c_str(), sid.c_str(), pos);
                ds.manifest.entries.push_back({pid, sid, pos, name, v.label});
                ds.params.push_back({pid, sid, pos, v.label, v.height * (1.0 - v.collapse), v.width * width_scale,
                                     v.intensity + slice_shift, v.collapse, static_cast<int>(v.blobs.size())});
                seq.patches.push_back(std::move(patch));
            }
            ds.sequences.push_back(std::move(seq));
        }
    }
    ds.manifest.tally();
    return ds;
}

void write_dataset(const SynthDataset& ds, const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir / "images");
    std::size_t i = 0;
    for (const auto& seq : ds.sequences)
        for (const auto& patch : seq.patches) write_pgm(out_dir / ds.manifest.entries[i++].image_path, patch.image, 16);

    data::DatasetManifest m = ds.manifest;
    m.base_dir = out_dir;
    data::write_manifest(out_dir / "manifest.csv", m);

    nlohmann::json sidecar = nlohmann::json::array();
    for (const auto& p : ds.params)
        sidecar.push_back({{"patient_id", p.patient_id},
                           {"slice_id", p.slice_id},
                           {"position", p.position},
                           {"label", p.label},
                           {"body_height", p.body_height},
                           {"body_width", p.body_width},
                           {"intensity", p.intensity},
                           {"collapse", p.collapse},
                           {"texture_blobs", p.texture_blobs}});
    std::ofstream out(out_dir / "generation.json");
    if (!out) throw IoError("cannot write generation.json in '" + out_dir.string() + "'");
    out << sidecar.dump(2) << "\n";
}

// ---- mask fixtures ---------------------------------------------------------

namespace {

constexpr int kSliceCols = 80;
constexpr int kSlicePad = 20;
constexpr double kSpacing = 30.0;

BinaryMask rasterize(const Quad& q, int rows, int cols) {
    BinaryMask m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            if (q.contains(r + 0.5, c + 0.5)) m.at(r, c) = 1;
    return m;
}

Box bounding_box(const BinaryMask& m) {
    Box b{m.rows, m.cols, 0, 0};
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < m.cols; ++c)
            if (m.at(r, c)) {
                b.r0 = std::min(b.r0, r);
                b.c0 = std::min(b.c0, c);
                b.r1 = std::max(b.r1, r + 1);
                b.c1 = std::max(b.c1, c + 1);
            }
    return b;
}

}  // namespace

std::vector<MaskFixture> generate_masks(const SynthConfig& cfg, const MaskCorruption& corruption) {
    cfg.validate();
    if (!(corruption.shrink_factor > 0.0 && corruption.shrink_factor <= 1.0))
        throw InvalidArgument("shrink_factor must lie in (0, 1]");
    for (int p : corruption.deleted)
        if (p < 0 || p >= cfg.vertebrae_per_slice) throw InvalidArgument("deleted position out of range");
    for (int p : corruption.shrunk)
        if (p < 0 || p >= cfg.vertebrae_per_slice) throw InvalidArgument("shrunk position out of range");

    Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    const int n = cfg.vertebrae_per_slice;
    const int rows = 2 * kSlicePad + static_cast<int>(std::ceil(n * kSpacing));
    std::vector<MaskFixture> out;
    for (int p = 0; p < cfg.n_patients; ++p) {
        const double height = uniform(rng, 18.0, 22.0);
        const double width = uniform(rng, 30.0, 36.0);
        const double phase = uniform(rng, 0.0, 6.28);
        for (int s = 0; s < cfg.slices_per_patient; ++s) {
            MaskFixture fx;
            fx.patient_id = patient_name(p);
            fx.slice_id = slice_name(s);
            fx.slice = Image(rows, kSliceCols, 0.1f);
            fx.mask = BinaryMask(rows, kSliceCols);
            std::normal_distribution<double> gauss(0.0, 1.0);
            for (int pos = 0; pos < n; ++pos) {
                const double cr = kSlicePad + (pos + 0.5) * kSpacing + uniform(rng, -1.0, 1.0);
                const double cc = kSliceCols / 2.0 + 3.0 * std::sin(phase + 0.4 * pos) + uniform(rng, -0.5, 0.5);
                const double h = height * (1.0 + uniform(rng, -0.05, 0.05));
                const double w = width * (1.0 + uniform(rng, -0.05, 0.05));
                const double tilt = uniform(rng, -0.03, 0.03);

                VertebraTruth t;
                t.position = pos;
                t.footprint = rasterize(body_quad(cr, cc, h, w, tilt), rows, kSliceCols);
                t.box = bounding_box(t.footprint);
                double sr = 0.0, sc = 0.0;
                for (int r = 0; r < rows; ++r)
                    for (int c = 0; c < kSliceCols; ++c)
                        if (t.footprint.at(r, c)) {
                            ++t.area;
                            sr += r;
                            sc += c;
                        }
                t.centroid = {sr / static_cast<double>(t.area), sc / static_cast<double>(t.area)};
                t.deleted = std::find(corruption.deleted.begin(), corruption.deleted.end(), pos) != corruption.deleted.end();
                t.shrunk = std::find(corruption.shrunk.begin(), corruption.shrunk.end(), pos) != corruption.shrunk.end();

                for (std::size_t i = 0; i < t.footprint.data.size(); ++i)
                    if (t.footprint.data[i]) fx.slice.pixels[i] = 0.7f;
                if (!t.deleted) {
                    const BinaryMask drawn =
                        t.shrunk ? rasterize(body_quad(cr, cc, h * std::sqrt(corruption.shrink_factor),
                                                       w * std::sqrt(corruption.shrink_factor), tilt),
                                             rows, kSliceCols)
                                 : t.footprint;
                    for (std::size_t i = 0; i < drawn.data.size(); ++i)
                        if (drawn.data[i]) fx.mask.data[i] = 1;
                }
                fx.truth.push_back(std::move(t));
            }
            if (cfg.noise_level > 0.0)
                for (float& v : fx.slice.pixels)
                    v = static_cast<float>(std::clamp(v + cfg.noise_level * gauss(rng), 0.0, 1.0));
            out.push_back(std::move(fx));
        }
    }
    return out;
}

std::vector<int> pick_nonadjacent_interior(int n, int count, std::uint64_t seed) {
    if (count < 0) throw InvalidArgument("count must be nonnegative");
    const int interior = n - 2;
    if (count > 0 && (interior <= 0 || count > (interior + 1) / 2))
        throw InvalidArgument("cannot place " + std::to_string(count) + " non-adjacent positions among " +
                              std::to_string(std::max(interior, 0)) + " interior vertebrae");
    Rng rng(seed);
    std::uniform_int_distribution<int> pick(1, n - 2);
    for (;;) {
        std::vector<int> chosen;
        for (int i = 0; i < count; ++i) chosen.push_back(pick(rng));
        std::sort(chosen.begin(), chosen.end());
        bool ok = true;
        for (std::size_t i = 1; i < chosen.size(); ++i) ok = ok && chosen[i] - chosen[i - 1] >= 2;
        if (ok) return chosen;
    }
}

void write_mask_fixtures(const std::vector<MaskFixture>& fixtures, const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir / "masks");
    fs::create_directories(out_dir / "slices");
    nlohmann::json truth = nlohmann::json::array();
    for (const auto& fx : fixtures) {
        const std::string stem = fx.patient_id + "_" + fx.slice_id;
        write_pgm(out_dir / "masks" / (stem + ".pgm"), image_from_mask(fx.mask));
        write_pgm(out_dir / "slices" / (stem + ".pgm"), fx.slice, 16);
        nlohmann::json vertebrae = nlohmann::json::array();
        for (const auto& t : fx.truth)
            vertebrae.push_back({{"position", t.position},
                                 {"box", {t.box.r0, t.box.c0, t.box.r1, t.box.c1}},
                                 {"centroid", {t.centroid[0], t.centroid[1]}},
                                 {"area", t.area},
                                 {"deleted", t.deleted},
                                 {"shrunk", t.shrunk}});
        truth.push_back({{"patient_id", fx.patient_id},
                         {"slice_id", fx.slice_id},
                         {"mask", "masks/" + stem + ".pgm"},
                         {"slice", "slices/" + stem + ".pgm"},
                         {"vertebrae", vertebrae}});
    }
    std::ofstream out(out_dir / "masks_truth.json");
    if (!out) throw IoError("cannot write masks_truth.json in '" + out_dir.string() + "'");
    out << truth.dump(2) << "\n";
}

}  // namespace tsccn::synth
