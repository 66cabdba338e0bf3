#include "tsccn/maskrepair.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "tsccn/error.hpp"

namespace tsccn::repair {

namespace {

void finalize(Component& c, int cols) {
    std::sort(c.pixels.begin(), c.pixels.end());
    const auto w = static_cast<std::size_t>(cols);
    c.box = {std::numeric_limits<int>::max(), std::numeric_limits<int>::max(), 0, 0};
    double sr = 0.0, sc = 0.0;
    for (std::size_t p : c.pixels) {
        const int r = static_cast<int>(p / w), col = static_cast<int>(p % w);
        c.box.r0 = std::min(c.box.r0, r);
        c.box.c0 = std::min(c.box.c0, col);
        c.box.r1 = std::max(c.box.r1, r + 1);
        c.box.c1 = std::max(c.box.c1, col + 1);
        sr += r;
        sc += col;
    }
    if (c.pixels.empty()) {
        c.box = {};
        c.centroid = {0.0, 0.0};
        return;
    }
    const auto n = static_cast<double>(c.pixels.size());
    c.centroid = {sr / n, sc / n};
}

double distance(const Point& a, const Point& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

nlohmann::json component_json(const Component& c) {
    return {{"id", c.id},
            {"area", c.area()},
            {"box", {c.box.r0, c.box.c0, c.box.r1, c.box.c1}},
            {"centroid", {c.centroid[0], c.centroid[1]}}};
}

}  // namespace

LabeledMask label_components(const BinaryMask& mask) {
    LabeledMask out;
    out.mask = mask;
    std::vector<std::uint8_t> seen(mask.data.size(), 0);
    std::deque<std::size_t> queue;
    const auto cols = static_cast<std::size_t>(mask.cols);
    for (std::size_t start = 0; start < mask.data.size(); ++start) {
        if (!mask.data[start] || seen[start]) continue;
        Component comp;
        comp.id = static_cast<int>(out.components.size());
        seen[start] = 1;
        queue.push_back(start);
        while (!queue.empty()) {
            const std::size_t p = queue.front();
            queue.pop_front();
            comp.pixels.push_back(p);
            const int r = static_cast<int>(p / cols), c = static_cast<int>(p % cols);
            for (int dr = -1; dr <= 1; ++dr)
                for (int dc = -1; dc <= 1; ++dc) {
                    const int rr = r + dr, cc = c + dc;
                    if (rr < 0 || cc < 0 || rr >= mask.rows || cc >= mask.cols) continue;
                    const std::size_t q = static_cast<std::size_t>(rr) * cols + static_cast<std::size_t>(cc);
                    if (mask.data[q] && !seen[q]) {
                        seen[q] = 1;
                        queue.push_back(q);
                    }
                }
        }
        finalize(comp, mask.cols);
        out.components.push_back(std::move(comp));
    }
    return out;
}

LabeledMask from_components(int rows, int cols, std::vector<Component> components) {
    LabeledMask out;
    out.mask = BinaryMask(rows, cols);
    for (std::size_t i = 0; i < components.size(); ++i) {
        components[i].id = static_cast<int>(i);
        for (std::size_t p : components[i].pixels) out.mask.data.at(p) = 1;
    }
    out.components = std::move(components);
    return out;
}

double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    const double hi = values[mid];
    if (values.size() % 2 == 1) return hi;
    const double lo = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

Removal remove_small_components(const LabeledMask& mask, double fraction) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw InvalidArgument("area threshold fraction must lie in (0, 1)");
    Removal out;
    if (mask.components.empty()) {
        spdlog::warn("remove_small_components: empty mask, nothing to do");
        out.kept = mask;
        return out;
    }
    std::vector<double> areas;
    for (const auto& c : mask.components) areas.push_back(static_cast<double>(c.area()));
    out.median_area = median(areas);
    const double threshold = fraction * out.median_area;
    std::vector<Component> kept;
    for (const auto& c : mask.components) {
        if (static_cast<double>(c.area()) < threshold)
            out.removed.push_back(c);
        else
            kept.push_back(c);
    }
    out.kept = from_components(mask.mask.rows, mask.mask.cols, std::move(kept));
    return out;
}

SpineAxis spine_axis(const std::vector<Component>& components) {
    SpineAxis axis;
    axis.direction = {1.0, 0.0};
    if (components.empty()) return axis;
    for (const auto& c : components) {
        axis.origin[0] += c.centroid[0];
        axis.origin[1] += c.centroid[1];
    }
    axis.origin[0] /= static_cast<double>(components.size());
    axis.origin[1] /= static_cast<double>(components.size());
    if (components.size() < 2) return axis;

    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (const auto& c : components) {
        const Eigen::Vector2d d(c.centroid[0] - axis.origin[0], c.centroid[1] - axis.origin[1]);
        cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> solver(cov);
    Eigen::Vector2d v = solver.eigenvectors().col(1);  // largest eigenvalue
    if (v(0) < -1e-12 || (std::abs(v(0)) <= 1e-12 && v(1) < 0.0)) v = -v;
    axis.direction = {v(0), v(1)};
    return axis;
}

std::vector<Component> sort_along_axis(std::vector<Component> components, const SpineAxis& axis) {
    auto proj = [&](const Component& c) {
        return (c.centroid[0] - axis.origin[0]) * axis.direction[0] + (c.centroid[1] - axis.origin[1]) * axis.direction[1];
    };
    std::stable_sort(components.begin(), components.end(),
                     [&](const Component& a, const Component& b) { return proj(a) < proj(b); });
    return components;
}

int missing_in_interval(double spacing, double median_spacing, double gap_factor) {
    if (!(median_spacing > 0.0) || spacing <= gap_factor * median_spacing) return 0;
    return std::max(0, static_cast<int>(std::lround(spacing / median_spacing)) - 1);
}

GapReport infer_gaps(const std::vector<Component>& sorted, double gap_factor) {
    GapReport report;
    if (sorted.size() < 2) {
        spdlog::warn("infer_gaps: fewer than two components, no spacing available");
        return report;
    }
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i)
        report.spacings.push_back(distance(sorted[i].centroid, sorted[i + 1].centroid));
    report.median_spacing = median(report.spacings);
    for (std::size_t i = 0; i < report.spacings.size(); ++i) {
        const int m = missing_in_interval(report.spacings[i], report.median_spacing, gap_factor);
        const Point& a = sorted[i].centroid;
        const Point& b = sorted[i + 1].centroid;
        for (int j = 1; j <= m; ++j) {
            const double t = static_cast<double>(j) / (m + 1);
            GapSlot slot;
            slot.position = {a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])};
            slot.prev = static_cast<int>(i);
            slot.next = static_cast<int>(i + 1);
            report.slots.push_back(slot);
        }
    }
    return report;
}

GapSlot end_slot(const std::vector<Component>& sorted, const SpineAxis& axis, double median_spacing, bool at_start) {
    if (sorted.empty()) throw InvalidArgument("end_slot: no components");
    GapSlot slot;
    const double sign = at_start ? -1.0 : 1.0;
    const Component& anchor = at_start ? sorted.front() : sorted.back();
    slot.position = {anchor.centroid[0] + sign * median_spacing * axis.direction[0],
                     anchor.centroid[1] + sign * median_spacing * axis.direction[1]};
    if (at_start)
        slot.next = 0;
    else
        slot.prev = static_cast<int>(sorted.size()) - 1;
    return slot;
}

Component synthesize_mask(const GapSlot& slot, const std::vector<Component>& sorted, int rows, int cols) {
    const auto valid = [&](int i) { return i >= 0 && static_cast<std::size_t>(i) < sorted.size(); };
    int source = -1;
    if (valid(slot.prev) && valid(slot.next)) {
        const double dp = distance(slot.position, sorted[static_cast<std::size_t>(slot.prev)].centroid);
        const double dn = distance(slot.position, sorted[static_cast<std::size_t>(slot.next)].centroid);
        source = dn < dp ? slot.next : slot.prev;
    } else if (valid(slot.prev)) {
        source = slot.prev;
    } else if (valid(slot.next)) {
        source = slot.next;
    } else {
        throw InvalidArgument("synthesize_mask: gap slot has no neighbouring component");
    }
    const Component& src = sorted[static_cast<std::size_t>(source)];
    const auto dr = static_cast<int>(std::lround(slot.position[0] - src.centroid[0]));
    const auto dc = static_cast<int>(std::lround(slot.position[1] - src.centroid[1]));
    const auto w = static_cast<std::size_t>(cols);
    Component out;
    out.id = -1;
    for (std::size_t p : src.pixels) {
        const int r = static_cast<int>(p / w) + dr, c = static_cast<int>(p % w) + dc;
        if (r < 0 || c < 0 || r >= rows || c >= cols) continue;
        out.pixels.push_back(static_cast<std::size_t>(r) * w + static_cast<std::size_t>(c));
    }
    finalize(out, cols);
    return out;
}

Box expand_box(const Box& box, double margin_fraction, int rows, int cols) {
    if (box.height() <= 0 || box.width() <= 0) throw InvalidArgument("expand_box: degenerate bounding box");
    if (margin_fraction < 0.0) throw InvalidArgument("expand_box: negative margin");
    const auto mr = static_cast<int>(std::lround(margin_fraction * box.height()));
    const auto mc = static_cast<int>(std::lround(margin_fraction * box.width()));
    Box out{box.r0 - mr, box.c0 - mc, box.r1 + mr, box.c1 + mc};
    out.r0 = std::clamp(out.r0, 0, rows);
    out.c0 = std::clamp(out.c0, 0, cols);
    out.r1 = std::clamp(out.r1, 0, rows);
    out.c1 = std::clamp(out.c1, 0, cols);
    if (out.height() <= 0 || out.width() <= 0) throw InvalidArgument("expand_box: box lies outside the image");
    return out;
}

std::vector<Image> crop_patches(const Image& slice, const LabeledMask& mask, double margin_fraction, int side) {
    if (slice.rows != mask.mask.rows || slice.cols != mask.mask.cols)
        throw ShapeMismatch("crop_patches: slice and mask sizes differ");
    if (side < 1) throw InvalidArgument("crop_patches: side must be positive");
    std::vector<Image> out;
    for (const auto& c : mask.components) {
        const Box b = expand_box(c.box, margin_fraction, slice.rows, slice.cols);
        Image crop(b.height(), b.width());
        for (int r = 0; r < b.height(); ++r)
            for (int col = 0; col < b.width(); ++col) crop.at(r, col) = slice.at(b.r0 + r, b.c0 + col);
        out.push_back(resize_bilinear(crop, side, side));
    }
    return out;
}

nlohmann::json RepairResult::log() const {
    nlohmann::json removed_j = nlohmann::json::array();
    for (const auto& c : removed) removed_j.push_back(component_json(c));
    nlohmann::json synth_j = nlohmann::json::array();
    for (const auto& c : synthesized) synth_j.push_back(component_json(c));
    return {{"components_in", components_in},
            {"components_out", repaired.components.size()},
            {"median_area", median_area},
            {"median_spacing", median_spacing},
            {"removed", removed_j},
            {"synthesized", synth_j}};
}

RepairResult repair(const BinaryMask& mask, const RepairOptions& options) {
    RepairResult result;
    const LabeledMask labeled = label_components(mask);
    result.components_in = labeled.components.size();
    Removal removal = remove_small_components(labeled, options.area_threshold_fraction);
    result.removed = removal.removed;
    result.median_area = removal.median_area;

    const SpineAxis axis = spine_axis(removal.kept.components);
    std::vector<Component> sorted = sort_along_axis(removal.kept.components, axis);
    const GapReport gaps = infer_gaps(sorted, options.gap_factor);
    result.median_spacing = gaps.median_spacing;

    std::vector<Component> all = sorted;
    for (const auto& slot : gaps.slots) {
        Component c = synthesize_mask(slot, sorted, mask.rows, mask.cols);
        if (c.pixels.empty()) continue;
        result.synthesized.push_back(c);
        all.push_back(std::move(c));
    }
    // Relabel so touching copies merge exactly as a fresh labelling would.
    LabeledMask merged = label_components(from_components(mask.rows, mask.cols, std::move(all)).mask);
    const SpineAxis final_axis = spine_axis(merged.components);
    result.repaired = from_components(mask.rows, mask.cols, sort_along_axis(std::move(merged.components), final_axis));
    for (std::size_t i = 0; i < result.synthesized.size(); ++i) result.synthesized[i].id = static_cast<int>(i);
    return result;
}

}  // namespace tsccn::repair
