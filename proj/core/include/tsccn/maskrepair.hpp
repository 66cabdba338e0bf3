#pragma once

#include <array>
#include <cstddef>
#include <nlohmann/json_fwd.hpp>
#include <vector>

#include "tsccn/image.hpp"
#include "tsccn/mask.hpp"

namespace tsccn::repair {

using Point = std::array<double, 2>;  // (row, col)

struct Component {
    int id = 0;
    std::vector<std::size_t> pixels;  // linear indices into the mask, ascending
    Box box;
    Point centroid{};
    std::size_t area() const { return pixels.size(); }
};

struct LabeledMask {
    BinaryMask mask;
    std::vector<Component> components;
};

// 8-connected components in raster order of their first pixel; ids are 0..n-1.
LabeledMask label_components(const BinaryMask& mask);

// Rebuilds the binary raster from components (ids are renumbered).
LabeledMask from_components(int rows, int cols, std::vector<Component> components);

double median(std::vector<double> values);

struct Removal {
    LabeledMask kept;
    std::vector<Component> removed;
    double median_area = 0.0;
};

// Drops components whose area is below fraction * median area.
Removal remove_small_components(const LabeledMask& mask, double area_threshold_fraction = 0.5);

struct SpineAxis {
    Point origin{};     // mean centroid
    Point direction{};  // unit vector, points toward increasing row when not horizontal
};

// Dominant principal direction of the centroids; vertical for fewer than 2 components.
SpineAxis spine_axis(const std::vector<Component>& components);

// Components ordered by projection onto the axis.
std::vector<Component> sort_along_axis(std::vector<Component> components, const SpineAxis& axis);

struct GapSlot {
    Point position{};  // where the missing vertebra's centroid should sit
    int prev = -1;     // index of the preceding component in the sorted list, -1 if none
    int next = -1;     // index of the following component, -1 if none
};

struct GapReport {
    std::vector<double> spacings;  // consecutive centroid distances
    double median_spacing = 0.0;
    std::vector<GapSlot> slots;
};

// Number of vertebrae missing from one interval: round(spacing/median) - 1
// when spacing exceeds gap_factor * median, else 0.
int missing_in_interval(double spacing, double median_spacing, double gap_factor = 1.6);

// Components must already be sorted along the spine. Fewer than two gives an
// empty report (with a warning).
GapReport infer_gaps(const std::vector<Component>& sorted, double gap_factor = 1.6);

// Slot one median spacing beyond the first (at_start) or last component.
GapSlot end_slot(const std::vector<Component>& sorted, const SpineAxis& axis, double median_spacing, bool at_start);

// Copies the nearer neighbour (ties go to the preceding one), translated so
// its centroid lands on the slot, clipped to rows x cols. Throws InvalidArgument
// when the slot has no neighbour.
Component synthesize_mask(const GapSlot& slot, const std::vector<Component>& sorted, int rows, int cols);

// Bounding box grown by margin_fraction of its height/width on each side and
// clipped to the image. Throws InvalidArgument on an empty box.
Box expand_box(const Box& box, double margin_fraction, int rows, int cols);

// One side x side patch per component, in component order.
std::vector<Image> crop_patches(const Image& slice, const LabeledMask& mask, double margin_fraction = 0.2,
                                int side = 224);

struct RepairOptions {
    double area_threshold_fraction = 0.5;
    double gap_factor = 1.6;
};

struct RepairResult {
    LabeledMask repaired;  // components sorted along the spine
    std::vector<Component> removed;
    std::vector<Component> synthesized;
    nlohmann::json log() const;
    double median_area = 0.0;
    double median_spacing = 0.0;
    std::size_t components_in = 0;
};

// Small-component removal followed by gap filling.
RepairResult repair(const BinaryMask& mask, const RepairOptions& options = {});

}  // namespace tsccn::repair
