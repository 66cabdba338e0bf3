#pragma once

#include <array>
#include <cstdint>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tsccn/data_model.hpp"

namespace tsccn::metrics {

inline constexpr int K = data::kNumClasses;

struct ScoredSample {
    int truth = 0;
    int predicted = 0;
    std::array<double, K> scores{};
};

struct ConfusionState {
    std::array<std::array<std::int64_t, K>, K> counts{};  // [true][predicted]
    std::vector<ScoredSample> samples;

    std::int64_t total() const;
};

// Throws InvalidArgument on labels outside {0,1,2} or non-finite scores.
void accumulate(ConfusionState& state, int truth, int predicted, std::span<const double> scores);

// Associative merge for sharded evaluation.
ConfusionState merge(const ConfusionState& a, const ConfusionState& b);

// One-vs-rest rates; nullopt when the denominator is zero.
struct ClassRates {
    std::optional<double> se;
    std::optional<double> sp;
};

std::array<ClassRates, K> per_class_se_sp(const ConfusionState& state);

// One-vs-rest AUC of class k via the rank statistic (ties count 1/2);
// nullopt without both positives and negatives.
std::optional<double> auc_one_vs_rest(const ConfusionState& state, int k);

// Step-wise average precision of class k over distinct score thresholds;
// nullopt without positives.
std::optional<double> average_precision(const ConfusionState& state, int k);

struct MacroMetrics {
    double aSE = 0.0;
    double aSP = 0.0;
    double aAUC = 0.0;
    double mAP = 0.0;
    std::array<ClassRates, K> rates{};
    std::array<std::optional<double>, K> auc{};
    std::array<std::optional<double>, K> ap{};
    int undefined_components = 0;  // excluded from the macro means
    double accuracy = 0.0;
};

// Unweighted means over classes; undefined per-class components are excluded
// (a macro value with no defined component is NaN).
MacroMetrics macro_metrics(const ConfusionState& state);

nlohmann::json to_json(const MacroMetrics& m, const ConfusionState& state);

}  // namespace tsccn::metrics
