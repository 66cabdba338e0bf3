#include "tsccn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>
#include <spdlog/spdlog.h>

#include "tsccn/error.hpp"

namespace tsccn::metrics {

std::int64_t ConfusionState::total() const {
    std::int64_t n = 0;
    for (const auto& row : counts)
        for (auto v : row) n += v;
    return n;
}

void accumulate(ConfusionState& state, int truth, int predicted, std::span<const double> scores) {
    if (!data::is_valid_label(truth) || !data::is_valid_label(predicted))
        throw InvalidArgument("accumulate: label outside {0,1,2}");
    if (scores.size() != K) throw InvalidArgument("accumulate: expected 3 scores");
    ScoredSample s;
    s.truth = truth;
    s.predicted = predicted;
    for (int k = 0; k < K; ++k) {
        if (!std::isfinite(scores[k])) throw InvalidArgument("accumulate: non-finite score");
        s.scores[k] = scores[k];
    }
    ++state.counts[truth][predicted];
    state.samples.push_back(s);
}

ConfusionState merge(const ConfusionState& a, const ConfusionState& b) {
    ConfusionState out = a;
    for (int i = 0; i < K; ++i)
        for (int j = 0; j < K; ++j) out.counts[i][j] += b.counts[i][j];
    out.samples.insert(out.samples.end(), b.samples.begin(), b.samples.end());
    return out;
}

std::array<ClassRates, K> per_class_se_sp(const ConfusionState& state) {
    const std::int64_t total = state.total();
    std::array<ClassRates, K> out{};
    for (int k = 0; k < K; ++k) {
        std::int64_t tp = state.counts[k][k], fn = 0, fp = 0;
        for (int j = 0; j < K; ++j) {
            if (j == k) continue;
            fn += state.counts[k][j];
            fp += state.counts[j][k];
        }
        const std::int64_t tn = total - tp - fn - fp;
        if (tp + fn > 0) out[k].se = static_cast<double>(tp) / static_cast<double>(tp + fn);
        if (tn + fp > 0) out[k].sp = static_cast<double>(tn) / static_cast<double>(tn + fp);
    }
    return out;
}

std::optional<double> auc_one_vs_rest(const ConfusionState& state, int k) {
    const auto& s = state.samples;
    const std::size_t n = s.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s[a].scores[k] < s[b].scores[k]; });
    // Mann-Whitney U from mid-ranks of the positives.
    double rank_sum = 0.0;
    std::int64_t n_pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && s[idx[j]].scores[k] == s[idx[i]].scores[k]) ++j;
        const double mid_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t t = i; t < j; ++t)
            if (s[idx[t]].truth == k) {
                rank_sum += mid_rank;
                ++n_pos;
            }
        i = j;
    }
    const std::int64_t n_neg = static_cast<std::int64_t>(n) - n_pos;
    if (n_pos == 0 || n_neg == 0) return std::nullopt;
    const double u = rank_sum - static_cast<double>(n_pos) * static_cast<double>(n_pos + 1) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::optional<double> average_precision(const ConfusionState& state, int k) {
    const auto& s = state.samples;
    const std::size_t n = s.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s[a].scores[k] > s[b].scores[k]; });
    std::int64_t n_pos = 0;
    for (const auto& x : s) n_pos += x.truth == k ? 1 : 0;
    if (n_pos == 0) return std::nullopt;

    double ap = 0.0, prev_recall = 0.0;
    std::int64_t tp = 0, seen = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && s[idx[j]].scores[k] == s[idx[i]].scores[k]) {
            tp += s[idx[j]].truth == k ? 1 : 0;
            ++seen;
            ++j;
        }
        const double recall = static_cast<double>(tp) / static_cast<double>(n_pos);
        const double precision = static_cast<double>(tp) / static_cast<double>(seen);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    return ap;
}

namespace {

double mean_defined(const std::array<std::optional<double>, K>& values, int& undefined) {
    double sum = 0.0;
    int n = 0;
    for (const auto& v : values) {
        if (v) {
            sum += *v;
            ++n;
        } else {
            ++undefined;
        }
    }
    return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / n;
}

}  // namespace

MacroMetrics macro_metrics(const ConfusionState& state) {
    MacroMetrics m;
    m.rates = per_class_se_sp(state);
    std::array<std::optional<double>, K> se{}, sp{};
    for (int k = 0; k < K; ++k) {
        se[k] = m.rates[k].se;
        sp[k] = m.rates[k].sp;
        m.auc[k] = auc_one_vs_rest(state, k);
        m.ap[k] = average_precision(state, k);
    }
    m.aSE = mean_defined(se, m.undefined_components);
    m.aSP = mean_defined(sp, m.undefined_components);
    m.aAUC = mean_defined(m.auc, m.undefined_components);
    m.mAP = mean_defined(m.ap, m.undefined_components);
    const std::int64_t total = state.total();
    std::int64_t correct = 0;
    for (int k = 0; k < K; ++k) correct += state.counts[k][k];
    m.accuracy = total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
    if (m.undefined_components > 0)
        spdlog::warn("{} undefined per-class metric component(s) excluded from macro averages", m.undefined_components);
    return m;
}

nlohmann::json to_json(const MacroMetrics& m, const ConfusionState& state) {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    nlohmann::json per_class = nlohmann::json::array();
    nlohmann::json undefined = nlohmann::json::array();
    for (int k = 0; k < K; ++k) {
        per_class.push_back({{"class", k},
                             {"SE", opt(m.rates[k].se)},
                             {"SP", opt(m.rates[k].sp)},
                             {"AUC", opt(m.auc[k])},
                             {"AP", opt(m.ap[k])}});
        for (const auto& [name, v] : {std::pair{"SE", m.rates[k].se}, std::pair{"SP", m.rates[k].sp},
                                      std::pair{"AUC", m.auc[k]}, std::pair{"AP", m.ap[k]}})
            if (!v) undefined.push_back(std::string(name) + "_" + std::to_string(k));
    }
    nlohmann::json confusion = nlohmann::json::array();
    for (const auto& row : state.counts) confusion.push_back(row);
    return {{"macro", {{"aSE", num(m.aSE)}, {"aSP", num(m.aSP)}, {"aAUC", num(m.aAUC)}, {"mAP", num(m.mAP)}}},
            {"accuracy", m.accuracy},
            {"per_class", per_class},
            {"confusion_matrix", confusion},
            {"undefined", undefined},
            {"undefined_count", m.undefined_components},
            {"samples", state.samples.size()}};
}

}  // namespace tsccn::metrics
