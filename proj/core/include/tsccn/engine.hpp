#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "tsccn/data_model.hpp"
#include "tsccn/losses.hpp"
#include "tsccn/metrics.hpp"
#include "tsccn/network.hpp"
#include "tsccn/train_config.hpp"

namespace tsccn::engine {

// SplitMix64 step; used to derive independent seeds from one run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// Images resident in memory, one per manifest entry, with neighbour links
// along each spine sequence (edge-replicated at the ends).
class TripletDataset {
public:
    static TripletDataset from_manifest(const data::DatasetManifest& manifest, int side);
    static TripletDataset from_sequences(const std::vector<data::SpineSequence>& sequences, int side);

    std::size_t size() const { return images_.size(); }
    int side() const { return side_; }
    const Image& image(std::size_t i) const { return images_[i]; }
    int label(std::size_t i) const { return labels_[i]; }
    std::size_t prev(std::size_t i) const { return prev_[i]; }
    std::size_t next(std::size_t i) const { return next_[i]; }
    const std::vector<int>& labels() const { return labels_; }
    const std::string& patient(std::size_t i) const { return patients_[i]; }

    // Label-only manifest view for the sampler; entry i is sample i.
    const data::DatasetManifest& manifest() const { return manifest_; }

    // Samples whose patient is in `patients`, links preserved.
    TripletDataset subset(const std::vector<std::string>& patients) const;

private:
    void add_sequence(const data::SpineSequence& seq, int side);

    int side_ = 0;
    std::vector<Image> images_;
    std::vector<int> labels_;
    std::vector<std::size_t> prev_;
    std::vector<std::size_t> next_;
    std::vector<std::string> patients_;
    data::DatasetManifest manifest_;
};

struct PatientSplit {
    std::vector<std::string> train;
    std::vector<std::string> val;
    std::vector<std::string> test;
};

// Shuffles patients under `seed` and cuts them 3:1:1 (at least one patient per
// split when there are three or more).
PatientSplit split_by_patient(const std::vector<std::string>& patients, std::uint64_t seed);

struct Batch {
    nn::Tensor x_p, x_c, x_n;  // (N, 1, S, S)
    std::vector<int> y_p, y_c, y_n;
    std::vector<std::size_t> index;
};

// Stacks the triplets of `indices`; `augment_seeds` (if non-empty, one per
// sample) applies one augmentation draw to all three images of a triplet.
Batch make_batch(const TripletDataset& ds, const std::vector<std::size_t>& indices,
                 const std::vector<std::uint64_t>& augment_seeds = {});

struct StepLoss {
    loss::LossTerms terms;
    double total = 0.0;
    std::size_t triplets = 0;
};

// Loss terms for one forward pass; when `backprop` is set, seeds the graph with
// the weighted analytic gradients and runs backward(). Throws DivergenceError
// (tagged with `epoch`) before any backward pass if a term is non-finite.
StepLoss compute_losses(const net::ModelOutputs& out, const Batch& batch, const net::AblationFlags& flags,
                        const loss::LossWeights& weights, bool backprop, int epoch = 0);

struct SampleOutput {
    std::size_t index = 0;
    int label = 0;
    int predicted = 0;
    std::array<double, 3> probabilities{};
    double u = std::numeric_limits<double>::quiet_NaN();  // NaN without the gate
    std::vector<float> features;  // input of the three-class head
};

struct EvalResult {
    metrics::ConfusionState state;
    metrics::MacroMetrics metrics;
    loss::LossTerms terms;
    double total = 0.0;
    std::vector<SampleOutput> samples;  // in dataset order
};

EvalResult evaluate_model(net::TsccnModel& model, const TripletDataset& ds, const loss::LossWeights& weights,
                          int batch_size = 64);

struct EpochRecord {
    int epoch = 0;  // 1-based
    loss::LossTerms train_terms;
    double train_total = 0.0;
    double train_running_accuracy = 0.0;  // over augmented training batches
    std::optional<double> train_eval_accuracy;  // eval-mode pass over the training set
    std::optional<loss::LossTerms> val_terms;
    std::optional<double> val_total;
    std::optional<metrics::MacroMetrics> val_metrics;
    double seconds = 0.0;
};

struct RunRecord {
    nlohmann::json config;
    std::string config_hash;
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;  // 0 until selected
    double best_val_aSE = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::filesystem::path> checkpoints;

    nlohmann::json to_json() const;
};

struct TrainResult {
    RunRecord record;
    std::unique_ptr<net::TsccnModel> best;   // by validation aSE; final weights without a validation set
    std::unique_ptr<net::TsccnModel> final;
};

struct TrainOptions {
    std::optional<std::filesystem::path> out_dir;  // checkpoints, loss curve, run record
    std::function<void(const EpochRecord&)> on_epoch;
};

// Throws DivergenceError naming the first non-finite loss term.
TrainResult train(const TrainConfig& cfg, const TripletDataset& train_set, const TripletDataset* val_set,
                  const TrainOptions& options = {});

void write_loss_curve(const std::filesystem::path& path, const RunRecord& record, const loss::LossWeights& weights);

// Rebuilds the model described by a checkpoint header and loads its weights.
std::unique_ptr<net::TsccnModel> load_model(const std::filesystem::path& checkpoint, TrainConfig* config_out = nullptr);

// Metrics report of a checkpoint on a manifest (all entries).
nlohmann::json evaluate_checkpoint(const std::filesystem::path& checkpoint, const data::DatasetManifest& manifest);

// Grad-CAM of the predicted class on the last feature map of the leading
// stream, normalized to [0,1] and upsampled to the input size.
std::vector<Image> grad_cam(net::TsccnModel& model, const TripletDataset& ds, const std::vector<std::size_t>& indices);

// Rows of `features` projected on their two leading principal components.
std::vector<std::array<double, 2>> pca_2d(const std::vector<std::vector<float>>& features);

struct VisualizationSummary {
    std::size_t cams = 0;
    std::size_t scatter_points = 0;
    std::vector<int> scatter_classes;  // distinct classes in the scatter
};

// Writes cams/cam_<i>.pgm (+ overlay inputs) and embedding.ppm / embedding.csv.
// max_cams = 0 writes one map per sample.
VisualizationSummary emit_visualizations(net::TsccnModel& model, const TripletDataset& ds,
                                         const std::filesystem::path& out_dir, std::size_t max_cams = 0);

struct AblationRow {
    net::Ablation ablation{};
    std::vector<metrics::MacroMetrics> runs;  // one per repeat, on the test split
    std::array<double, 4> mean{};  // aSE, aSP, aAUC, mAP
    std::array<double, 4> stddev{};
};

// Trains every ablation for `repeats` seeds (seed, seed+1, ...) on a by-patient
// split of `all`, selecting by validation aSE and reporting test metrics.
std::vector<AblationRow> run_ablation(const TrainConfig& base, const TripletDataset& all, int repeats,
                                      const std::optional<std::filesystem::path>& out_dir = std::nullopt);

std::string format_ablation_table(const std::vector<AblationRow>& rows);

}  // namespace tsccn::engine
