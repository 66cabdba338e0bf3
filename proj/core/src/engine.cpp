#include "tsccn/engine.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <spdlog/spdlog.h>
#include <sstream>

#include "tsccn/checkpoint.hpp"
#include "tsccn/config_io.hpp"
#include "tsccn/error.hpp"
#include "tsccn/nn/adam.hpp"
#include "tsccn/sampler.hpp"

namespace tsccn::engine {

using nn::Tensor;
using nn::Var;

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// ---- dataset ----------------------------------------------------------------

void TripletDataset::add_sequence(const data::SpineSequence& seq, int side) {
    seq.validate();
    const std::size_t base = images_.size();
    const auto triplets = data::triplet_indices(seq.patches.size());
    for (std::size_t j = 0; j < seq.patches.size(); ++j) {
        const auto& p = seq.patches[j];
        Image img = (p.image.rows == side && p.image.cols == side) ? p.image : resize_bilinear(p.image, side, side);
        clamp_unit(img);
        images_.push_back(std::move(img));
        labels_.push_back(p.label);
        prev_.push_back(base + triplets[j][0]);
        next_.push_back(base + triplets[j][2]);
        patients_.push_back(p.patient_id);
        manifest_.entries.push_back({p.patient_id, seq.slice_id, p.position, "", p.label});
    }
}

TripletDataset TripletDataset::from_sequences(const std::vector<data::SpineSequence>& sequences, int side) {
    if (side < 1) throw InvalidArgument("dataset side must be positive");
    TripletDataset ds;
    ds.side_ = side;
    for (const auto& seq : sequences) ds.add_sequence(seq, side);
    ds.manifest_.tally();
    return ds;
}

TripletDataset TripletDataset::from_manifest(const data::DatasetManifest& manifest, int side) {
    return from_sequences(data::load_sequences(manifest, side).sequences, side);
}

TripletDataset TripletDataset::subset(const std::vector<std::string>& patients) const {
    const std::set<std::string> keep(patients.begin(), patients.end());
    TripletDataset out;
    out.side_ = side_;
    std::vector<std::size_t> remap(size(), static_cast<std::size_t>(-1));
    for (std::size_t i = 0; i < size(); ++i) {
        if (!keep.count(patients_[i])) continue;
        remap[i] = out.images_.size();
        out.images_.push_back(images_[i]);
        out.labels_.push_back(labels_[i]);
        out.patients_.push_back(patients_[i]);
        out.manifest_.entries.push_back(manifest_.entries[i]);
    }
    // Neighbours always share the patient, so every link survives.
    for (std::size_t i = 0; i < size(); ++i) {
        if (remap[i] == static_cast<std::size_t>(-1)) continue;
        out.prev_.push_back(remap[prev_[i]]);
        out.next_.push_back(remap[next_[i]]);
    }
    out.manifest_.tally();
    return out;
}

PatientSplit split_by_patient(const std::vector<std::string>& patients, std::uint64_t seed) {
    std::vector<std::string> order = patients;
    std::mt19937_64 rng(derive_seed(seed, 11));
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t n = order.size();
    auto n_train = static_cast<std::size_t>(std::lround(0.6 * static_cast<double>(n)));
    auto n_val = static_cast<std::size_t>(std::lround(0.2 * static_cast<double>(n)));
    if (n >= 3) {
        n_val = std::max<std::size_t>(n_val, 1);
        if (n_train + n_val >= n) n_train = n - n_val - 1;
    }
    n_train = std::min(n_train, n);
    n_val = std::min(n_val, n - n_train);
    PatientSplit s;
    s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                 order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
    return s;
}

// ---- batches and losses -----------------------------------------------------

Batch make_batch(const TripletDataset& ds, const std::vector<std::size_t>& indices,
                 const std::vector<std::uint64_t>& augment_seeds) {
    if (!augment_seeds.empty() && augment_seeds.size() != indices.size())
        throw InvalidArgument("make_batch: one augmentation seed per sample required");
    const int n = static_cast<int>(indices.size());
    const int s = ds.side();
    const std::size_t plane = static_cast<std::size_t>(s) * static_cast<std::size_t>(s);
    Batch b;
    b.x_p = Tensor({n, 1, s, s});
    b.x_c = Tensor({n, 1, s, s});
    b.x_n = Tensor({n, 1, s, s});
    b.index = indices;
    for (int i = 0; i < n; ++i) {
        const std::size_t c = indices[static_cast<std::size_t>(i)];
        if (c >= ds.size()) throw InvalidArgument("make_batch: index out of range");
        const std::array<std::size_t, 3> src = {ds.prev(c), c, ds.next(c)};
        std::array<Tensor*, 3> dst = {&b.x_p, &b.x_c, &b.x_n};
        std::optional<sampler::AugmentParams> aug;
        if (!augment_seeds.empty()) aug = sampler::draw_augment(augment_seeds[static_cast<std::size_t>(i)]);
        for (int k = 0; k < 3; ++k) {
            const Image& img = ds.image(src[static_cast<std::size_t>(k)]);
            const Image out = aug ? sampler::apply_augment(img, *aug) : img;
            std::copy(out.pixels.begin(), out.pixels.end(), dst[static_cast<std::size_t>(k)]->data() + i * plane);
        }
        b.y_p.push_back(ds.label(src[0]));
        b.y_c.push_back(ds.label(c));
        b.y_n.push_back(ds.label(src[2]));
    }
    return b;
}

namespace {

Eigen::MatrixXd to_matrix(const Var& v) {
    const Tensor& t = v.value();
    Eigen::MatrixXd m(t.dim(0), t.dim(1));
    for (int i = 0; i < t.dim(0); ++i)
        for (int j = 0; j < t.dim(1); ++j) m(i, j) = t.at(i, j);
    return m;
}

Tensor to_tensor(const Eigen::MatrixXd& m, double factor) {
    Tensor t({static_cast<int>(m.rows()), static_cast<int>(m.cols())});
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            t.at(static_cast<int>(i), static_cast<int>(j)) = static_cast<float>(factor * m(i, j));
    return t;
}

std::vector<int> binarized(const std::vector<int>& y) {
    std::vector<int> out(y.size());
    std::transform(y.begin(), y.end(), out.begin(), data::binarize_label);
    return out;
}

int argmax3(const Eigen::RowVectorXd& r) {
    int best = 0;
    for (int k = 1; k < r.size(); ++k)
        if (r(k) > r(best)) best = k;
    return best;
}

}  // namespace

StepLoss compute_losses(const net::ModelOutputs& out, const Batch& batch, const net::AblationFlags& flags,
                        const loss::LossWeights& w, bool backprop, int epoch) {
    StepLoss s;
    std::vector<std::pair<Var, Tensor>> seeds;
    const std::vector<int>& y = batch.y_c;

    const loss::LossValue ce = loss::ce3(to_matrix(out.logits3), y);
    s.terms.ce = ce.value;
    seeds.emplace_back(out.logits3, to_tensor(ce.grad, 1.0));

    if (flags.compare) {
        const auto bc = binarized(batch.y_c), bp = binarized(batch.y_p), bn = binarized(batch.y_n);
        const loss::DiscLossValue d = loss::disc_loss(to_matrix(out.disc_prev), to_matrix(out.disc_next), bc, bp, bn);
        s.terms.disc = d.value;
        if (w.lambda1 != 0.0) {
            seeds.emplace_back(out.disc_prev, to_tensor(d.grad_prev, w.lambda1));
            seeds.emplace_back(out.disc_next, to_tensor(d.grad_next, w.lambda1));
        }
    }

    loss::LossValue trip;
    if (flags.triplet) {
        const Eigen::MatrixXd emb = to_matrix(out.embedding);
        const auto triples = sampler::mine_triplets(emb, y);
        s.triplets = triples.size();
        trip = loss::triplet_loss(emb, triples, w.triplet_margin);
    }
    const loss::LossValue stream = loss::stream_loss(to_matrix(out.logits2), y, trip.value);
    s.terms.stream = stream.value;
    if (w.lambda2 != 0.0) {
        seeds.emplace_back(out.logits2, to_tensor(stream.grad, w.lambda2));
        if (s.triplets > 0) seeds.emplace_back(out.embedding, to_tensor(trip.grad, w.lambda2));
    }

    if (flags.gate) {
        const Eigen::VectorXd u = to_matrix(out.gate.u).col(0);
        const loss::LossValue wl = loss::weight_loss(u, y, w.u_hat, w.paper_literal_weight_loss);
        s.terms.weight = wl.value;
        if (w.lambda3 != 0.0) seeds.emplace_back(out.gate.u, to_tensor(wl.grad, w.lambda3));
    }

    s.total = loss::total_loss(s.terms, w);
    for (const auto& [name, v] : {std::pair{"ce", s.terms.ce}, std::pair{"disc", s.terms.disc},
                                  std::pair{"stream", s.terms.stream}, std::pair{"weight", s.terms.weight}})
        if (!std::isfinite(v)) throw DivergenceError(name, epoch);
    if (backprop) nn::backward(seeds);
    return s;
}

// ---- evaluation ---------------------------------------------------------------

EvalResult evaluate_model(net::TsccnModel& model, const TripletDataset& ds, const loss::LossWeights& weights,
                          int batch_size) {
    if (batch_size < 1) throw InvalidArgument("batch_size must be positive");
    nn::NoGradGuard no_grad;
    EvalResult r;
    const auto flags = model.flags();
    double weight_sum = 0.0;
    for (std::size_t start = 0; start < ds.size(); start += static_cast<std::size_t>(batch_size)) {
        const std::size_t stop = std::min(ds.size(), start + static_cast<std::size_t>(batch_size));
        std::vector<std::size_t> idx(stop - start);
        std::iota(idx.begin(), idx.end(), start);
        const Batch b = make_batch(ds, idx);
        const auto out = model.forward(Var(b.x_p), Var(b.x_c), Var(b.x_n), nn::Mode::Eval);
        const StepLoss sl = compute_losses(out, b, flags, weights, false);
        const auto n = static_cast<double>(idx.size());
        r.terms.ce += n * sl.terms.ce;
        r.terms.disc += n * sl.terms.disc;
        r.terms.stream += n * sl.terms.stream;
        r.terms.weight += n * sl.terms.weight;
        weight_sum += n;

        const Eigen::MatrixXd logits = to_matrix(out.logits3);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const auto row = static_cast<Eigen::Index>(i);
            SampleOutput so;
            so.index = idx[i];
            so.label = b.y_c[i];
            const Eigen::RowVectorXd l = logits.row(row);
            const Eigen::RowVectorXd e = (l.array() - l.maxCoeff()).exp();
            const Eigen::RowVectorXd p = e / e.sum();
            for (int k = 0; k < 3; ++k) so.probabilities[static_cast<std::size_t>(k)] = p(k);
            so.predicted = argmax3(l);
            const auto ri = static_cast<int>(i);
            auto append = [&](const Var& f, float scale) {
                for (int j = 0; j < f.dim(1); ++j) so.features.push_back(scale * f.value().at(ri, j));
            };
            if (flags.gate) {
                so.u = out.gate.u.value().at(ri, 0);
                append(out.f_R, out.gate.w_R.value().at(ri, 0));
                append(out.f_C, out.gate.w_C.value().at(ri, 0));
            } else if (flags.recognition_stream) {
                append(out.f_R, 1.0f);
                append(out.f_C, 1.0f);
            } else {
                append(out.f_C, 1.0f);
            }
            metrics::accumulate(r.state, so.label, so.predicted, so.probabilities);
            r.samples.push_back(std::move(so));
        }
    }
    if (weight_sum > 0.0) {
        r.terms.ce /= weight_sum;
        r.terms.disc /= weight_sum;
        r.terms.stream /= weight_sum;
        r.terms.weight /= weight_sum;
    }
    r.total = loss::total_loss(r.terms, weights);
    r.metrics = metrics::macro_metrics(r.state);
    return r;
}

// ---- training -------------------------------------------------------------------

namespace {

nlohmann::json terms_json(const loss::LossTerms& t) {
    return {{"ce", t.ce}, {"disc", t.disc}, {"stream", t.stream}, {"weight", t.weight}};
}

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

std::unique_ptr<net::TsccnModel> clone(net::TsccnModel& src, std::uint64_t seed) {
    auto out = std::make_unique<net::TsccnModel>(src.config(), seed);
    nn::copy_parameters(src, *out);
    return out;
}

double score_for_selection(double aSE) { return std::isfinite(aSE) ? aSE : -1.0; }

}  // namespace

nlohmann::json RunRecord::to_json() const {
    nlohmann::json epochs_j = nlohmann::json::array();
    for (const auto& e : epochs) {
        nlohmann::json j = {{"epoch", e.epoch},
                            {"train", terms_json(e.train_terms)},
                            {"train_total", e.train_total},
                            {"train_running_accuracy", e.train_running_accuracy},
                            {"seconds", e.seconds}};
        if (e.train_eval_accuracy) j["train_eval_accuracy"] = *e.train_eval_accuracy;
        if (e.val_terms) j["val"] = terms_json(*e.val_terms);
        if (e.val_total) j["val_total"] = *e.val_total;
        if (e.val_metrics)
            j["val_metrics"] = {{"aSE", finite_or_null(e.val_metrics->aSE)},
                                {"aSP", finite_or_null(e.val_metrics->aSP)},
                                {"aAUC", finite_or_null(e.val_metrics->aAUC)},
                                {"mAP", finite_or_null(e.val_metrics->mAP)},
                                {"accuracy", e.val_metrics->accuracy}};
        epochs_j.push_back(std::move(j));
    }
    nlohmann::json ckpts = nlohmann::json::array();
    for (const auto& p : checkpoints) ckpts.push_back(p.string());
    return {{"config", config},
            {"config_hash", config_hash},
            {"epochs", epochs_j},
            {"best_epoch", best_epoch},
            {"best_val_aSE", finite_or_null(best_val_aSE)},
            {"checkpoints", ckpts}};
}

TrainResult train(const TrainConfig& cfg, const TripletDataset& train_set, const TripletDataset* val_set,
                  const TrainOptions& options) {
    cfg.validate();
    if (train_set.size() == 0) throw InvalidArgument("empty training set");
    if (train_set.side() != cfg.image_size)
        throw ShapeMismatch("training images are " + std::to_string(train_set.side()) + " px, config expects " +
                            std::to_string(cfg.image_size));
    const net::NetworkConfig ncfg = cfg.resolved_network();
    const auto flags = net::flags_for(cfg.ablation);
    sampler::BatchSpec spec{cfg.batch_size, cfg.augment, cfg.oversample};
    spec.validate(flags.triplet);

    TrainResult result;
    result.record.config = config::to_json(cfg);
    result.record.config_hash = config::config_hash(result.record.config);

    auto model = std::make_unique<net::TsccnModel>(ncfg, derive_seed(cfg.seed, 1));
    std::vector<Var> params;
    for (auto& [name, p] : model->named_parameters()) params.push_back(p);
    nn::Adam adam(params, {cfg.learning_rate});
    sampler::IndexStream stream(train_set.manifest(), spec, derive_seed(cfg.seed, 2));
    std::mt19937_64 aug_rng(derive_seed(cfg.seed, 3));

    const int steps = cfg.steps_per_epoch > 0
                          ? cfg.steps_per_epoch
                          : static_cast<int>((train_set.size() + static_cast<std::size_t>(cfg.batch_size) - 1) /
                                             static_cast<std::size_t>(cfg.batch_size));
    if (options.out_dir) std::filesystem::create_directories(*options.out_dir);

    std::unique_ptr<net::TsccnModel> best;
    double best_score = -std::numeric_limits<double>::infinity();
    spdlog::info("training {} ({} params, {} samples, {} steps/epoch, config {})", net::to_string(cfg.ablation),
                 model->parameter_count(), train_set.size(), steps, result.record.config_hash);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        EpochRecord rec;
        rec.epoch = epoch;
        std::size_t seen = 0, correct = 0;
        for (int step = 0; step < steps; ++step) {
            const auto idx = stream.take(static_cast<std::size_t>(cfg.batch_size));
            std::vector<std::uint64_t> aug;
            if (cfg.augment)
                for (std::size_t i = 0; i < idx.size(); ++i) aug.push_back(aug_rng());
            const Batch b = make_batch(train_set, idx, aug);
            const auto out = model->forward(Var(b.x_p), Var(b.x_c), Var(b.x_n), nn::Mode::Train);
            const StepLoss sl = compute_losses(out, b, flags, cfg.weights, true, epoch);
            adam.step();
            adam.zero_grad();

            const auto n = static_cast<double>(idx.size());
            rec.train_terms.ce += n * sl.terms.ce;
            rec.train_terms.disc += n * sl.terms.disc;
            rec.train_terms.stream += n * sl.terms.stream;
            rec.train_terms.weight += n * sl.terms.weight;
            const Eigen::MatrixXd logits = to_matrix(out.logits3);
            for (std::size_t i = 0; i < idx.size(); ++i)
                correct += argmax3(logits.row(static_cast<Eigen::Index>(i))) == b.y_c[i] ? 1 : 0;
            seen += idx.size();
        }
        const auto inv = 1.0 / static_cast<double>(seen);
        rec.train_terms.ce *= inv;
        rec.train_terms.disc *= inv;
        rec.train_terms.stream *= inv;
        rec.train_terms.weight *= inv;
        rec.train_total = loss::total_loss(rec.train_terms, cfg.weights);
        rec.train_running_accuracy = static_cast<double>(correct) * inv;

        bool stopping = epoch == cfg.epochs;
        if (cfg.stop_at_train_accuracy > 0.0) {
            const EvalResult tr = evaluate_model(*model, train_set, cfg.weights, cfg.batch_size);
            rec.train_eval_accuracy = tr.metrics.accuracy;
            if (tr.metrics.accuracy >= cfg.stop_at_train_accuracy) stopping = true;
        }
        if (val_set && val_set->size() > 0 && (epoch % cfg.eval_every == 0 || stopping)) {
            const EvalResult vr = evaluate_model(*model, *val_set, cfg.weights, cfg.batch_size);
            rec.val_terms = vr.terms;
            rec.val_total = vr.total;
            rec.val_metrics = vr.metrics;
            const double score = score_for_selection(vr.metrics.aSE);
            if (score > best_score) {
                best_score = score;
                best = clone(*model, derive_seed(cfg.seed, 1));
                result.record.best_epoch = epoch;
                result.record.best_val_aSE = vr.metrics.aSE;
                if (options.out_dir) ckpt::save(*options.out_dir / "best.ckpt", *model, result.record.config);
            }
        }
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        spdlog::info("epoch {:3d} loss {:.4f} (ce {:.4f} disc {:.4f} stream {:.4f} weight {:.4f}) acc {:.3f}{}{}",
                     epoch, rec.train_total, rec.train_terms.ce, rec.train_terms.disc, rec.train_terms.stream,
                     rec.train_terms.weight, rec.train_running_accuracy,
                     rec.train_eval_accuracy ? fmt::format(" train-eval {:.3f}", *rec.train_eval_accuracy) : "",
                     rec.val_metrics ? fmt::format(" val aSE {:.3f}", rec.val_metrics->aSE) : "");
        result.record.epochs.push_back(rec);
        if (options.on_epoch) options.on_epoch(rec);
        if (stopping) break;
    }

    if (!best) {
        best = clone(*model, derive_seed(cfg.seed, 1));
        result.record.best_epoch = result.record.epochs.back().epoch;
        if (options.out_dir) ckpt::save(*options.out_dir / "best.ckpt", *model, result.record.config);
    }
    if (options.out_dir) {
        const auto& dir = *options.out_dir;
        ckpt::save(dir / "last.ckpt", *model, result.record.config);
        result.record.checkpoints = {dir / "best.ckpt", dir / "last.ckpt"};
        write_loss_curve(dir / "loss_curve.csv", result.record, cfg.weights);
        config::write_json_file(dir / "run_record.json", result.record.to_json());
    }
    result.best = std::move(best);
    result.final = std::move(model);
    return result;
}

void write_loss_curve(const std::filesystem::path& path, const RunRecord& record, const loss::LossWeights& weights) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "epoch,train_ce,train_disc,train_stream,train_weight,train_total,train_accuracy,"
           "val_ce,val_disc,val_stream,val_weight,val_total,val_aSE,val_aSP,val_aAUC,val_mAP\n";
    out.precision(10);
    auto cell = [&](double v) {
        out << ',';
        if (std::isfinite(v)) out << v;
    };
    for (const auto& e : record.epochs) {
        out << e.epoch;
        cell(e.train_terms.ce);
        cell(e.train_terms.disc);
        cell(e.train_terms.stream);
        cell(e.train_terms.weight);
        cell(loss::total_loss(e.train_terms, weights));
        cell(e.train_running_accuracy);
        if (e.val_terms) {
            cell(e.val_terms->ce);
            cell(e.val_terms->disc);
            cell(e.val_terms->stream);
            cell(e.val_terms->weight);
            cell(*e.val_total);
        } else {
            out << ",,,,,";
        }
        if (e.val_metrics) {
            cell(e.val_metrics->aSE);
            cell(e.val_metrics->aSP);
            cell(e.val_metrics->aAUC);
            cell(e.val_metrics->mAP);
        } else {
            out << ",,,,";
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed for " + path.string());
}

std::unique_ptr<net::TsccnModel> load_model(const std::filesystem::path& checkpoint, TrainConfig* config_out) {
    const ckpt::Header header = ckpt::read_header(checkpoint);
    TrainConfig cfg;
    try {
        cfg = config::train_config_from_json(header.config);
    } catch (const InvalidArgument& e) {
        throw CheckpointError(checkpoint.string() + ": config snapshot unusable: " + e.what());
    }
    auto model = std::make_unique<net::TsccnModel>(cfg.resolved_network(), derive_seed(cfg.seed, 1));
    ckpt::load_into(checkpoint, *model);
    if (config_out) *config_out = cfg;
    return model;
}

nlohmann::json evaluate_checkpoint(const std::filesystem::path& checkpoint, const data::DatasetManifest& manifest) {
    TrainConfig cfg;
    auto model = load_model(checkpoint, &cfg);
    const TripletDataset ds = TripletDataset::from_manifest(manifest, cfg.image_size);
    const EvalResult r = evaluate_model(*model, ds, cfg.weights, cfg.batch_size);
    nlohmann::json report = metrics::to_json(r.metrics, r.state);
    report["loss"] = terms_json(r.terms);
    report["loss_total"] = r.total;
    report["checkpoint"] = checkpoint.string();
    report["ablation"] = std::string(net::to_string(cfg.ablation));
    report["config_hash"] = config::config_hash(config::to_json(cfg));
    return report;
}

// ---- visualization ---------------------------------------------------------------

std::vector<Image> grad_cam(net::TsccnModel& model, const TripletDataset& ds, const std::vector<std::size_t>& indices) {
    std::vector<Image> cams;
    auto params = model.named_parameters();
    constexpr std::size_t kChunk = 32;
    for (std::size_t start = 0; start < indices.size(); start += kChunk) {
        const std::vector<std::size_t> idx(indices.begin() + static_cast<std::ptrdiff_t>(start),
                                           indices.begin() + static_cast<std::ptrdiff_t>(std::min(indices.size(), start + kChunk)));
        const Batch b = make_batch(ds, idx);
        // Eval mode keeps samples independent, so one backward pass serves the whole chunk.
        auto out = model.forward(Var(b.x_p), Var(b.x_c), Var(b.x_n), nn::Mode::Eval);
        Var fmap = out.cam_features;
        fmap.retain_grad();
        const Tensor& logits = out.logits3.value();
        Tensor seed(logits.shape());
        for (int i = 0; i < logits.dim(0); ++i) {
            int best = 0;
            for (int k = 1; k < logits.dim(1); ++k)
                if (logits.at(i, k) > logits.at(i, best)) best = k;
            seed.at(i, best) = 1.0f;
        }
        nn::backward({{out.logits3, seed}});
        const Tensor& a = fmap.value();
        const int n = a.dim(0), c = a.dim(1), h = a.dim(2), w = a.dim(3);
        Tensor g = fmap.has_grad() ? fmap.grad() : Tensor(a.shape());
        for (int i = 0; i < n; ++i) {
            Image cam(h, w);
            for (int ch = 0; ch < c; ++ch) {
                double alpha = 0.0;
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x) alpha += g.at(i, ch, y, x);
                alpha /= static_cast<double>(h * w);
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x) cam.at(y, x) += static_cast<float>(alpha * a.at(i, ch, y, x));
            }
            float mx = 0.0f;
            for (float& v : cam.pixels) {
                v = std::max(v, 0.0f);
                mx = std::max(mx, v);
            }
            if (mx > 0.0f)
                for (float& v : cam.pixels) v /= mx;
            Image up = resize_bilinear(cam, ds.side(), ds.side());
            clamp_unit(up);
            cams.push_back(std::move(up));
        }
        for (auto& [name, p] : params) p.zero_grad();
    }
    return cams;
}

std::vector<std::array<double, 2>> pca_2d(const std::vector<std::vector<float>>& features) {
    std::vector<std::array<double, 2>> out(features.size(), {0.0, 0.0});
    if (features.size() < 2) return out;
    const auto n = static_cast<Eigen::Index>(features.size());
    const auto d = static_cast<Eigen::Index>(features.front().size());
    Eigen::MatrixXd x(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (static_cast<Eigen::Index>(features[static_cast<std::size_t>(i)].size()) != d)
            throw ShapeMismatch("pca_2d: ragged feature rows");
        for (Eigen::Index j = 0; j < d; ++j) x(i, j) = features[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    x.rowwise() -= x.colwise().mean();
    const Eigen::MatrixXd cov = x.transpose() * x / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    const Eigen::Index k = solver.eigenvectors().cols();
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index c = 0; c < std::min<Eigen::Index>(2, k); ++c)
            out[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] = x.row(i).dot(solver.eigenvectors().col(k - 1 - c));
    return out;
}

VisualizationSummary emit_visualizations(net::TsccnModel& model, const TripletDataset& ds,
                                         const std::filesystem::path& out_dir, std::size_t max_cams) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "cams", ec);
    if (ec) throw IoError("cannot create " + (out_dir / "cams").string() + ": " + ec.message());
    VisualizationSummary summary;

    const std::size_t n_cams = max_cams == 0 ? ds.size() : std::min(max_cams, ds.size());
    std::vector<std::size_t> idx(n_cams);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const auto cams = grad_cam(model, ds, idx);
    for (std::size_t i = 0; i < cams.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "%05zu", i);
        write_pgm(out_dir / "cams" / (std::string("cam_") + name + ".pgm"), cams[i], 8);
        const Image& input = ds.image(idx[i]);
        RgbImage overlay(input.rows, input.cols);
        for (int r = 0; r < input.rows; ++r)
            for (int c = 0; c < input.cols; ++c) {
                const float g = input.at(r, c), h = cams[i].at(r, c);
                overlay.set(r, c, static_cast<std::uint8_t>(std::lround(255.0f * std::min(1.0f, 0.6f * g + 0.4f * h))),
                            static_cast<std::uint8_t>(std::lround(255.0f * 0.6f * g)),
                            static_cast<std::uint8_t>(std::lround(255.0f * 0.6f * g * (1.0f - h))));
            }
        write_ppm(out_dir / "cams" / (std::string("overlay_") + name + ".ppm"), overlay);
    }
    summary.cams = cams.size();

    const EvalResult r = evaluate_model(model, ds, loss::LossWeights{});
    std::vector<std::vector<float>> feats;
    for (const auto& s : r.samples) feats.push_back(s.features);
    const auto pts = pca_2d(feats);

    constexpr int kSize = 256, kPad = 12;
    RgbImage plot(kSize, kSize);
    double lo0 = 0, hi0 = 0, lo1 = 0, hi1 = 0;
    if (!pts.empty()) {
        lo0 = hi0 = pts[0][0];
        lo1 = hi1 = pts[0][1];
        for (const auto& p : pts) {
            lo0 = std::min(lo0, p[0]);
            hi0 = std::max(hi0, p[0]);
            lo1 = std::min(lo1, p[1]);
            hi1 = std::max(hi1, p[1]);
        }
    }
    constexpr std::array<std::array<std::uint8_t, 3>, 3> kColors = {{{0, 160, 0}, {0, 70, 220}, {220, 30, 30}}};
    std::ofstream csv(out_dir / "embedding.csv");
    if (!csv) throw IoError("cannot write " + (out_dir / "embedding.csv").string());
    csv << "index,label,predicted,x,y\n";
    std::set<int> classes;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const int label = r.samples[i].label;
        classes.insert(label);
        csv << r.samples[i].index << ',' << label << ',' << r.samples[i].predicted << ',' << pts[i][0] << ','
            << pts[i][1] << '\n';
        const double fx = hi0 > lo0 ? (pts[i][0] - lo0) / (hi0 - lo0) : 0.5;
        const double fy = hi1 > lo1 ? (pts[i][1] - lo1) / (hi1 - lo1) : 0.5;
        const int cx = kPad + static_cast<int>(std::lround(fx * (kSize - 2 * kPad - 1)));
        const int cy = kSize - 1 - kPad - static_cast<int>(std::lround(fy * (kSize - 2 * kPad - 1)));
        const auto& col = kColors[static_cast<std::size_t>(label)];
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) plot.set(cy + dy, cx + dx, col[0], col[1], col[2]);
    }
    write_ppm(out_dir / "embedding.ppm", plot);
    summary.scatter_points = pts.size();
    summary.scatter_classes.assign(classes.begin(), classes.end());
    return summary;
}

// ---- ablation -------------------------------------------------------------------------

std::vector<AblationRow> run_ablation(const TrainConfig& base, const TripletDataset& all, int repeats,
                                      const std::optional<std::filesystem::path>& out_dir) {
    if (repeats < 1) throw InvalidArgument("repeats must be positive");
    std::vector<std::string> patients;
    {
        std::set<std::string> seen;
        for (std::size_t i = 0; i < all.size(); ++i)
            if (seen.insert(all.patient(i)).second) patients.push_back(all.patient(i));
    }
    std::vector<AblationRow> rows;
    for (net::Ablation a : net::kAllAblations) rows.push_back({a, {}, {}, {}});
    for (int r = 0; r < repeats; ++r) {
        const std::uint64_t seed = base.seed + static_cast<std::uint64_t>(r);
        const PatientSplit split = split_by_patient(patients, seed);
        const TripletDataset tr = all.subset(split.train), va = all.subset(split.val), te = all.subset(split.test);
        for (auto& row : rows) {
            TrainConfig cfg = base;
            cfg.ablation = row.ablation;
            cfg.network.ablation = row.ablation;
            cfg.seed = seed;
            TrainOptions opts;
            if (out_dir) opts.out_dir = *out_dir / std::string(net::to_string(row.ablation)) / ("seed_" + std::to_string(seed));
            TrainResult res = train(cfg, tr, &va, opts);
            const EvalResult er = evaluate_model(*res.best, te, cfg.weights, cfg.batch_size);
            if (opts.out_dir) {
                nlohmann::json report = metrics::to_json(er.metrics, er.state);
                config::write_json_file(*opts.out_dir / "test_metrics.json", report);
            }
            row.runs.push_back(er.metrics);
        }
    }
    for (auto& row : rows) {
        for (std::size_t m = 0; m < 4; ++m) {
            std::vector<double> v;
            for (const auto& mm : row.runs) {
                const std::array<double, 4> vals = {mm.aSE, mm.aSP, mm.aAUC, mm.mAP};
                v.push_back(vals[m]);
            }
            const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
            double var = 0.0;
            for (double x : v) var += (x - mean) * (x - mean);
            row.mean[m] = mean;
            row.stddev[m] = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
        }
    }
    return rows;
}

std::string format_ablation_table(const std::vector<AblationRow>& rows) {
    std::ostringstream os;
    os << fmt::format("{:<24}{:>18}{:>18}{:>18}{:>18}\n", "configuration", "aSE", "aSP", "aAUC", "mAP");
    for (const auto& row : rows) {
        os << fmt::format("{:<24}", net::to_string(row.ablation));
        for (std::size_t m = 0; m < 4; ++m)
            os << fmt::format("{:>18}", fmt::format("{:.2f} +- {:.2f}", 100.0 * row.mean[m], 100.0 * row.stddev[m]));
        os << '\n';
    }
    return os.str();
}

}  // namespace tsccn::engine
