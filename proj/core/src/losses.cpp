#include "tsccn/losses.hpp"

#include <cmath>
#include <cstdlib>

#include "tsccn/data_model.hpp"
#include "tsccn/error.hpp"

namespace tsccn::loss {

void LossWeights::validate() const {
    if (!(lambda1 >= 0.0 && lambda2 >= 0.0 && lambda3 >= 0.0)) throw InvalidArgument("loss weights must be nonnegative");
    if (!(triplet_margin >= 0.0)) throw InvalidArgument("triplet_margin must be nonnegative");
    if (!(u_hat > 1.0)) throw InvalidArgument("u_hat must exceed 1");
}

LossValue cross_entropy(const Eigen::MatrixXd& logits, std::span<const int> targets) {
    const auto n = logits.rows();
    const auto k = logits.cols();
    if (static_cast<std::size_t>(n) != targets.size()) throw InvalidArgument("cross_entropy: logits/targets length mismatch");
    LossValue out;
    out.grad = Eigen::MatrixXd::Zero(n, k);
    if (n == 0) return out;
    for (Eigen::Index i = 0; i < n; ++i) {
        const int t = targets[static_cast<std::size_t>(i)];
        if (t < 0 || t >= k) throw InvalidArgument("cross_entropy: target " + std::to_string(t) + " out of range");
        const double mx = logits.row(i).maxCoeff();
        const Eigen::RowVectorXd e = (logits.row(i).array() - mx).exp();
        const double z = e.sum();
        out.value += -(logits(i, t) - mx - std::log(z));
        out.grad.row(i) = e / z;
        out.grad(i, t) -= 1.0;
    }
    out.value /= static_cast<double>(n);
    out.grad /= static_cast<double>(n);
    return out;
}

LossValue ce3(const Eigen::MatrixXd& logits, std::span<const int> labels) {
    if (logits.cols() != data::kNumClasses) throw InvalidArgument("ce3: expected 3 logits per sample");
    return cross_entropy(logits, labels);
}

DiscLossValue disc_loss(const Eigen::MatrixXd& logits_prev, const Eigen::MatrixXd& logits_next,
                        std::span<const int> binary_c, std::span<const int> binary_p, std::span<const int> binary_n) {
    const std::size_t n = binary_c.size();
    if (binary_p.size() != n || binary_n.size() != n) throw InvalidArgument("disc_loss: label length mismatch");
    std::vector<int> t_prev(n), t_next(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (int b : {binary_c[i], binary_p[i], binary_n[i]})
            if (b != 0 && b != 1) throw InvalidArgument("disc_loss: labels must be binarized");
        t_prev[i] = std::abs(binary_c[i] - binary_p[i]);
        t_next[i] = std::abs(binary_c[i] - binary_n[i]);
    }
    LossValue a = cross_entropy(logits_prev, t_prev);
    LossValue b = cross_entropy(logits_next, t_next);
    return {a.value + b.value, std::move(a.grad), std::move(b.grad)};
}

double triplet_hinge(const Eigen::VectorXd& anchor, const Eigen::VectorXd& positive, const Eigen::VectorXd& negative,
                     double margin) {
    return std::max(0.0, (anchor - positive).squaredNorm() - (anchor - negative).squaredNorm() + margin);
}

LossValue triplet_loss(const Eigen::MatrixXd& embeddings, const std::vector<sampler::TripletIndex>& triples,
                       double margin) {
    LossValue out;
    out.grad = Eigen::MatrixXd::Zero(embeddings.rows(), embeddings.cols());
    if (triples.empty()) return out;
    const double inv = 1.0 / static_cast<double>(triples.size());
    for (const auto& t : triples) {
        const auto a = static_cast<Eigen::Index>(t.anchor);
        const auto p = static_cast<Eigen::Index>(t.positive);
        const auto ng = static_cast<Eigen::Index>(t.negative);
        if (std::max({a, p, ng}) >= embeddings.rows()) throw InvalidArgument("triplet_loss: index out of range");
        const Eigen::RowVectorXd d_ap = embeddings.row(a) - embeddings.row(p);
        const Eigen::RowVectorXd d_an = embeddings.row(a) - embeddings.row(ng);
        const double h = d_ap.squaredNorm() - d_an.squaredNorm() + margin;
        if (h <= 0.0) continue;
        out.value += h * inv;
        out.grad.row(a) += 2.0 * inv * (d_ap - d_an);
        out.grad.row(p) -= 2.0 * inv * d_ap;
        out.grad.row(ng) += 2.0 * inv * d_an;
    }
    return out;
}

std::size_t stream_contributors(std::span<const int> labels) {
    std::size_t n = 0;
    for (int y : labels) n += (y == 1 || y == 2) ? 1 : 0;
    return n;
}

LossValue stream_loss(const Eigen::MatrixXd& logits2, std::span<const int> labels, double triplet_term) {
    if (static_cast<std::size_t>(logits2.rows()) != labels.size())
        throw InvalidArgument("stream_loss: logits/labels length mismatch");
    if (logits2.cols() != 2) throw InvalidArgument("stream_loss: expected 2 logits per sample");
    LossValue out;
    out.grad = Eigen::MatrixXd::Zero(logits2.rows(), 2);
    std::vector<Eigen::Index> rows;
    std::vector<int> targets;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!data::is_valid_label(labels[i])) throw InvalidArgument("stream_loss: label outside {0,1,2}");
        if (labels[i] != 0) {
            rows.push_back(static_cast<Eigen::Index>(i));
            targets.push_back(labels[i] - 1);
        }
    }
    if (rows.empty()) return out;
    Eigen::MatrixXd sub(static_cast<Eigen::Index>(rows.size()), 2);
    for (std::size_t j = 0; j < rows.size(); ++j) sub.row(static_cast<Eigen::Index>(j)) = logits2.row(rows[j]);
    const LossValue ce = cross_entropy(sub, targets);
    for (std::size_t j = 0; j < rows.size(); ++j) out.grad.row(rows[j]) = ce.grad.row(static_cast<Eigen::Index>(j));
    out.value = ce.value + triplet_term;
    return out;
}

LossValue weight_loss(const Eigen::VectorXd& u, std::span<const int> labels, double u_hat, bool paper_literal) {
    if (static_cast<std::size_t>(u.size()) != labels.size()) throw InvalidArgument("weight_loss: u/labels length mismatch");
    if (!(u_hat > 1.0)) throw InvalidArgument("weight_loss: u_hat must exceed 1");
    LossValue out;
    out.grad = Eigen::MatrixXd::Zero(u.size(), 1);
    if (u.size() == 0) return out;
    const double inv_n = 1.0 / static_cast<double>(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        const double ui = u(i);
        if (!(ui > 0.0) || !std::isfinite(ui)) throw InvalidArgument("weight_loss: u must be positive and finite");
        const int y = labels[static_cast<std::size_t>(i)];
        if (!data::is_valid_label(y)) throw InvalidArgument("weight_loss: label outside {0,1,2}");
        double target = 0.0;
        bool active = false;
        if (y == 0 && ui < u_hat) {
            active = true;
            target = u_hat;
        } else if (y != 0 && ui > 1.0 / u_hat) {
            active = true;
            target = paper_literal ? u_hat : 1.0 / u_hat;
        }
        if (!active) continue;
        out.value += (ui - target) * (ui - target) * inv_n;
        out.grad(i, 0) = 2.0 * (ui - target) * inv_n;
    }
    return out;
}

double total_loss(const LossTerms& t, const LossWeights& w) {
    return t.ce + w.lambda1 * t.disc + w.lambda2 * t.stream + w.lambda3 * t.weight;
}

}  // namespace tsccn::loss
