#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

#include "tsccn/sampler.hpp"

namespace tsccn::loss {

struct LossWeights {
    double lambda1 = 0.2;  // discriminator loss
    double lambda2 = 1.0;  // classification-stream loss
    double lambda3 = 1.0;  // weight loss
    double triplet_margin = 0.2;
    double u_hat = 4.0;    // bound on the weight ratio, must exceed 1
    bool paper_literal_weight_loss = false;

    void validate() const;
    bool operator==(const LossWeights&) const = default;
};

// A loss value with its gradient w.r.t. the direct input, same shape as the input.
struct LossValue {
    double value = 0.0;
    Eigen::MatrixXd grad;
};

// Softmax cross-entropy, mean over rows.
LossValue cross_entropy(const Eigen::MatrixXd& logits, std::span<const int> targets);

// Three-class cross-entropy (logits: N x 3, labels in {0,1,2}).
LossValue ce3(const Eigen::MatrixXd& logits, std::span<const int> labels);

struct DiscLossValue {
    double value = 0.0;
    Eigen::MatrixXd grad_prev;
    Eigen::MatrixXd grad_next;
};

// Sum of two same/different cross-entropies with targets |y_c - y_p| and
// |y_c - y_n| on binarized labels.
DiscLossValue disc_loss(const Eigen::MatrixXd& logits_prev, const Eigen::MatrixXd& logits_next,
                        std::span<const int> binary_c, std::span<const int> binary_p, std::span<const int> binary_n);

// max(0, |a-p|^2 - |a-n|^2 + margin) for one triple.
double triplet_hinge(const Eigen::VectorXd& anchor, const Eigen::VectorXd& positive, const Eigen::VectorXd& negative,
                     double margin);

// Mean hinge over `triples` (rows of embeddings); 0 with zero gradient when empty.
LossValue triplet_loss(const Eigen::MatrixXd& embeddings, const std::vector<sampler::TripletIndex>& triples,
                       double margin);

// Binary benign/malignant CE on samples with label 1 or 2 (target label-1),
// averaged over those samples, plus `triplet_term`. Normal samples are inert;
// the whole loss is 0 when no sample is a fracture. grad is w.r.t. logits2.
LossValue stream_loss(const Eigen::MatrixXd& logits2, std::span<const int> labels, double triplet_term);

// Number of samples stream_loss averages over.
std::size_t stream_contributors(std::span<const int> labels);

// Piecewise weight-ratio penalty, mean over the batch. grad is N x 1 w.r.t. u.
LossValue weight_loss(const Eigen::VectorXd& u, std::span<const int> labels, double u_hat, bool paper_literal = false);

struct LossTerms {
    double ce = 0.0;
    double disc = 0.0;
    double stream = 0.0;
    double weight = 0.0;
};

double total_loss(const LossTerms& terms, const LossWeights& weights);

}  // namespace tsccn::loss
