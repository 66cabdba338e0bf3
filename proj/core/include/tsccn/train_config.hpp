#pragma once

#include <cstdint>
#include <string>

#include "tsccn/losses.hpp"
#include "tsccn/network.hpp"

namespace tsccn::engine {

struct TrainConfig {
    double learning_rate = 1e-4;
    int batch_size = 64;
    int epochs = 100;
    loss::LossWeights weights;
    net::Ablation ablation = net::Ablation::FullTsccn;
    std::uint64_t seed = 0;

    // Backbone layout; its ablation field is overridden by `ablation`.
    net::NetworkConfig network;
    int image_size = 224;
    bool augment = true;
    bool oversample = true;
    int steps_per_epoch = 0;               // 0: ceil(train entries / batch_size)
    double stop_at_train_accuracy = 0.0;   // > 0: stop once eval-mode accuracy on the training set reaches it
    int eval_every = 1;                    // validation cadence in epochs

    void validate() const;
    net::NetworkConfig resolved_network() const;
    bool operator==(const TrainConfig&) const = default;
};

// Small-scale preset matching net::compact_config: 32x32 inputs.
TrainConfig compact_train_config(net::Ablation ablation = net::Ablation::FullTsccn);

}  // namespace tsccn::engine
