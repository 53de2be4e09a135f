#pragma once

// Bridges between serialized loss artifacts and the training harness: wraps a
// symbolic loss network, a learned meta-loss MLP, or a named analytic loss as
// a LossBuilder the training loop can consume.

#include <string>

#include "metaloss/adalfl.hpp"
#include "metaloss/harness.hpp"
#include "metaloss/lossnet.hpp"

namespace metaloss::artifacts {

// Classification batches (targets present) feed post-softmax probabilities
// into the learned loss; regression batches feed raw predictions.
harness::LossBuilder builder_from_network(net::LossNetwork network);
harness::LossBuilder builder_from_meta_net(adalfl::MetaLossNet net);

struct LoadedLoss {
  std::string kind;         // "network", "meta-mlp", or "named"
  std::string description;  // prefix expression, layer shape, or loss name
  harness::LossBuilder builder;
};

// Accepts loss-network JSON, meta-net JSON, or a plain loss name such as
// "ce" or "lsr:0.1". Throws std::invalid_argument when nothing matches.
LoadedLoss load_loss_builder(const std::string& text);

}  // namespace metaloss::artifacts
