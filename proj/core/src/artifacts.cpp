#include "metaloss/artifacts.hpp"

#include <cctype>
#include <stdexcept>
#include <utility>

#include "metaloss/losses.hpp"
#include "metaloss/symbolic.hpp"

namespace metaloss::artifacts {

namespace {

ad::Var as_loss_input(const harness::Batch& b, ad::Var pred) {
  if (b.targets.empty()) return pred;
  return ad::vexp(ad::log_softmax(pred));
}

}  // namespace

harness::LossBuilder builder_from_network(net::LossNetwork network) {
  return [network = std::move(network)](ad::Tape& tape, const harness::Batch& b, ad::Var pred) {
    return net::forward(network, tape, tape.constant(b.y), as_loss_input(b, pred));
  };
}

harness::LossBuilder builder_from_meta_net(adalfl::MetaLossNet net) {
  return [net = std::move(net)](ad::Tape& tape, const harness::Batch& b, ad::Var pred) {
    return net.loss(tape, tape.constant(b.y), as_loss_input(b, pred));
  };
}

LoadedLoss load_loss_builder(const std::string& text) {
  size_t i = 0;
  while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  if (i < text.size() && text[i] == '{') {
    if (text.find("\"meta-mlp\"") != std::string::npos) {
      adalfl::MetaLossNet net = adalfl::meta_net_from_json(text);
      std::string desc = "meta-mlp[2," + std::to_string(net.hidden) + "," +
                         std::to_string(net.hidden) + ",1]";
      return {"meta-mlp", desc, builder_from_meta_net(std::move(net))};
    }
    net::LossNetwork network = net::network_from_json(text);
    std::string desc = sym::to_prefix(network.tree, network.nonneg);
    return {"network", desc, builder_from_network(std::move(network))};
  }
  std::string name = text.substr(i);
  while (!name.empty() && std::isspace(static_cast<unsigned char>(name.back()))) name.pop_back();
  losses::LossSpec spec = losses::parse_loss_name(name);
  return {"named", spec.name, harness::builder_from_spec(spec)};
}

}  // namespace metaloss::artifacts
