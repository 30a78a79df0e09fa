#include "swlm/tying.hpp"

#include <sstream>

#include "swlm/error.hpp"

namespace swlm {

std::string_view reuse_mode_name(ReuseMode mode) {
  switch (mode) {
    case ReuseMode::None: return "none";
    case ReuseMode::RE: return "re";
    case ReuseMode::RW: return "rw";
    case ReuseMode::RERW: return "rerw";
    case ReuseMode::Custom: return "custom";
  }
  return "?";
}

ReuseMode parse_reuse_mode(std::string_view name) {
  if (name == "none") return ReuseMode::None;
  if (name == "re" || name == "RE") return ReuseMode::RE;
  if (name == "rw" || name == "RW") return ReuseMode::RW;
  if (name == "rerw" || name == "re+rw" || name == "RE+RW" || name == "RERW") return ReuseMode::RERW;
  if (name == "custom") return ReuseMode::Custom;
  throw UsageError("unknown reuse mode '" + std::string(name) + "' (none|re|rw|rerw)");
}

std::vector<bool> TyingConfig::mask(std::size_t layers) const {
  std::vector<bool> m(layers, false);
  switch (mode) {
    case ReuseMode::None: break;
    case ReuseMode::RE:
      if (layers > 0) m[0] = true;
      break;
    case ReuseMode::RW:
      for (std::size_t i = 1; i < layers; ++i) m[i] = true;
      break;
    case ReuseMode::RERW: m.assign(layers, true); break;
    case ReuseMode::Custom:
      if (custom_mask.size() != layers) {
        throw UsageError("tie mask has " + std::to_string(custom_mask.size()) +
                         " entries but the embedder has " + std::to_string(layers) + " layers");
      }
      m = custom_mask;
      break;
  }
  return m;
}

std::string TyingConfig::describe(const std::vector<EmbedderLayer>& layers) const {
  if (mode != ReuseMode::Custom) return std::string(reuse_mode_name(mode));
  return "tie:" + tie_list(custom_mask, layers);
}

std::vector<bool> parse_tie_list(std::string_view list, const std::vector<EmbedderLayer>& layers) {
  std::vector<bool> mask(layers.size(), false);
  if (list.empty() || list == "none") return mask;
  std::stringstream ss{std::string(list)};
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    bool found = false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (layers[i].name == item) {
        mask[i] = true;
        found = true;
      }
    }
    if (!found) {
      std::string names;
      for (const auto& l : layers) names += (names.empty() ? "" : ",") + l.name;
      throw UsageError("unknown layer '" + item + "' in tie list (layers: " + names + ")");
    }
  }
  return mask;
}

std::string tie_list(const std::vector<bool>& mask, const std::vector<EmbedderLayer>& layers) {
  std::string out;
  for (std::size_t i = 0; i < mask.size() && i < layers.size(); ++i) {
    if (mask[i]) out += (out.empty() ? "" : ",") + layers[i].name;
  }
  return out.empty() ? "none" : out;
}

template <typename T>
std::vector<std::string> apply_tying(ParamRegistry<T>& registry, const EmbedderStack<T>& input,
                                     const EmbedderStack<T>& output,
                                     const std::vector<bool>& mask) {
  const auto& in = input.layers();
  const auto& out = output.layers();
  if (in.size() != out.size()) throw UsageError("cannot tie stacks of different depth");
  if (mask.size() != in.size()) throw UsageError("tie mask does not match the layer count");
  std::vector<std::string> tied;
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (in[i].name != out[i].name || in[i].slots.size() != out[i].slots.size()) {
      throw UsageError("layer " + std::to_string(i) + " differs between input and output stacks");
    }
    if (!mask[i]) continue;
    for (std::size_t s = 0; s < in[i].slots.size(); ++s) {
      registry.tie(out[i].slots[s], in[i].slots[s]);
    }
    tied.push_back(in[i].name);
  }
  return tied;
}

std::vector<SweepMask> enumerate_bottom_up(std::size_t layers) {
  if (layers == 0) throw UsageError("enumerate_bottom_up needs at least one layer");
  if (layers >= 20) throw UsageError("too many layers to enumerate");
  std::vector<SweepMask> out;
  const std::size_t total = std::size_t{1} << layers;
  for (std::size_t bits = 0; bits < total; ++bits) {
    SweepMask m;
    m.mask.resize(layers);
    for (std::size_t i = 0; i < layers; ++i) m.mask[i] = (bits >> i) & 1u;
    m.ties_beyond_embedding = bits != 0 && bits != 1;
    // prefix {0..j}: bits == 2^(j+1) - 1
    m.bottom_up = bits != 0 && ((bits + 1) & bits) == 0;
    out.push_back(std::move(m));
  }
  return out;
}

template <typename T>
TyingReport tying_report(const ParamRegistry<T>& registry, std::vector<std::string> tied_layers) {
  return {registry.total_params(), registry.unique_params(), std::move(tied_layers)};
}

template std::vector<std::string> apply_tying(ParamRegistry<float>&, const EmbedderStack<float>&,
                                              const EmbedderStack<float>&,
                                              const std::vector<bool>&);
template std::vector<std::string> apply_tying(ParamRegistry<double>&,
                                              const EmbedderStack<double>&,
                                              const EmbedderStack<double>&,
                                              const std::vector<bool>&);
template TyingReport tying_report(const ParamRegistry<float>&, std::vector<std::string>);
template TyingReport tying_report(const ParamRegistry<double>&, std::vector<std::string>);

}  // namespace swlm
