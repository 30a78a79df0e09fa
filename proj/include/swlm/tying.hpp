#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "swlm/embedders.hpp"
#include "swlm/params.hpp"

namespace swlm {

enum class ReuseMode { None, RE, RW, RERW, Custom };

std::string_view reuse_mode_name(ReuseMode mode);
ReuseMode parse_reuse_mode(std::string_view name);

struct TyingConfig {
  ReuseMode mode = ReuseMode::None;
  // Used when mode == Custom; index 0 is the subword embedding table.
  std::vector<bool> custom_mask;

  // Per-layer tie flags for a stack with `layers` layers.
  std::vector<bool> mask(std::size_t layers) const;
  std::string describe(const std::vector<EmbedderLayer>& layers) const;
};

// `--tie emb,hw1` style list against a layer list. An empty list or "none"
// yields an all-false mask.
std::vector<bool> parse_tie_list(std::string_view list, const std::vector<EmbedderLayer>& layers);
std::string tie_list(const std::vector<bool>& mask, const std::vector<EmbedderLayer>& layers);

// Re-binds every slot of each masked output layer to the matching input
// slot. Both stacks must have the same layer list and slot shapes.
template <typename T>
std::vector<std::string> apply_tying(ParamRegistry<T>& registry, const EmbedderStack<T>& input,
                                     const EmbedderStack<T>& output, const std::vector<bool>& mask);

struct SweepMask {
  std::vector<bool> mask;
  // Everything except "no layer" and "only the embedding table".
  bool ties_beyond_embedding = false;
  // The tied set is {0..j} for some j.
  bool bottom_up = false;
};

// All 2^n masks in binary counting order (bit i = layer i).
std::vector<SweepMask> enumerate_bottom_up(std::size_t layers);

struct TyingReport {
  std::size_t total_params = 0;
  std::size_t unique_params = 0;
  std::vector<std::string> tied_layer_names;
};

template <typename T>
TyingReport tying_report(const ParamRegistry<T>& registry, std::vector<std::string> tied_layers);

}  // namespace swlm
