#include "swlm/embedders.hpp"

#include <algorithm>
#include <numeric>

#include "swlm/error.hpp"

namespace swlm {

std::string_view embedder_kind_name(EmbedderKind kind) {
  switch (kind) {
    case EmbedderKind::Word: return "word";
    case EmbedderKind::CharCNN: return "charcnn";
    case EmbedderKind::SylConcat: return "sylconcat";
    case EmbedderKind::MorphSum: return "morphsum";
  }
  return "?";
}

EmbedderKind parse_embedder_kind(std::string_view name) {
  if (name == "word") return EmbedderKind::Word;
  if (name == "charcnn" || name == "char") return EmbedderKind::CharCNN;
  if (name == "sylconcat" || name == "syl") return EmbedderKind::SylConcat;
  if (name == "morphsum" || name == "morph") return EmbedderKind::MorphSum;
  throw UsageError("unknown embedder kind '" + std::string(name) + "'");
}

std::size_t EmbedderConfig::slots() const {
  if (syllable_slots != 0) return syllable_slots;
  return subword_dim == 0 ? 0 : highway_dim / subword_dim;
}

std::size_t EmbedderConfig::cnn_features() const {
  return std::accumulate(feature_maps.begin(), feature_maps.end(), std::size_t{0});
}

std::size_t EmbedderConfig::output_dim() const {
  return kind == EmbedderKind::Word ? subword_dim : highway_dim;
}

void EmbedderConfig::validate() const {
  if (subword_dim == 0) throw UsageError("subword_dim must be positive");
  if (kind == EmbedderKind::Word) return;
  if (highway_dim == 0) throw UsageError("highway_dim must be positive");
  switch (kind) {
    case EmbedderKind::MorphSum:
      if (subword_dim != highway_dim) {
        throw UsageError("morphsum needs subword_dim == highway_dim");
      }
      break;
    case EmbedderKind::SylConcat:
      if (slots() == 0 || slots() * subword_dim != highway_dim) {
        throw UsageError("sylconcat needs syllable_slots * subword_dim == highway_dim");
      }
      break;
    case EmbedderKind::CharCNN: {
      if (char_dim == 0) throw UsageError("char_dim must be positive");
      if (filter_widths.empty() || filter_widths.size() != feature_maps.size()) {
        throw UsageError("filter_widths and feature_maps must be non-empty and the same length");
      }
      const auto widest = *std::max_element(filter_widths.begin(), filter_widths.end());
      if (std::find(filter_widths.begin(), filter_widths.end(), 0u) != filter_widths.end() ||
          std::find(feature_maps.begin(), feature_maps.end(), 0u) != feature_maps.end()) {
        throw UsageError("filter widths and feature maps must be positive");
      }
      if (max_word_len < 3 || max_word_len < widest) {
        throw UsageError("max_word_len must be >= 3 and >= the widest filter");
      }
      break;
    }
    case EmbedderKind::Word: break;
  }
}

template <typename T>
EmbedderStack<T>::EmbedderStack(std::string prefix, EmbedderConfig config, std::size_t table_rows,
                                ParamRegistry<T>& registry)
    : prefix_(std::move(prefix)), config_(std::move(config)), table_rows_(table_rows) {
  config_.validate();
  if (table_rows_ == 0) throw UsageError("embedding table needs at least one row");
  const auto& c = config_;

  EmbedderLayer emb{"emb", {}};
  const std::size_t emb_dim = c.kind == EmbedderKind::CharCNN ? c.char_dim : c.subword_dim;
  emb.slots.push_back(slot("emb", "table"));
  registry.add(emb.slots.back(), table_rows_, emb_dim);
  layers_.push_back(std::move(emb));
  if (c.kind == EmbedderKind::Word) return;

  if (c.kind == EmbedderKind::CharCNN) {
    EmbedderLayer cnn{"cnn", {}};
    for (std::size_t i = 0; i < c.filter_widths.size(); ++i) {
      const std::string w = std::to_string(c.filter_widths[i]);
      cnn.slots.push_back(slot("cnn", "K" + w));
      registry.add(cnn.slots.back(), c.filter_widths[i] * c.char_dim, c.feature_maps[i]);
      cnn.slots.push_back(slot("cnn", "b" + w));
      registry.add(cnn.slots.back(), 1, c.feature_maps[i]);
    }
    if (c.cnn_features() != c.highway_dim) {
      cnn.slots.push_back(slot("cnn", "proj"));
      registry.add(cnn.slots.back(), c.cnn_features(), c.highway_dim);
    }
    layers_.push_back(std::move(cnn));
  }

  const std::size_t d = c.highway_dim;
  for (std::size_t k = 1; k <= c.highway_layers; ++k) {
    const std::string name = "hw" + std::to_string(k);
    EmbedderLayer hw{name, {slot(name, "W"), slot(name, "c"), slot(name, "A"), slot(name, "b")}};
    registry.add(hw.slots[0], d, d);
    registry.add(hw.slots[1], 1, d, InitRule::HighwayGateBias);
    registry.add(hw.slots[2], d, d);
    registry.add(hw.slots[3], 1, d);
    layers_.push_back(std::move(hw));
  }
}

template <typename T>
std::string EmbedderStack<T>::slot(std::string_view layer, std::string_view name) const {
  return prefix_ + "." + std::string(layer) + "." + std::string(name);
}

template <typename T>
void EmbedderStack<T>::set_char_markers(std::size_t pad, std::size_t bow, std::size_t eow) {
  pad_ = pad;
  bow_ = bow;
  eow_ = eow;
}

template <typename T>
typename EmbedderStack<T>::Var EmbedderStack<T>::compose(
    Graph<T>& g, ParamRegistry<T>& registry,
    std::span<const std::vector<std::size_t>> words) const {
  const auto& c = config_;
  const Var table = g.param(registry.at(slot("emb", "table")));
  switch (c.kind) {
    case EmbedderKind::Word: {
      std::vector<std::size_t> rows;
      rows.reserve(words.size());
      for (const auto& w : words) {
        if (w.size() != 1) throw UsageError("word embedder expects one index per word");
        rows.push_back(w[0]);
      }
      return g.gather_rows(table, std::move(rows));
    }
    case EmbedderKind::MorphSum: {
      std::vector<std::vector<std::size_t>> groups(words.begin(), words.end());
      for (const auto& grp : groups) {
        if (grp.empty()) throw UsageError("morphsum: word without units");
      }
      return g.gather_sum(table, std::move(groups));
    }
    case EmbedderKind::SylConcat: {
      const std::size_t slots = c.slots();
      std::vector<std::ptrdiff_t> idx(words.size() * slots, -1);
      for (std::size_t i = 0; i < words.size(); ++i) {
        if (words[i].empty()) throw UsageError("sylconcat: word without units");
        const std::size_t n = std::min(slots, words[i].size());
        for (std::size_t j = 0; j < n; ++j) {
          idx[i * slots + j] = static_cast<std::ptrdiff_t>(words[i][j]);
        }
      }
      return g.gather_concat(table, std::move(idx), slots);
    }
    case EmbedderKind::CharCNN: {
      const std::size_t len = c.max_word_len;
      std::vector<std::vector<std::size_t>> seqs;
      std::vector<std::size_t> lengths;
      seqs.reserve(words.size());
      for (const auto& w : words) {
        const std::size_t n = std::min(w.size(), len - 2);
        std::vector<std::size_t> s(len, pad_);
        s[0] = bow_;
        std::copy_n(w.begin(), n, s.begin() + 1);
        s[n + 1] = eow_;
        seqs.push_back(std::move(s));
        lengths.push_back(n + 2);
      }
      std::vector<Var> pooled;
      for (std::size_t f = 0; f < c.filter_widths.size(); ++f) {
        const std::size_t width = c.filter_widths[f];
        const std::size_t positions = len - width + 1;
        std::vector<std::ptrdiff_t> idx;
        std::vector<std::uint8_t> valid;
        idx.reserve(words.size() * positions * width);
        valid.reserve(words.size() * positions);
        for (std::size_t i = 0; i < seqs.size(); ++i) {
          for (std::size_t p = 0; p < positions; ++p) {
            for (std::size_t k = 0; k < width; ++k) {
              idx.push_back(static_cast<std::ptrdiff_t>(seqs[i][p + k]));
            }
            // Windows reaching into the padding are masked out of the max;
            // a word shorter than the filter keeps only its first window.
            valid.push_back(p + width <= lengths[i] || (p == 0 && lengths[i] < width) ? 1 : 0);
          }
        }
        const std::string w = std::to_string(width);
        const Var windows = g.gather_concat(table, std::move(idx), width);
        Var conv = g.matmul(windows, g.param(registry.at(slot("cnn", "K" + w))));
        conv = g.tanh(g.add_row(conv, g.param(registry.at(slot("cnn", "b" + w)))));
        pooled.push_back(g.max_over_time(conv, positions, std::move(valid)));
      }
      Var features = pooled.size() == 1 ? pooled[0] : g.concat_cols(pooled);
      if (c.cnn_features() != c.highway_dim) {
        features = g.matmul(features, g.param(registry.at(slot("cnn", "proj"))));
      }
      return features;
    }
  }
  throw UsageError("unknown embedder kind");
}

template <typename T>
typename EmbedderStack<T>::Var EmbedderStack<T>::highway(Graph<T>& g, ParamRegistry<T>& registry,
                                                         Var x, std::size_t layer,
                                                         Var* gate) const {
  const std::string name = "hw" + std::to_string(layer);
  const Var W = g.param(registry.at(slot(name, "W")));
  const Var c = g.param(registry.at(slot(name, "c")));
  const Var A = g.param(registry.at(slot(name, "A")));
  const Var b = g.param(registry.at(slot(name, "b")));
  const Var t = g.sigmoid(g.add_row(g.matmul(x, W), c));
  const Var h = g.relu(g.add_row(g.matmul(x, A), b));
  if (gate) *gate = t;
  // t*h + (1-t)*x, written as x + t*(h-x)
  return g.add(x, g.mul(t, g.sub(h, x)));
}

template <typename T>
typename EmbedderStack<T>::Var EmbedderStack<T>::embed(
    Graph<T>& g, ParamRegistry<T>& registry, std::span<const std::vector<std::size_t>> words,
    Var* gate) const {
  if (words.empty()) throw UsageError("embed: empty word list");
  Var x = compose(g, registry, words);
  for (std::size_t k = 1; k <= config_.highway_layers; ++k) {
    x = highway(g, registry, x, k, k == 1 ? gate : nullptr);
  }
  return x;
}

EmbedderConfig embedder_config_from(const Config& cfg, EmbedderKind kind) {
  EmbedderConfig ec;
  ec.kind = kind;
  const std::size_t hidden = cfg.get_size("hidden_dim", 200);
  if (kind == EmbedderKind::Word) {
    ec.subword_dim = cfg.get_size("word_dim", hidden);
    ec.highway_layers = 0;
    return ec;
  }
  ec.highway_dim = cfg.get_size("highway_dim", hidden);
  ec.highway_layers = cfg.get_size("highway_layers", 2);
  ec.subword_dim = cfg.get_size("subword_dim", kind == EmbedderKind::SylConcat
                                                   ? ec.highway_dim / 4
                                                   : ec.highway_dim);
  ec.char_dim = cfg.get_size("char_dim", ec.char_dim);
  ec.filter_widths = cfg.get_sizes("filter_widths", ec.filter_widths);
  if (cfg.has("feature_maps")) {
    ec.feature_maps = cfg.get_sizes("feature_maps", {});
  } else {
    const std::size_t per_width = cfg.get_size("feature_maps_per_width", 25);
    ec.feature_maps.clear();
    for (auto w : ec.filter_widths) ec.feature_maps.push_back(per_width * w);
  }
  ec.max_word_len = cfg.get_size("max_word_len", ec.max_word_len);
  ec.syllable_slots = cfg.get_size("syllable_slots", 0);
  ec.validate();
  return ec;
}

namespace {
std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}
}  // namespace

void write_embedder_config(const EmbedderConfig& ec, Config& cfg) {
  if (ec.kind == EmbedderKind::Word) {
    cfg.set("word_dim", std::to_string(ec.subword_dim));
    return;
  }
  cfg.set("subword_dim", std::to_string(ec.subword_dim));
  cfg.set("highway_dim", std::to_string(ec.highway_dim));
  cfg.set("highway_layers", std::to_string(ec.highway_layers));
  if (ec.kind == EmbedderKind::CharCNN) {
    cfg.set("char_dim", std::to_string(ec.char_dim));
    cfg.set("filter_widths", join(ec.filter_widths));
    cfg.set("feature_maps", join(ec.feature_maps));
    cfg.set("max_word_len", std::to_string(ec.max_word_len));
  }
  if (ec.kind == EmbedderKind::SylConcat) {
    cfg.set("syllable_slots", std::to_string(ec.slots()));
  }
}

template class EmbedderStack<float>;
template class EmbedderStack<double>;

}  // namespace swlm
