#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "swlm/config.hpp"
#include "swlm/graph.hpp"
#include "swlm/params.hpp"

namespace swlm {

enum class EmbedderKind { Word, CharCNN, SylConcat, MorphSum };

std::string_view embedder_kind_name(EmbedderKind kind);
EmbedderKind parse_embedder_kind(std::string_view name);

struct EmbedderConfig {
  EmbedderKind kind = EmbedderKind::MorphSum;
  // Subword (or, for Word, word) embedding width.
  std::size_t subword_dim = 200;
  // Highway width; also the output width of every subword embedder.
  std::size_t highway_dim = 200;
  std::size_t highway_layers = 2;

  std::size_t char_dim = 15;
  std::vector<std::size_t> filter_widths = {1, 2, 3, 4, 5, 6};
  std::vector<std::size_t> feature_maps = {25, 50, 75, 100, 125, 150};
  // Includes the begin/end-of-word markers.
  std::size_t max_word_len = 21;

  // Zero means highway_dim / subword_dim.
  std::size_t syllable_slots = 0;

  std::size_t slots() const;
  std::size_t cnn_features() const;
  std::size_t output_dim() const;
  void validate() const;
};

struct EmbedderLayer {
  std::string name;
  std::vector<std::string> slots;
};

// One word-embedding network: a subword table followed by an optional
// composition layer and a stack of ReLU highway layers. Parameters live in
// the caller's registry under `prefix.` names, so an input and an output
// stack built with different prefixes have identical layer lists and can be
// tied slot by slot.
template <typename T>
class EmbedderStack {
 public:
  using Var = typename Graph<T>::Var;

  // `table_rows` is |S| for subword kinds and |W| for Word.
  EmbedderStack(std::string prefix, EmbedderConfig config, std::size_t table_rows,
                ParamRegistry<T>& registry);

  const EmbedderConfig& config() const { return config_; }
  const std::string& prefix() const { return prefix_; }
  std::size_t output_dim() const { return config_.output_dim(); }
  std::size_t table_rows() const { return table_rows_; }

  // Bottom-up: emb, [cnn], hw1, hw2, ...
  const std::vector<EmbedderLayer>& layers() const { return layers_; }

  // Embeds a list of words, one row per entry. Each entry holds the word's
  // unit indices: its subword ids for SylConcat/MorphSum, its character ids
  // (no markers) for CharCNN, and the single word index for Word.
  // `gate`, when given, receives the first highway layer's transform gate.
  Var embed(Graph<T>& g, ParamRegistry<T>& registry,
            std::span<const std::vector<std::size_t>> words, Var* gate = nullptr) const;

  // Character-id layout for CharCNN: BOW and EOW indices plus padding.
  void set_char_markers(std::size_t pad, std::size_t bow, std::size_t eow);

 private:
  Var compose(Graph<T>& g, ParamRegistry<T>& registry,
              std::span<const std::vector<std::size_t>> words) const;
  Var highway(Graph<T>& g, ParamRegistry<T>& registry, Var x, std::size_t layer,
              Var* gate) const;
  std::string slot(std::string_view layer, std::string_view name) const;

  std::string prefix_;
  EmbedderConfig config_;
  std::size_t table_rows_;
  std::vector<EmbedderLayer> layers_;
  std::size_t pad_ = 0, bow_ = 1, eow_ = 2;
};

EmbedderConfig embedder_config_from(const Config& cfg, EmbedderKind kind);
void write_embedder_config(const EmbedderConfig& ec, Config& cfg);

// Caches a forward-only word matrix keyed on the registry version, so the
// output matrix is rebuilt exactly when some parameter changed.
template <typename T>
class WordVectorCache {
 public:
  bool valid(const ParamRegistry<T>& registry) const {
    return filled_ && version_ == registry.version();
  }
  void store(Tensor<T> matrix, const ParamRegistry<T>& registry) {
    matrix_ = std::move(matrix);
    version_ = registry.version();
    filled_ = true;
  }
  void invalidate() { filled_ = false; }
  const Tensor<T>& matrix() const { return matrix_; }

 private:
  Tensor<T> matrix_;
  std::uint64_t version_ = 0;
  bool filled_ = false;
};

}  // namespace swlm
