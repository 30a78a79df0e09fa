#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "swlm/config.hpp"
#include "swlm/corpus.hpp"
#include "swlm/embedders.hpp"
#include "swlm/graph.hpp"
#include "swlm/params.hpp"
#include "swlm/random.hpp"
#include "swlm/segmentation.hpp"
#include "swlm/tying.hpp"

namespace swlm {

struct ModelConfig {
  EmbedderConfig embedder;
  std::size_t hidden_dim = 200;
  std::size_t lstm_layers = 2;
  // Subword kinds only: build the output matrix with an output embedder
  // (true) or use a plain word-level softmax matrix (false).
  bool subword_softmax = true;
  TyingConfig tying;

  EmbedderKind kind() const { return embedder.kind; }

  // Keys: units, hidden_dim, lstm_layers, word_dim, subword_dim, highway_dim,
  // highway_layers, char_dim, filter_widths, feature_maps,
  // feature_maps_per_width, max_word_len, syllable_slots, softmax, reuse, tie.
  static ModelConfig from_config(const Config& cfg);
  void write(Config& cfg) const;
};

// Vocabulary-dependent sizes of a model.
struct ModelShape {
  std::size_t vocab_size = 0;
  std::size_t subword_size = 0;
  // CharCNN marker indices in the character vocabulary.
  std::size_t pad = 0, bow = 1, eow = 2;
};

// Per-layer recurrent state, each [lanes x hidden_dim].
template <typename T>
struct LMState {
  std::vector<Tensor<T>> h;
  std::vector<Tensor<T>> c;
  std::size_t lanes() const { return h.empty() ? 0 : h[0].rows(); }
};

// Variational dropout masks for one batch: 0/1 entries, one row per lane,
// reused at every time step of the window.
template <typename T>
struct DropoutMasks {
  T rate = T(0);
  std::vector<Tensor<T>> input;   // per layer, [lanes x layer input dim]
  std::vector<Tensor<T>> hidden;  // per layer, [lanes x hidden_dim]
  Tensor<T> output;               // [lanes x hidden_dim]
};

template <typename T>
struct ForwardOptions {
  const DropoutMasks<T>* masks = nullptr;
  // In (0, 1): sampled softmax with this fraction of the vocabulary.
  double sample_fraction = 0.0;
  Rng* rng = nullptr;
  // Reuse the cached word matrices as constants (evaluation only).
  bool frozen = false;
};

template <typename T>
struct ForwardResult {
  typename Graph<T>::Var loss;  // summed NLL over all targets, in nats
  std::size_t target_count = 0;
  LMState<T> state;             // detached final state
  typename Graph<T>::Var hidden;  // top LSTM outputs, time-major [steps*lanes x d]
  typename Graph<T>::Var logits;  // exact softmax only
};

enum class Side { Input, Output };

// Candidate set of one sampled-softmax evaluation.
struct SampledCandidates {
  std::vector<std::size_t> words;      // targets first, then negatives
  std::vector<double> log_expected;    // log expected count, 0 for targets
  std::size_t target_count = 0;
  std::size_t negative_count = 0;
};

// Two-layer LSTM language model over word or subword input embeddings with
// a word-level or subword-generated output matrix and a word-level bias.
//
// Slot names: in.*/out.* for the embedder stacks, lstm{k}.Wx/Wh/b with gate
// order (input, forget, cell, output), softmax.b, and softmax.proj when the
// highway width differs from the LSTM width.
template <typename T>
class LanguageModel {
 public:
  using Var = typename Graph<T>::Var;

  LanguageModel(ModelConfig config, ModelShape shape, Segmentation segmentation = {},
                bool allocate = true);

  const ModelConfig& config() const { return config_; }
  const ModelShape& shape() const { return shape_; }
  const Segmentation& segmentation() const { return segmentation_; }
  ParamRegistry<T>& params() { return registry_; }
  const ParamRegistry<T>& params() const { return registry_; }
  const EmbedderStack<T>& input_stack() const { return input_; }
  const EmbedderStack<T>& output_stack() const { return output_; }
  const std::vector<std::string>& tied_layers() const { return tied_; }
  bool fully_tied() const;
  std::size_t input_dim() const { return input_.output_dim(); }

  LMState<T> initial_state(std::size_t lanes) const;

  ForwardResult<T> forward(Graph<T>& g, const BatchView& batch, const LMState<T>& state,
                           const ForwardOptions<T>& options = {});

  // Word embeddings for arbitrary unit lists on either side.
  Var embed_words(Graph<T>& g, Side side, std::span<const std::vector<std::size_t>> units,
                  Var* gate = nullptr);
  // Output word matrix [V x d] as a graph node (composed from units for subword heads).
  Var output_matrix(Graph<T>& g);

  // Forward-only, cached until parameters change.
  const Tensor<T>& word_matrix(Side side);
  Tensor<T> embed_units(Side side, std::span<const std::vector<std::size_t>> units);
  // HW1 transform-gate values of the given words.
  Tensor<T> gate_values(Side side, std::span<const std::size_t> words);

  // Logits h E^T (+ projection) + b for a batch of hidden rows.
  Tensor<T> logits(const Tensor<T>& hidden);

  std::vector<std::size_t> units_of(std::size_t word) const;

  SampledCandidates sample_candidates(std::span<const std::size_t> targets, double fraction,
                                      Rng& rng) const;

 private:
  Var lstm_layer(Graph<T>& g, std::size_t layer, Var x, std::size_t steps, std::size_t lanes,
                 const LMState<T>& state, LMState<T>& out_state, const DropoutMasks<T>* masks);
  Var input_vectors(Graph<T>& g, std::span<const std::size_t> tokens, bool frozen,
                    Var* full_output);
  Var project(Graph<T>& g, Var h);
  Var output_rows(Graph<T>& g, std::span<const std::size_t> words);
  std::vector<std::vector<std::size_t>> all_units() const;

  ModelConfig config_;
  ModelShape shape_;
  Segmentation segmentation_;
  ParamRegistry<T> registry_;
  EmbedderStack<T> input_;
  EmbedderStack<T> output_;
  std::vector<std::string> tied_;
  bool has_projection_ = false;
  WordVectorCache<T> input_cache_;
  WordVectorCache<T> output_cache_;
};

// Parameter counts of a model assembled shape-only (no allocation).
TyingReport count_parameters(const ModelConfig& config, const ModelShape& shape);

template <typename T>
TyingReport count_parameters(const LanguageModel<T>& model) {
  return tying_report(model.params(), model.tied_layers());
}

// Perplexity from a summed NLL.
double perplexity(double total_nll, std::size_t tokens);

}  // namespace swlm
