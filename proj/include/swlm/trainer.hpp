#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "swlm/checkpoint.hpp"
#include "swlm/config.hpp"
#include "swlm/corpus.hpp"
#include "swlm/random.hpp"
#include "swlm/rnnlm.hpp"

namespace swlm {

struct TrainSchedule {
  double initial_lr = 1.0;
  std::size_t decay_start = 5;
  double decay_rate = 0.9;
  std::size_t epochs = 70;
  std::size_t bptt_steps = 35;
  std::size_t batch_size = 20;
  double clip_norm = 5.0;
  double dropout = 0.0;
  double init_range = 0.1;
  std::uint64_t seed = 1;
  // 0 disables sampled softmax.
  double sample_fraction = 0.0;
  // Pick the initial rate by the 1.0, 0.9, ... first-epoch probe.
  bool lr_probe = false;
  std::size_t eval_batch_size = 10;

  // Keys match the field names. The SWLM_SEED environment variable, when
  // set, overrides `seed`.
  static TrainSchedule from_config(const Config& cfg);
  void write(Config& cfg) const;
  void validate() const;
};

// Recipe defaults for a model kind and size ("small" or "medium").
TrainSchedule default_schedule(EmbedderKind kind, bool subword_softmax, bool medium,
                               bool wikitext = false);

double lr_at(std::size_t epoch, const TrainSchedule& schedule);

// Uniform(-range, range) from a seeded generator over unique storages in id
// order, with the forget-gate and highway-gate bias exceptions. Run after
// tying so shared storages are initialized once.
template <typename T>
void init_parameters(ParamRegistry<T>& registry, double init_range, std::uint64_t seed);

template <typename T>
DropoutMasks<T> sample_dropout_masks(const LanguageModel<T>& model, std::size_t lanes,
                                     double rate, Rng& rng);

struct EvalResult {
  double total_nll = 0.0;
  std::size_t tokens = 0;
  double ppl() const { return perplexity(total_nll, tokens); }
};

// Stateful pass over the stream with dropout off and the word matrices
// frozen for the whole pass.
template <typename T>
EvalResult evaluate(LanguageModel<T>& model, const EncodedStream& stream, std::size_t batch_size,
                    std::size_t steps);

template <typename T>
double evaluate_ppl(LanguageModel<T>& model, const EncodedStream& stream,
                    std::size_t batch_size = 10, std::size_t steps = 35) {
  return evaluate(model, stream, batch_size, steps).ppl();
}

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_ppl = 0.0;
  double valid_ppl = 0.0;
  double wall_time = 0.0;
};

struct TrainOptions {
  std::optional<std::filesystem::path> log_csv;
  std::optional<std::filesystem::path> checkpoint;
  // Required when `checkpoint` is set.
  const ModelBundle* bundle = nullptr;
  std::function<void(const EpochRecord&)> on_epoch;
  // Caps batches per epoch; 0 means all.
  std::size_t max_batches = 0;
};

struct TrainResult {
  std::vector<EpochRecord> epochs;
  double best_valid_ppl = 0.0;
  std::size_t best_epoch = 0;
  double initial_lr = 0.0;
  // Mean NLL of the first epoch, for replay checks.
  double first_epoch_loss = 0.0;
};

// Full recipe: per epoch iterate windows with carried state, fresh
// variational masks per window, backward on the summed NLL, clip by batch
// size and norm, SGD. The best-validation parameters are written to the
// checkpoint and left in the model at the end.
TrainResult train(LanguageModel<float>& model, const EncodedStream& train_stream,
                  const EncodedStream& valid_stream, const TrainSchedule& schedule,
                  const TrainOptions& options = {});

}  // namespace swlm
