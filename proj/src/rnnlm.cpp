#include "swlm/rnnlm.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "swlm/error.hpp"

namespace swlm {

namespace {

EmbedderConfig output_config(const ModelConfig& mc) {
  if (mc.kind() != EmbedderKind::Word && mc.subword_softmax) return mc.embedder;
  EmbedderConfig word;
  word.kind = EmbedderKind::Word;
  word.subword_dim = mc.hidden_dim;
  word.highway_layers = 0;
  return word;
}

std::size_t output_rows_of(const ModelConfig& mc, const ModelShape& shape) {
  if (mc.kind() != EmbedderKind::Word && mc.subword_softmax) return shape.subword_size;
  return shape.vocab_size;
}

std::size_t input_rows_of(const ModelConfig& mc, const ModelShape& shape) {
  return mc.kind() == EmbedderKind::Word ? shape.vocab_size : shape.subword_size;
}

template <typename T>
Tensor<T> tile_rows(const Tensor<T>& m, std::size_t times) {
  std::vector<T> data;
  data.reserve(m.size() * times);
  for (std::size_t k = 0; k < times; ++k) data.insert(data.end(), m.values().begin(), m.values().end());
  return Tensor<T>(m.rows() * times, m.cols(), std::move(data));
}

template <typename T>
Tensor<T> gather(const Tensor<T>& m, std::span<const std::size_t> rows) {
  Tensor<T> out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(m.row(rows[i]).begin(), m.row(rows[i]).end(), out.row(i).begin());
  }
  return out;
}

}  // namespace

ModelConfig ModelConfig::from_config(const Config& cfg) {
  ModelConfig mc;
  const EmbedderKind kind = parse_embedder_kind(cfg.get("units", "morph"));
  mc.hidden_dim = cfg.get_size("hidden_dim", 200);
  mc.lstm_layers = cfg.get_size("lstm_layers", 2);
  if (mc.hidden_dim == 0 || mc.lstm_layers == 0) {
    throw UsageError("hidden_dim and lstm_layers must be positive");
  }
  mc.embedder = embedder_config_from(cfg, kind);
  const std::string softmax = cfg.get("softmax", kind == EmbedderKind::Word ? "word" : "subword");
  if (softmax != "word" && softmax != "subword") {
    throw UsageError("softmax must be 'word' or 'subword'");
  }
  mc.subword_softmax = softmax == "subword" && kind != EmbedderKind::Word;
  mc.tying.mode = parse_reuse_mode(cfg.get("reuse", "none"));
  if (cfg.has("tie")) {
    // Resolved against the layer list once the stacks exist; stored here as
    // a name list so configs stay human-editable.
    mc.tying.mode = ReuseMode::Custom;
    ParamRegistry<float> probe(false);
    EmbedderStack<float> stack("probe", mc.embedder, 1, probe);
    mc.tying.custom_mask = parse_tie_list(cfg.get("tie"), stack.layers());
  }
  return mc;
}

void ModelConfig::write(Config& cfg) const {
  std::string units;
  switch (kind()) {
    case EmbedderKind::Word: units = "word"; break;
    case EmbedderKind::CharCNN: units = "char"; break;
    case EmbedderKind::SylConcat: units = "syl"; break;
    case EmbedderKind::MorphSum: units = "morph"; break;
  }
  cfg.set("units", units);
  cfg.set("hidden_dim", std::to_string(hidden_dim));
  cfg.set("lstm_layers", std::to_string(lstm_layers));
  cfg.set("softmax", subword_softmax ? "subword" : "word");
  write_embedder_config(embedder, cfg);
  if (tying.mode == ReuseMode::Custom) {
    ParamRegistry<float> probe(false);
    EmbedderStack<float> stack("probe", embedder, 1, probe);
    cfg.erase("reuse");
    cfg.set("tie", tie_list(tying.custom_mask, stack.layers()));
  } else {
    cfg.erase("tie");
    cfg.set("reuse", std::string(reuse_mode_name(tying.mode)));
  }
}

template <typename T>
LanguageModel<T>::LanguageModel(ModelConfig config, ModelShape shape, Segmentation segmentation,
                                bool allocate)
    : config_(std::move(config)),
      shape_(shape),
      segmentation_(std::move(segmentation)),
      registry_(allocate),
      input_("in", config_.embedder, input_rows_of(config_, shape_), registry_),
      output_("out", output_config(config_), output_rows_of(config_, shape_), registry_) {
  if (shape_.vocab_size < 2) throw UsageError("vocabulary needs at least two words");
  const bool subword = config_.kind() != EmbedderKind::Word;
  if (subword && shape_.subword_size == 0) throw UsageError("subword vocabulary is empty");
  if (subword && allocate) {
    if (segmentation_.word_count() != shape_.vocab_size) {
      throw UsageError("segmentation covers " + std::to_string(segmentation_.word_count()) +
                       " words, vocabulary has " + std::to_string(shape_.vocab_size));
    }
    for (const auto& units : segmentation_.units) {
      if (units.empty()) throw DataError("segmentation contains a word without units");
      for (auto u : units) {
        if (u >= shape_.subword_size) throw DataError("segmentation unit index out of range");
      }
    }
  }
  input_.set_char_markers(shape_.pad, shape_.bow, shape_.eow);
  output_.set_char_markers(shape_.pad, shape_.bow, shape_.eow);

  const std::size_t d = config_.hidden_dim;
  for (std::size_t l = 1; l <= config_.lstm_layers; ++l) {
    const std::string p = "lstm" + std::to_string(l);
    const std::size_t d_in = l == 1 ? input_.output_dim() : d;
    registry_.add(p + ".Wx", d_in, 4 * d);
    registry_.add(p + ".Wh", d, 4 * d);
    registry_.add(p + ".b", 1, 4 * d, InitRule::LstmBias);
  }
  if (output_.output_dim() != d) {
    registry_.add("softmax.proj", d, output_.output_dim());
    has_projection_ = true;
  }
  registry_.add("softmax.b", 1, shape_.vocab_size);

  const std::size_t depth = input_.layers().size();
  const bool stacks_match = output_.layers().size() == depth &&
                            output_.config().kind == input_.config().kind;
  if (!stacks_match) {
    const auto mask = config_.tying.mask(depth);
    if (std::find(mask.begin(), mask.end(), true) != mask.end()) {
      throw UsageError("weight reuse needs a subword softmax (or the word model)");
    }
    return;
  }
  tied_ = apply_tying(registry_, input_, output_, config_.tying.mask(depth));
}

template <typename T>
bool LanguageModel<T>::fully_tied() const {
  return !tied_.empty() && tied_.size() == input_.layers().size() &&
         output_.config().kind == input_.config().kind;
}

template <typename T>
LMState<T> LanguageModel<T>::initial_state(std::size_t lanes) const {
  LMState<T> s;
  for (std::size_t l = 0; l < config_.lstm_layers; ++l) {
    s.h.emplace_back(lanes, config_.hidden_dim);
    s.c.emplace_back(lanes, config_.hidden_dim);
  }
  return s;
}

template <typename T>
std::vector<std::size_t> LanguageModel<T>::units_of(std::size_t word) const {
  if (word >= shape_.vocab_size) throw UsageError("word index out of range");
  if (config_.kind() == EmbedderKind::Word) return {word};
  return segmentation_.units[word];
}

template <typename T>
std::vector<std::vector<std::size_t>> LanguageModel<T>::all_units() const {
  std::vector<std::vector<std::size_t>> out;
  out.reserve(shape_.vocab_size);
  for (std::size_t w = 0; w < shape_.vocab_size; ++w) out.push_back(units_of(w));
  return out;
}

template <typename T>
typename LanguageModel<T>::Var LanguageModel<T>::embed_words(
    Graph<T>& g, Side side, std::span<const std::vector<std::size_t>> units, Var* gate) {
  return (side == Side::Input ? input_ : output_).embed(g, registry_, units, gate);
}

template <typename T>
typename LanguageModel<T>::Var LanguageModel<T>::output_matrix(Graph<T>& g) {
  if (output_.config().kind == EmbedderKind::Word) {
    return g.param(registry_.at("out.emb.table"));
  }
  const auto units = all_units();
  return output_.embed(g, registry_, units);
}

template <typename T>
typename LanguageModel<T>::Var LanguageModel<T>::output_rows(Graph<T>& g,
                                                             std::span<const std::size_t> words) {
  if (output_.config().kind == EmbedderKind::Word) {
    return g.gather_rows(g.param(registry_.at("out.emb.table")),
                         std::vector<std::size_t>(words.begin(), words.end()));
  }
  std::vector<std::vector<std::size_t>> units;
  units.reserve(words.size());
  for (auto w : words) units.push_back(units_of(w));
  return output_.embed(g, registry_, units);
}

template <typename T>
typename LanguageModel<T>::Var LanguageModel<T>::project(Graph<T>& g, Var h) {
  if (!has_projection_) return h;
  return g.matmul(h, g.param(registry_.at("softmax.proj")));
}

template <typename T>
typename LanguageModel<T>::Var LanguageModel<T>::input_vectors(
    Graph<T>& g, std::span<const std::size_t> tokens, bool frozen, Var* full_output) {
  if (frozen) return g.constant(gather(word_matrix(Side::Input), tokens));
  if (full_output && fully_tied()) {
    // Input and output embedders share every storage, so the input vectors
    // are rows of the output matrix.
    *full_output = output_matrix(g);
    return g.gather_rows(*full_output, std::vector<std::size_t>(tokens.begin(), tokens.end()));
  }
  std::unordered_map<std::size_t, std::size_t> slot;
  std::vector<std::vector<std::size_t>> units;
  std::vector<std::size_t> rows;
  rows.reserve(tokens.size());
  for (auto w : tokens) {
    auto [it, inserted] = slot.emplace(w, units.size());
    if (inserted) units.push_back(units_of(w));
    rows.push_back(it->second);
  }
  const Var unique = input_.embed(g, registry_, units);
  return g.gather_rows(unique, std::move(rows));
}

template <typename T>
typename LanguageModel<T>::Var LanguageModel<T>::lstm_layer(Graph<T>& g, std::size_t layer, Var x,
                                                            std::size_t steps, std::size_t lanes,
                                                            const LMState<T>& state,
                                                            LMState<T>& out_state,
                                                            const DropoutMasks<T>* masks) {
  const std::size_t d = config_.hidden_dim;
  const std::string p = "lstm" + std::to_string(layer + 1);
  if (masks) x = g.dropout(x, tile_rows(masks->input.at(layer), steps), masks->rate);
  const Var xw =
      g.add_row(g.matmul(x, g.param(registry_.at(p + ".Wx"))), g.param(registry_.at(p + ".b")));
  const Var wh = g.param(registry_.at(p + ".Wh"));
  Var h = g.constant(state.h.at(layer));
  Var c = g.constant(state.c.at(layer));
  std::vector<Var> outputs;
  outputs.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    const Var hd = masks ? g.dropout(h, masks->hidden.at(layer), masks->rate) : h;
    const Var z = g.add(g.slice_rows(xw, t * lanes, (t + 1) * lanes), g.matmul(hd, wh));
    const Var in_gate = g.sigmoid(g.slice_cols(z, 0, d));
    const Var forget = g.sigmoid(g.slice_cols(z, d, 2 * d));
    const Var cell = g.tanh(g.slice_cols(z, 2 * d, 3 * d));
    const Var out_gate = g.sigmoid(g.slice_cols(z, 3 * d, 4 * d));
    c = g.add(g.mul(forget, c), g.mul(in_gate, cell));
    h = g.mul(out_gate, g.tanh(c));
    outputs.push_back(h);
  }
  out_state.h[layer] = g.value(h);
  out_state.c[layer] = g.value(c);
  return outputs.size() == 1 ? outputs[0] : g.concat_rows(outputs);
}

template <typename T>
ForwardResult<T> LanguageModel<T>::forward(Graph<T>& g, const BatchView& batch,
                                           const LMState<T>& state,
                                           const ForwardOptions<T>& options) {
  const std::size_t lanes = batch.batch_size;
  const std::size_t steps = batch.steps;
  if (lanes == 0 || steps == 0) throw UsageError("forward: empty batch");
  if (state.lanes() != lanes || state.h.size() != config_.lstm_layers) {
    throw UsageError("forward: state does not match the batch lanes");
  }
  const bool sampled = options.sample_fraction > 0.0;
  if (sampled && !(options.sample_fraction < 1.0)) {
    throw UsageError("sample fraction must be in (0, 1)");
  }
  if (sampled && !options.rng) throw UsageError("sampled softmax needs an rng");

  std::vector<std::size_t> inputs(lanes * steps), targets(lanes * steps);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t b = 0; b < lanes; ++b) {
      inputs[t * lanes + b] = batch.input(b, t);
      targets[t * lanes + b] = batch.target(b, t);
    }
  }
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i] >= shape_.vocab_size || targets[i] >= shape_.vocab_size) {
      throw DataError("batch token index out of vocabulary range");
    }
  }

  Var full_output;
  Var x = input_vectors(g, inputs, options.frozen, sampled ? nullptr : &full_output);

  ForwardResult<T> result;
  result.state = initial_state(lanes);
  for (std::size_t l = 0; l < config_.lstm_layers; ++l) {
    x = lstm_layer(g, l, x, steps, lanes, state, result.state, options.masks);
  }
  if (options.masks) {
    x = g.dropout(x, tile_rows(options.masks->output, steps), options.masks->rate);
  }
  result.hidden = x;
  const Var h = project(g, x);
  const Var bias = g.param(registry_.at("softmax.b"));
  result.target_count = targets.size();

  if (!sampled) {
    Var e;
    if (options.frozen) {
      e = g.constant(word_matrix(Side::Output));
    } else {
      e = full_output.valid() ? full_output : output_matrix(g);
    }
    result.logits = g.add_row(g.matmul_nt(h, e), bias);
    result.loss = g.softmax_cross_entropy(result.logits, targets, Reduction::Sum);
    return result;
  }

  const SampledCandidates cand = sample_candidates(targets, options.sample_fraction, *options.rng);
  std::unordered_map<std::size_t, std::size_t> pos;
  for (std::size_t i = 0; i < cand.words.size(); ++i) pos.emplace(cand.words[i], i);
  std::vector<std::size_t> local(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) local[i] = pos.at(targets[i]);

  const Var e = options.frozen ? g.constant(gather(word_matrix(Side::Output), cand.words))
                               : output_rows(g, cand.words);
  Var logits = g.add_row(g.matmul_nt(h, e), g.gather_cols(bias, cand.words));
  Tensor<T> correction(1, cand.words.size());
  for (std::size_t i = 0; i < cand.words.size(); ++i) {
    correction[i] = static_cast<T>(-cand.log_expected[i]);
  }
  logits = g.add_row(logits, g.constant(std::move(correction)));
  result.logits = logits;
  result.loss = g.softmax_cross_entropy(logits, local, Reduction::Sum);
  return result;
}

template <typename T>
SampledCandidates LanguageModel<T>::sample_candidates(std::span<const std::size_t> targets,
                                                      double fraction, Rng& rng) const {
  if (!(fraction > 0.0 && fraction < 1.0)) throw UsageError("sample fraction must be in (0, 1)");
  const std::size_t v = shape_.vocab_size;
  SampledCandidates out;
  std::unordered_set<std::size_t> chosen;
  for (auto t : targets) {
    if (chosen.insert(t).second) {
      out.words.push_back(t);
      out.log_expected.push_back(0.0);
    }
  }
  out.target_count = out.words.size();
  const std::size_t available = v - out.target_count;
  const auto wanted = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(v)));
  const std::size_t negatives = std::min(available, std::max<std::size_t>(1, wanted));
  out.negative_count = negatives;
  if (negatives == available) {
    // Every word is a candidate: the estimate is the exact softmax.
    for (std::size_t w = 0; w < v; ++w) {
      if (!chosen.count(w)) {
        out.words.push_back(w);
        out.log_expected.push_back(0.0);
      }
    }
    return out;
  }
  // Log-uniform (Zipfian) proposal over frequency ranks, drawn with
  // replacement until enough distinct negatives are found.
  const double log_range = std::log(static_cast<double>(v) + 1.0);
  std::size_t tries = 0;
  std::vector<std::size_t> negs;
  while (negs.size() < negatives) {
    const double r = std::exp(rng.uniform() * log_range) - 1.0;
    const auto w = std::min(v - 1, static_cast<std::size_t>(r));
    ++tries;
    if (chosen.insert(w).second) negs.push_back(w);
  }
  for (auto w : negs) {
    const double p = std::log((w + 2.0) / (w + 1.0)) / log_range;
    const double q = -std::expm1(static_cast<double>(tries) * std::log1p(-p));
    out.words.push_back(w);
    out.log_expected.push_back(std::log(q));
  }
  return out;
}

template <typename T>
const Tensor<T>& LanguageModel<T>::word_matrix(Side side) {
  auto& cache = side == Side::Input ? input_cache_ : output_cache_;
  if (cache.valid(registry_)) return cache.matrix();
  Graph<T> g;
  Var m;
  if (side == Side::Output) {
    m = output_matrix(g);
  } else {
    const auto units = all_units();
    m = input_.embed(g, registry_, units);
  }
  cache.store(g.value(m), registry_);
  return cache.matrix();
}

template <typename T>
Tensor<T> LanguageModel<T>::embed_units(Side side,
                                        std::span<const std::vector<std::size_t>> units) {
  Graph<T> g;
  return g.value(embed_words(g, side, units));
}

template <typename T>
Tensor<T> LanguageModel<T>::gate_values(Side side, std::span<const std::size_t> words) {
  const auto& stack = side == Side::Input ? input_ : output_;
  if (stack.config().highway_layers == 0) throw UsageError("embedder has no highway layer");
  if (words.empty()) throw UsageError("gate_values: empty word sample");
  std::vector<std::vector<std::size_t>> units;
  for (auto w : words) units.push_back(units_of(w));
  Graph<T> g;
  Var gate;
  stack.embed(g, registry_, units, &gate);
  return g.value(gate);
}

template <typename T>
Tensor<T> LanguageModel<T>::logits(const Tensor<T>& hidden) {
  Graph<T> g;
  const Var e = g.constant(word_matrix(Side::Output));
  const Var h = project(g, g.constant(hidden));
  return g.value(g.add_row(g.matmul_nt(h, e), g.param(registry_.at("softmax.b"))));
}

TyingReport count_parameters(const ModelConfig& config, const ModelShape& shape) {
  LanguageModel<float> model(config, shape, {}, false);
  return count_parameters(model);
}

double perplexity(double total_nll, std::size_t tokens) {
  if (tokens == 0) throw UsageError("perplexity of an empty stream");
  return std::exp(total_nll / static_cast<double>(tokens));
}

template class LanguageModel<float>;
template class LanguageModel<double>;

}  // namespace swlm
