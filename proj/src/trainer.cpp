#include "swlm/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "swlm/error.hpp"
#include "swlm/optim.hpp"

namespace swlm {

TrainSchedule TrainSchedule::from_config(const Config& cfg) {
  TrainSchedule s;
  s.initial_lr = cfg.get_double("initial_lr", s.initial_lr);
  s.decay_start = cfg.get_size("decay_start", s.decay_start);
  s.decay_rate = cfg.get_double("decay_rate", s.decay_rate);
  s.epochs = cfg.get_size("epochs", s.epochs);
  s.bptt_steps = cfg.get_size("bptt_steps", s.bptt_steps);
  s.batch_size = cfg.get_size("batch_size", s.batch_size);
  s.clip_norm = cfg.get_double("clip_norm", s.clip_norm);
  s.dropout = cfg.get_double("dropout", s.dropout);
  s.init_range = cfg.get_double("init_range", s.init_range);
  s.seed = static_cast<std::uint64_t>(cfg.get_int("seed", static_cast<std::int64_t>(s.seed)));
  s.sample_fraction = cfg.get_double("sample_fraction", s.sample_fraction);
  s.lr_probe = cfg.get_bool("lr_probe", s.lr_probe);
  s.eval_batch_size = cfg.get_size("eval_batch_size", s.eval_batch_size);
  if (const char* env = std::getenv("SWLM_SEED"); env && *env) {
    try {
      s.seed = std::stoull(env);
    } catch (const std::exception&) {
      throw UsageError("SWLM_SEED must be a non-negative integer");
    }
  }
  s.validate();
  return s;
}

void TrainSchedule::write(Config& cfg) const {
  auto num = [](double v) {
    std::ostringstream o;
    o << std::setprecision(17) << v;
    return o.str();
  };
  cfg.set("initial_lr", num(initial_lr));
  cfg.set("decay_start", std::to_string(decay_start));
  cfg.set("decay_rate", num(decay_rate));
  cfg.set("epochs", std::to_string(epochs));
  cfg.set("bptt_steps", std::to_string(bptt_steps));
  cfg.set("batch_size", std::to_string(batch_size));
  cfg.set("clip_norm", num(clip_norm));
  cfg.set("dropout", num(dropout));
  cfg.set("init_range", num(init_range));
  cfg.set("seed", std::to_string(seed));
  cfg.set("sample_fraction", num(sample_fraction));
  cfg.set("lr_probe", lr_probe ? "true" : "false");
  cfg.set("eval_batch_size", std::to_string(eval_batch_size));
}

void TrainSchedule::validate() const {
  if (!(initial_lr > 0.0)) throw UsageError("initial_lr must be positive");
  if (!(decay_rate > 0.0 && decay_rate <= 1.0)) throw UsageError("decay_rate must be in (0, 1]");
  if (bptt_steps == 0 || batch_size == 0 || eval_batch_size == 0) {
    throw UsageError("bptt_steps and batch sizes must be positive");
  }
  if (!(clip_norm > 0.0)) throw UsageError("clip_norm must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw UsageError("dropout must be in [0, 1)");
  if (!(init_range > 0.0)) throw UsageError("init_range must be positive");
  if (!(sample_fraction >= 0.0 && sample_fraction < 1.0)) {
    throw UsageError("sample_fraction must be in [0, 1)");
  }
}

TrainSchedule default_schedule(EmbedderKind kind, bool subword_softmax, bool medium,
                               bool wikitext) {
  TrainSchedule s;
  const bool word = kind == EmbedderKind::Word;
  if (word && !medium) {
    s.initial_lr = 1.0;
  } else if (kind == EmbedderKind::CharCNN ||
             (kind == EmbedderKind::SylConcat && medium && subword_softmax)) {
    s.initial_lr = 0.5;
  } else {
    s.initial_lr = 0.7;
  }
  s.decay_start = word && !medium ? 5 : (kind == EmbedderKind::CharCNN ? 12 : 10);
  s.init_range = medium ? 0.05 : 0.1;
  if (wikitext) {
    s.dropout = medium ? 0.4 : 0.2;
  } else {
    s.dropout = medium ? 0.5 : 0.3;
  }
  return s;
}

double lr_at(std::size_t epoch, const TrainSchedule& schedule) {
  if (epoch == 0) throw UsageError("epochs are numbered from 1");
  if (epoch <= schedule.decay_start) return schedule.initial_lr;
  return schedule.initial_lr *
         std::pow(schedule.decay_rate, static_cast<double>(epoch - schedule.decay_start));
}

template <typename T>
void init_parameters(ParamRegistry<T>& registry, double init_range, std::uint64_t seed) {
  if (!registry.allocated()) throw UsageError("cannot initialize a shape-only registry");
  Rng rng(seed);
  for (auto* s : registry.storages()) {
    auto v = s->value.values();
    for (auto& x : v) x = static_cast<T>(rng.uniform(-init_range, init_range));
    switch (s->init) {
      case InitRule::LstmBias: {
        const std::size_t d = s->cols / 4;
        for (std::size_t i = d; i < 2 * d; ++i) v[i] = T(1);
        break;
      }
      case InitRule::HighwayGateBias:
        for (auto& x : v) x = static_cast<T>(-2.0 + x);
        break;
      case InitRule::Zero: s->value.fill(T(0)); break;
      case InitRule::Uniform: break;
    }
    s->grad.fill(T(0));
  }
  registry.bump_version();
}

template <typename T>
DropoutMasks<T> sample_dropout_masks(const LanguageModel<T>& model, std::size_t lanes,
                                     double rate, Rng& rng) {
  DropoutMasks<T> m;
  m.rate = static_cast<T>(rate);
  const double keep = 1.0 - rate;
  auto draw = [&](std::size_t cols) {
    Tensor<T> t(lanes, cols);
    for (auto& x : t.values()) x = rng.bernoulli(keep) ? T(1) : T(0);
    return t;
  };
  const std::size_t d = model.config().hidden_dim;
  for (std::size_t l = 0; l < model.config().lstm_layers; ++l) {
    m.input.push_back(draw(l == 0 ? model.input_dim() : d));
    m.hidden.push_back(draw(d));
  }
  m.output = draw(d);
  return m;
}

template <typename T>
EvalResult evaluate(LanguageModel<T>& model, const EncodedStream& stream, std::size_t batch_size,
                    std::size_t steps) {
  const auto batches = eval_batches(stream, batch_size, steps);
  EvalResult r;
  auto state = model.initial_state(batch_size);
  ForwardOptions<T> opts;
  opts.frozen = true;
  for (const auto& b : batches) {
    Graph<T> g;
    auto out = model.forward(g, b, state, opts);
    r.total_nll += static_cast<double>(g.scalar(out.loss));
    r.tokens += out.target_count;
    state = std::move(out.state);
  }
  return r;
}

namespace {

struct EpochStats {
  double nll = 0.0;
  std::size_t tokens = 0;
  double first_batch = 0.0;
  double last_batches = 0.0;
  std::size_t last_count = 0;
};

EpochStats run_epoch(LanguageModel<float>& model, const std::vector<BatchView>& batches,
                     const TrainSchedule& schedule, double lr, Rng& rng, std::size_t epoch,
                     std::size_t max_batches) {
  EpochStats st;
  auto state = model.initial_state(schedule.batch_size);
  const std::size_t n = max_batches ? std::min(max_batches, batches.size()) : batches.size();
  for (std::size_t i = 0; i < n; ++i) {
    Graph<float> g;
    DropoutMasks<float> masks;
    ForwardOptions<float> opts;
    if (schedule.dropout > 0.0) {
      masks = sample_dropout_masks(model, schedule.batch_size, schedule.dropout, rng);
      opts.masks = &masks;
    }
    opts.sample_fraction = schedule.sample_fraction;
    opts.rng = &rng;
    ForwardResult<float> out;
    try {
      out = model.forward(g, batches[i], state, opts);
      g.backward(out.loss);
    } catch (const NumericError& e) {
      throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                         std::to_string(i + 1) + " (lr " + std::to_string(lr) + "): " + e.what());
    }
    const double loss = g.scalar(out.loss);
    clip_global_norm(model.params(), schedule.clip_norm, schedule.batch_size);
    sgd_step(model.params(), lr);
    state = std::move(out.state);
    const double mean = loss / static_cast<double>(out.target_count);
    if (i == 0) st.first_batch = mean;
    if (i + 10 >= n) {
      st.last_batches += mean;
      ++st.last_count;
    }
    st.nll += loss;
    st.tokens += out.target_count;
  }
  return st;
}

std::vector<std::vector<float>> snapshot(const ParamRegistry<float>& reg) {
  std::vector<std::vector<float>> out;
  for (const auto* s : reg.storages()) out.emplace_back(s->value.values().begin(), s->value.values().end());
  return out;
}

void restore(ParamRegistry<float>& reg, const std::vector<std::vector<float>>& snap) {
  auto storages = reg.storages();
  for (std::size_t i = 0; i < storages.size(); ++i) {
    std::copy(snap[i].begin(), snap[i].end(), storages[i]->value.values().begin());
    storages[i]->grad.fill(0.0f);
  }
  reg.bump_version();
}

}  // namespace

TrainResult train(LanguageModel<float>& model, const EncodedStream& train_stream,
                  const EncodedStream& valid_stream, const TrainSchedule& schedule,
                  const TrainOptions& options) {
  schedule.validate();
  if (options.checkpoint && !options.bundle) {
    throw UsageError("checkpointing needs the model bundle");
  }
  const auto batches = batchify(train_stream, schedule.batch_size, schedule.bptt_steps);
  init_parameters(model.params(), schedule.init_range, schedule.seed);

  TrainResult result;
  TrainSchedule sched = schedule;
  if (schedule.lr_probe) {
    const auto initial = snapshot(model.params());
    double lr = 1.0;
    for (;; lr -= 0.1) {
      if (lr < 0.05) throw NumericError("learning-rate probe found no converging rate");
      Rng probe_rng(schedule.seed ^ 0x9e3779b97f4a7c15ULL);
      bool converged = false;
      try {
        const auto st = run_epoch(model, batches, schedule, lr, probe_rng, 1, options.max_batches);
        converged = st.last_count > 0 && st.last_batches / st.last_count < st.first_batch;
      } catch (const NumericError&) {
        converged = false;
      }
      restore(model.params(), initial);
      if (converged) break;
    }
    sched.initial_lr = std::round(lr * 10.0) / 10.0;
  }
  result.initial_lr = sched.initial_lr;

  std::ofstream log;
  if (options.log_csv) {
    log.open(*options.log_csv);
    if (!log) throw DataError("cannot write training log '" + options.log_csv->string() + "'");
    log << "epoch,lr,train_ppl,valid_ppl,wall_time\n";
  }

  Rng rng(sched.seed + 1);
  std::vector<std::vector<float>> best;
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t epoch = 1; epoch <= sched.epochs; ++epoch) {
    const double lr = lr_at(epoch, sched);
    const auto st = run_epoch(model, batches, sched, lr, rng, epoch, options.max_batches);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_ppl = perplexity(st.nll, st.tokens);
    rec.valid_ppl = evaluate_ppl(model, valid_stream, sched.eval_batch_size, sched.bptt_steps);
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!std::isfinite(rec.valid_ppl)) {
      throw NumericError("validation perplexity is not finite at epoch " + std::to_string(epoch));
    }
    if (epoch == 1) result.first_epoch_loss = st.nll / static_cast<double>(st.tokens);
    if (best.empty() || rec.valid_ppl < result.best_valid_ppl) {
      result.best_valid_ppl = rec.valid_ppl;
      result.best_epoch = epoch;
      best = snapshot(model.params());
      if (options.checkpoint) save_checkpoint(*options.checkpoint, *options.bundle, model);
    }
    result.epochs.push_back(rec);
    if (log) {
      log << rec.epoch << ',' << std::setprecision(10) << rec.lr << ',' << rec.train_ppl << ','
          << rec.valid_ppl << ',' << std::setprecision(6) << rec.wall_time << '\n'
          << std::flush;
    }
    if (options.on_epoch) options.on_epoch(rec);
  }
  if (!best.empty()) restore(model.params(), best);
  return result;
}

template void init_parameters(ParamRegistry<float>&, double, std::uint64_t);
template void init_parameters(ParamRegistry<double>&, double, std::uint64_t);
template DropoutMasks<float> sample_dropout_masks(const LanguageModel<float>&, std::size_t, double,
                                                  Rng&);
template DropoutMasks<double> sample_dropout_masks(const LanguageModel<double>&, std::size_t,
                                                   double, Rng&);
template EvalResult evaluate(LanguageModel<float>&, const EncodedStream&, std::size_t, std::size_t);
template EvalResult evaluate(LanguageModel<double>&, const EncodedStream&, std::size_t,
                             std::size_t);

}  // namespace swlm
