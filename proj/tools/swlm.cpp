// swlm: train, evaluate and analyze subword-aware LSTM language models.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "swlm/analysis.hpp"
#include "swlm/checkpoint.hpp"
#include "swlm/error.hpp"
#include "swlm/morph.hpp"
#include "swlm/pipeline.hpp"
#include "swlm/trainer.hpp"
#include "swlm/tying.hpp"

#ifndef SWLM_VERSION
#define SWLM_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace swlm;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

std::string g_command_line;

void write_manifest(const fs::path& path, const std::string& command, const Config& cfg,
                    const json& extra = json::object()) {
  json m;
  m["command"] = command;
  m["argv"] = g_command_line;
  m["code_version"] = SWLM_VERSION;
  m["config"] = cfg.entries();
  if (cfg.has("seed")) m["seed"] = cfg.get("seed");
  m["outputs"] = extra;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest '" + path.string() + "'");
  out << m.dump(2) << '\n';
}

Config load_config(const std::string& path, const std::vector<std::string>& overrides) {
  Config cfg = path.empty() ? Config{} : Config::load(path);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw UsageError("--set expects key=value, got '" + kv + "'");
    }
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.require_known(known_config_keys());
  return cfg;
}

void apply_model_flags(Config& cfg, const std::string& units, const std::string& reuse,
                       const std::string& tie) {
  if (!units.empty()) cfg.set("units", units);
  if (!reuse.empty()) {
    parse_reuse_mode(reuse);
    cfg.set("reuse", reuse);
    cfg.erase("tie");
  }
  if (!tie.empty()) {
    cfg.set("tie", tie);
    cfg.erase("reuse");
  }
}

// Quotes a CSV cell that holds a comma or a quote.
std::string csv_cell(const std::string& v) {
  if (v.find_first_of(",\"") == std::string::npos) return v;
  std::string q = "\"";
  for (char c : v) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + '"';
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(precision) << v;
  return o.str();
}

TrainSchedule schedule_for(const Config& cfg) {
  // Recipe defaults for the model kind, overridden by explicit keys.
  const ModelConfig mc = ModelConfig::from_config(cfg);
  TrainSchedule base = default_schedule(mc.kind(), mc.subword_softmax, mc.hidden_dim >= 650);
  Config merged;
  base.write(merged);
  merged.merge(cfg);
  return TrainSchedule::from_config(merged);
}

struct TrainOutcome {
  TrainResult result;
  double valid_ppl = 0.0;
  double test_ppl = 0.0;
  std::size_t unique_params = 0;
};

TrainOutcome run_training(PreparedData& data, const fs::path& out_dir, bool quiet) {
  fs::create_directories(out_dir);
  const TrainSchedule sched = schedule_for(data.bundle.config);
  sched.write(data.bundle.config);
  LanguageModel<float> model = build_model(data.bundle);
  TrainOptions opts;
  opts.log_csv = out_dir / "train_log.csv";
  opts.checkpoint = out_dir / "model.ckpt";
  opts.bundle = &data.bundle;
  if (!quiet) {
    opts.on_epoch = [](const EpochRecord& r) {
      std::cout << "epoch " << r.epoch << " lr " << fmt(r.lr) << " train_ppl " << fmt(r.train_ppl, 2)
                << " valid_ppl " << fmt(r.valid_ppl, 2) << " time " << fmt(r.wall_time, 1) << "s"
                << std::endl;
    };
  }
  TrainOutcome o;
  o.result = train(model, data.train, data.valid, sched, opts);
  o.valid_ppl = o.result.best_valid_ppl;
  o.test_ppl = evaluate_ppl(model, data.test, sched.eval_batch_size, sched.bptt_steps);
  o.unique_params = model.params().unique_params();
  return o;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& sets,
              const std::string& data, const std::string& units, const std::string& reuse,
              const std::string& tie, const std::string& out) {
  Config cfg = load_config(config_path, sets);
  apply_model_flags(cfg, units, reuse, tie);
  // Fail on missing splits before leaving an empty output directory behind.
  for (auto s : {Split::Train, Split::Valid, Split::Test}) split_path(data, s);
  const fs::path out_dir = out;
  fs::create_directories(out_dir);
  PreparedData prepared = prepare_data(cfg, data, out_dir);
  write_manifest(out_dir / "manifest.json", "train", prepared.bundle.config,
                 {{"status", "running"}});
  const auto o = run_training(prepared, out_dir, false);
  write_manifest(out_dir / "manifest.json", "train", prepared.bundle.config,
                 {{"status", "complete"},
                  {"checkpoint", (out_dir / "model.ckpt").string()},
                  {"log", (out_dir / "train_log.csv").string()},
                  {"best_epoch", o.result.best_epoch},
                  {"valid_ppl", o.valid_ppl},
                  {"test_ppl", o.test_ppl},
                  {"unique_params", o.unique_params}});
  std::cout << "best_epoch " << o.result.best_epoch << " valid_ppl " << fmt(o.valid_ppl, 2)
            << " test_ppl " << fmt(o.test_ppl, 2) << "\n";
  return kOk;
}

int cmd_eval(const std::string& model_path, const std::string& data, const std::string& split,
             std::size_t batch, std::size_t steps, const std::string& manifest) {
  // Zero batch or steps: take the value recorded in the checkpoint.
  auto ck = load_checkpoint(model_path);
  Split s = Split::Test;
  if (split == "train") s = Split::Train;
  else if (split == "valid") s = Split::Valid;
  else if (split != "test") throw UsageError("--split must be train, valid or test");
  const auto tokens = load_split(data, s);
  const auto stream = encode(ck.bundle.vocab, tokens);
  if (batch == 0) batch = ck.bundle.config.get_size("eval_batch_size", 10);
  if (steps == 0) steps = ck.bundle.config.get_size("bptt_steps", 35);
  const auto r = evaluate(ck.model, stream, batch, steps);
  std::cout << "ppl " << fmt(r.ppl()) << " tokens " << r.tokens << "\n";
  const fs::path mpath =
      manifest.empty() ? fs::path(model_path).parent_path() / "eval_manifest.json" : fs::path(manifest);
  write_manifest(mpath, "eval", ck.bundle.config,
                 {{"checkpoint", model_path}, {"split", split}, {"ppl", r.ppl()}, {"tokens", r.tokens}});
  return kOk;
}

int cmd_segment(const std::string& units, const std::string& in, const std::string& out,
                const std::string& config_path, const std::vector<std::string>& sets,
                const std::string& save_model) {
  Config cfg = load_config(config_path, sets);
  const UnitKind kind = parse_unit_kind(units);
  const auto tokens = load_corpus(in);
  std::map<std::string, std::size_t> counts;
  for (const auto& t : tokens) {
    if (t != kEosToken && t != kUnkToken) ++counts[t];
  }
  fs::path work = save_model.empty() ? fs::path{} : fs::path(save_model).parent_path();
  if (!save_model.empty() && work.empty()) work = ".";
  auto seg = make_segmenter(cfg, kind, counts, work);
  if (!save_model.empty() && cfg.has("morph_model") &&
      fs::absolute(cfg.get("morph_model")) != fs::absolute(save_model)) {
    fs::copy_file(cfg.get("morph_model"), save_model, fs::copy_options::overwrite_existing);
  }
  std::map<std::string, std::vector<std::string>> entries;
  for (const auto& [w, n] : counts) entries[w] = seg->split(w);
  write_segmentation_file(out, entries);
  write_manifest(fs::path(out).string() + ".manifest.json", "segment", cfg,
                 {{"input", in}, {"output", out}, {"words", entries.size()}});
  std::cerr << "segmented " << entries.size() << " word types\n";
  return kOk;
}

int cmd_sweep(const std::string& config_path, const std::vector<std::string>& sets,
              const std::string& data, const std::string& units, const std::string& out,
              std::size_t jobs, bool enumerate_only) {
  Config cfg = load_config(config_path, sets);
  if (!units.empty()) cfg.set("units", units);
  cfg.erase("reuse");
  cfg.erase("tie");
  const ModelConfig base = ModelConfig::from_config(cfg);
  if (base.kind() == EmbedderKind::Word) throw UsageError("sweep-tying needs subword units");
  ParamRegistry<float> probe(false);
  EmbedderStack<float> stack("probe", base.embedder, 1, probe);
  const auto& layers = stack.layers();
  const auto masks = enumerate_bottom_up(layers.size());

  std::optional<PreparedData> prepared;
  const fs::path out_path = out;
  const fs::path work = out_path.parent_path().empty() ? fs::path("sweep")
                                                       : out_path.parent_path() / "sweep";
  if (!data.empty()) prepared = prepare_data(cfg, data, work);

  struct Row {
    std::size_t index;
    std::string tie;
    bool beyond_embedding;
    bool bottom_up;
    std::optional<std::size_t> unique;
    std::optional<double> valid, test;
    std::string status;
  };
  std::vector<Row> rows(masks.size());
  for (std::size_t i = 0; i < masks.size(); ++i) {
    rows[i] = {i, tie_list(masks[i].mask, layers), masks[i].ties_beyond_embedding, masks[i].bottom_up,
               std::nullopt, std::nullopt, std::nullopt, enumerate_only ? "enumerated" : "pending"};
    ModelConfig mc = base;
    mc.tying.mode = ReuseMode::Custom;
    mc.tying.custom_mask = masks[i].mask;
    std::optional<ModelShape> shape;
    if (prepared) {
      shape = model_shape(prepared->bundle.vocab, &*prepared->bundle.subwords);
    } else if (cfg.has("word_vocab_size") && cfg.has("subword_vocab_size")) {
      shape = ModelShape{cfg.get_size("word_vocab_size", 0), cfg.get_size("subword_vocab_size", 0)};
    }
    if (shape) rows[i].unique = count_parameters(mc, *shape).unique_params;
  }

  if (!enumerate_only) {
    if (!prepared) throw UsageError("sweep-tying needs --data unless --enumerate-only is given");
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    auto worker = [&] {
      for (std::size_t i = next++; i < rows.size(); i = next++) {
        PreparedData job = *prepared;
        job.bundle.config.erase("reuse");
        job.bundle.config.set("tie", rows[i].tie);
        try {
          const auto o = run_training(job, work / ("mask" + std::to_string(i)), true);
          std::lock_guard lock(mu);
          rows[i].valid = o.valid_ppl;
          rows[i].test = o.test_ppl;
          rows[i].status = "ok";
          std::cerr << "mask " << rows[i].tie << " valid_ppl " << fmt(o.valid_ppl, 2) << "\n";
        } catch (const NumericError& e) {
          std::lock_guard lock(mu);
          rows[i].status = "diverged";
          std::cerr << "mask " << rows[i].tie << " diverged: " << e.what() << "\n";
        }
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < std::max<std::size_t>(1, jobs); ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::vector<Row> ranked = rows;
  std::stable_sort(ranked.begin(), ranked.end(), [](const Row& a, const Row& b) {
    if (a.valid.has_value() != b.valid.has_value()) return a.valid.has_value();
    if (a.valid && b.valid) return *a.valid < *b.valid;
    return a.index < b.index;
  });
  std::ostringstream csv;
  csv << "rank,tied_layers,ties_beyond_embedding,bottom_up,unique_params,valid_ppl,test_ppl,status\n";
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    const auto& row = ranked[r];
    csv << r + 1 << ',' << csv_cell(row.tie) << ',' << (row.beyond_embedding ? 1 : 0) << ',' << (row.bottom_up ? 1 : 0)
        << ',' << (row.unique ? std::to_string(*row.unique) : "") << ','
        << (row.valid ? fmt(*row.valid, 3) : "") << ',' << (row.test ? fmt(*row.test, 3) : "")
        << ',' << row.status << '\n';
  }
  if (out.empty()) {
    std::cout << csv.str();
  } else {
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    std::ofstream f(out_path);
    if (!f) throw DataError("cannot write '" + out + "'");
    f << csv.str();
    std::size_t beyond = 0;
    for (const auto& r : rows) beyond += r.beyond_embedding ? 1 : 0;
    write_manifest(out_path.string() + ".manifest.json", "sweep-tying", cfg,
                   {{"csv", out}, {"masks", rows.size()}, {"ties_beyond_embedding", beyond}});
  }
  return kOk;
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty()) {
    std::cout << text;
    return;
  }
  const fs::path p = out;
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p);
  if (!f) throw DataError("cannot write '" + out + "'");
  f << text;
}

Side parse_side(const std::string& s) {
  if (s == "input") return Side::Input;
  if (s == "output") return Side::Output;
  throw UsageError("--side must be input or output");
}

std::vector<std::size_t> sample_words(const Vocabulary& vocab, std::size_t n) {
  // The n most frequent words, specials excluded.
  std::vector<std::size_t> out;
  for (std::size_t w = 0; w < vocab.size() && out.size() < n; ++w) {
    if (w != vocab.unk() && w != vocab.eos()) out.push_back(w);
  }
  return out;
}

struct AnalyzeArgs {
  std::string kind, model, word, side = "input", table, settings, data, split = "test", config,
                                                                    out;
  std::vector<std::string> sets;
  std::size_t k = 10, sample = 1000, batch = 10, steps = 35;
  bool all_modes = false;
};

std::string params_csv(const Config& cfg, bool all_modes) {
  const ModelConfig mc = ModelConfig::from_config(cfg);
  if (!cfg.has("word_vocab_size")) throw UsageError("config needs word_vocab_size");
  ModelShape shape{cfg.get_size("word_vocab_size", 0), cfg.get_size("subword_vocab_size", 0)};
  if (mc.kind() != EmbedderKind::Word && shape.subword_size == 0) {
    throw UsageError("config needs subword_vocab_size for subword units");
  }
  std::vector<ParamRow> rows;
  std::vector<ModelConfig> variants;
  if (all_modes) {
    std::vector<ReuseMode> modes = {ReuseMode::None, ReuseMode::RE};
    if (mc.kind() != EmbedderKind::Word && mc.subword_softmax) {
      modes = {ReuseMode::None, ReuseMode::RE, ReuseMode::RW, ReuseMode::RERW};
    }
    if (mc.kind() != EmbedderKind::Word && !mc.subword_softmax) modes = {ReuseMode::None};
    for (auto m : modes) {
      ModelConfig v = mc;
      v.tying.mode = m;
      v.tying.custom_mask.clear();
      variants.push_back(v);
    }
  } else {
    variants.push_back(mc);
  }
  for (const auto& v : variants) {
    ParamRegistry<float> probe(false);
    EmbedderStack<float> stack("probe", v.embedder, 1, probe);
    const std::string label = cfg.get("name", std::string(embedder_kind_name(v.kind()))) + ":" +
                              v.tying.describe(stack.layers());
    rows.push_back({label, count_parameters(v, shape)});
  }
  return param_report_csv(rows);
}

int cmd_analyze(const AnalyzeArgs& a) {
  Config manifest_cfg;
  json extra = {{"kind", a.kind}};
  if (a.kind == "ttr") {
    if (a.table.empty()) throw UsageError("--table is required for ttr");
    std::vector<std::string> settings;
    std::stringstream ss(a.settings);
    for (std::string s; std::getline(ss, s, ',');) {
      if (!s.empty()) settings.push_back(s);
    }
    const auto points = load_ttr_csv(a.table, settings);
    const auto fit = ttr_fit(points);
    json j = {{"points", fit.points}, {"slope", fit.slope}};
    j["pearson_r"] = fit.pearson_r ? json(*fit.pearson_r) : json(nullptr);
    if (!fit.pearson_r) j["note"] = "pearson_r undefined";
    emit(a.out, j.dump(2) + "\n");
  } else if (a.kind == "params") {
    Config cfg = load_config(a.config, a.sets);
    manifest_cfg = cfg;
    emit(a.out, params_csv(cfg, a.all_modes));
  } else {
    if (a.model.empty()) throw UsageError("--model is required for " + a.kind);
    auto ck = load_checkpoint(a.model);
    manifest_cfg = ck.bundle.config;
    extra["model"] = a.model;
    const SubwordVocabulary* sw = ck.bundle.subwords ? &*ck.bundle.subwords : nullptr;
    if (a.kind == "neighbors") {
      if (a.word.empty()) throw UsageError("--word is required for neighbors");
      const auto seg = segmenter_for(ck.bundle);
      const auto rep = nearest_neighbors(ck.model, ck.bundle.vocab, sw, seg.get(), a.word,
                                         parse_side(a.side), a.k);
      json j = {{"query", rep.query}, {"side", a.side}, {"available", rep.available}};
      if (!rep.available) j["reason"] = rep.reason;
      j["neighbors"] = json::array();
      for (const auto& n : rep.neighbors) {
        j["neighbors"].push_back({{"word", n.word}, {"similarity", n.similarity}});
      }
      emit(a.out, j.dump(2) + "\n");
    } else if (a.kind == "pca") {
      const auto curve = pca_curve(ck.model.word_matrix(parse_side(a.side)));
      std::ostringstream o;
      o << "components,retained_variance\n";
      for (const auto& [k, v] : curve) o << k << ',' << std::setprecision(8) << v << '\n';
      emit(a.out, o.str());
    } else if (a.kind == "kde") {
      const auto words = sample_words(ck.bundle.vocab, a.sample);
      std::ostringstream o;
      o << "side,x,density\n";
      std::vector<std::pair<std::string, Side>> sides = {{"input", Side::Input}};
      const auto& reg = ck.model.params();
      if (ck.model.output_stack().config().highway_layers > 0) {
        if (reg.shares_storage("in.hw1.W", "out.hw1.W")) {
          sides = {{"tied", Side::Input}};
        } else {
          sides.emplace_back("output", Side::Output);
        }
      }
      for (const auto& [name, side] : sides) {
        const auto gates = collect_gates(ck.model, side, words);
        const auto kde = gaussian_kde(gates);
        for (std::size_t i = 0; i < kde.grid.size(); ++i) {
          o << name << ',' << std::setprecision(8) << kde.grid[i] << ',' << kde.density[i] << '\n';
        }
        extra[name + "_bandwidth"] = kde.bandwidth;
        extra[name + "_integral"] = kde.integral;
      }
      emit(a.out, o.str());
    } else if (a.kind == "oov") {
      if (a.data.empty()) throw UsageError("--data is required for oov");
      Split s = a.split == "valid" ? Split::Valid : (a.split == "train" ? Split::Train : Split::Test);
      const auto tokens = load_split(a.data, s);
      const auto seg = segmenter_for(ck.bundle);
      const auto r = oov_transfer(ck.model, ck.bundle.vocab, sw, seg.get(), tokens, a.batch, a.steps);
      json j = {{"new_oov_tokens", r.new_oov_tokens}, {"new_oov_types", r.new_oov_types},
                {"composed_types", r.composed_types}, {"tokens", r.tokens}, {"ppl", r.ppl}};
      emit(a.out, j.dump(2) + "\n");
    } else {
      throw UsageError("unknown --kind '" + a.kind + "' (neighbors|pca|kde|ttr|oov|params)");
    }
  }
  if (!a.out.empty()) write_manifest(a.out + ".manifest.json", "analyze", manifest_cfg, extra);
  return kOk;
}

int cmd_count(const std::string& config_path, const std::vector<std::string>& sets,
              bool all_modes, const std::string& out) {
  Config cfg = load_config(config_path, sets);
  const std::string csv = params_csv(cfg, all_modes);
  if (!out.empty()) {
    emit(out, csv);
    write_manifest(out + ".manifest.json", "count-params", cfg);
    return kOk;
  }
  // Human-readable table on stdout.
  std::stringstream ss(csv);
  std::string line;
  std::getline(ss, line);
  std::cout << std::left << std::setw(34) << "model" << std::setw(14) << "params" << "millions\n";
  while (std::getline(ss, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) f.push_back(c);
    std::cout << std::left << std::setw(34) << f[0] << std::setw(14) << f[1] << f[2] << "M\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 0; i < argc; ++i) g_command_line += (i ? " " : "") + std::string(argv[i]);

  CLI::App app{"Subword-aware LSTM language models with weight reuse"};
  app.require_subcommand(1);

  std::string config, data, units, reuse, tie, out = "run", model, split = "test", in,
                                                     save_model, manifest;
  std::vector<std::string> sets;
  std::size_t batch = 0, steps = 0, jobs = 1;
  bool enumerate_only = false, all_modes = false;

  auto* train = app.add_subcommand("train", "Train a model");
  train->add_option("--config", config, "key=value config file");
  train->add_option("--data", data, "Directory with train/valid/test splits")->required();
  train->add_option("--units", units, "word|char|syl|morph");
  train->add_option("--reuse", reuse, "none|re|rw|rerw");
  train->add_option("--tie", tie, "Tied layer list, e.g. emb,hw2");
  train->add_option("--set", sets, "Config override key=value")->take_all();
  train->add_option("--out", out, "Output directory");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--model", model, "Checkpoint")->required();
  eval->add_option("--data", data, "Data directory")->required();
  eval->add_option("--split", split, "train|valid|test");
  eval->add_option("--batch-size", batch, "Evaluation lanes (default: checkpoint's eval_batch_size)");
  eval->add_option("--steps", steps, "Window length (default: checkpoint's bptt_steps)");
  eval->add_option("--manifest", manifest, "Manifest path");

  auto* segment = app.add_subcommand("segment", "Write a segmentation file");
  segment->add_option("--units", units, "char|syl|morph")->required();
  segment->add_option("--in", in, "Input text")->required();
  segment->add_option("--out", out, "Output segmentation file")->required();
  segment->add_option("--config", config, "Config file (patterns, morph_model, ...)");
  segment->add_option("--set", sets, "Config override key=value")->take_all();
  segment->add_option("--save-model", save_model, "Where to store a trained morph model");

  auto* sweep = app.add_subcommand("sweep-tying", "Train every layer-tying mask");
  std::string sweep_out;
  sweep->add_option("--config", config, "Config file");
  sweep->add_option("--data", data, "Data directory");
  sweep->add_option("--units", units, "char|syl|morph");
  sweep->add_option("--set", sets, "Config override key=value")->take_all();
  sweep->add_option("--out", sweep_out, "Ranked CSV (stdout when absent)");
  sweep->add_option("--jobs", jobs, "Parallel training jobs");
  sweep->add_flag("--enumerate-only", enumerate_only, "List masks without training");

  auto* analyze = app.add_subcommand("analyze", "Run an analysis");
  AnalyzeArgs aa;
  analyze->add_option("--kind", aa.kind, "neighbors|pca|kde|ttr|oov|params")->required();
  analyze->add_option("--model", aa.model, "Checkpoint");
  analyze->add_option("--word", aa.word, "Query word (neighbors)");
  analyze->add_option("--side", aa.side, "input|output");
  analyze->add_option("--k", aa.k, "Neighbor count");
  analyze->add_option("--sample", aa.sample, "Words sampled for kde");
  analyze->add_option("--table", aa.table, "TTR CSV (ttr)");
  analyze->add_option("--settings", aa.settings, "Comma list of TTR settings to keep");
  analyze->add_option("--data", aa.data, "Corpus B directory (oov)");
  analyze->add_option("--split", aa.split, "Corpus B split (oov)");
  analyze->add_option("--batch-size", aa.batch, "Evaluation lanes (oov)");
  analyze->add_option("--config", aa.config, "Config file (params)");
  analyze->add_option("--set", aa.sets, "Config override key=value")->take_all();
  analyze->add_flag("--all-modes", aa.all_modes, "All reuse modes (params)");
  analyze->add_option("--out", aa.out, "Output file (stdout when absent)");

  auto* count = app.add_subcommand("count-params", "Count trainable parameters");
  std::string count_out;
  count->add_option("--config", config, "Config file")->required();
  count->add_option("--set", sets, "Config override key=value")->take_all();
  count->add_flag("--all-modes", all_modes, "Report none/re/rw/rerw");
  count->add_option("--out", count_out, "CSV output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*train) return cmd_train(config, sets, data, units, reuse, tie, out);
    if (*eval) return cmd_eval(model, data, split, batch, steps, manifest);
    if (*segment) return cmd_segment(units, in, out, config, sets, save_model);
    if (*sweep) return cmd_sweep(config, sets, data, units, sweep_out, jobs, enumerate_only);
    if (*analyze) return cmd_analyze(aa);
    if (*count) return cmd_count(config, sets, all_modes, count_out);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
