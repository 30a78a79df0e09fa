// Acceptance suite: one PASS/FAIL/SKIP line per criterion. Exits nonzero
// only when a gating criterion fails.

#include <sys/wait.h>

#include <array>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "mdl_oracle.hpp"
#include "swlm/analysis.hpp"
#include "swlm/hyphenation.hpp"
#include "swlm/morph.hpp"
#include "swlm/pipeline.hpp"
#include "swlm/segmentation.hpp"
#include "swlm/tying.hpp"
#include "test_support.hpp"

using namespace swlm;
using namespace swlm::testing;
namespace fs = std::filesystem;
using Var = Graph<double>::Var;

namespace {

enum class Status { Pass, Fail, Skip };

// Collects failed checks for one criterion.
struct Checks {
  std::vector<std::string> failures;
  std::vector<std::string> notes;
  std::optional<std::string> skip;

  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  void note(const std::string& s) { notes.push_back(s); }
};

struct Criterion {
  int id;
  std::string title;
  bool gating;
  std::function<void(Checks&)> run;
};

std::string fixed(double v, int precision = 4) {
  std::ostringstream o;
  o.setf(std::ios::fixed);
  o.precision(precision);
  o << v;
  return o.str();
}

struct CliResult {
  int code = -1;
  std::string output;
};

CliResult run_cli(const std::string& args) {
  const std::string cmd = std::string(SWLM_CLI_PATH) + " " + args + " 2>&1";
  CliResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe)) r.output += buf.data();
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string config_path(const std::string& name) {
  return (data_dir() / "configs" / (name + ".cfg")).string();
}

std::optional<fs::path> ptb_dir() {
  const char* env = std::getenv("SWLM_PTB_DIR");
  if (!env || !*env) return std::nullopt;
  return fs::path(env);
}

// "label params ..." rows of count-params, keyed by the mode suffix.
std::map<std::string, double> count_params_millions(const std::string& cfg, Checks& c) {
  const auto r = run_cli("count-params --all-modes --config " + cfg);
  c.expect(r.code == 0, "count-params exited with " + std::to_string(r.code));
  std::map<std::string, double> out;
  std::istringstream in(r.output);
  for (std::string line; std::getline(in, line);) {
    std::istringstream row(line);
    std::string label;
    double params = 0;
    if (!(row >> label >> params)) continue;
    out[label.substr(label.rfind(':') + 1)] = params / 1e6;
  }
  return out;
}

void c1_parameter_counts(Checks& c) {
  const std::map<std::string, std::map<std::string, double>> targets{
      {"ptb-morph-small", {{"none", 2.4}, {"re", 1.6}, {"rw", 2.2}, {"rerw", 1.5}}},
      {"ptb-morph-medium", {{"none", 14.5}, {"re", 12.3}, {"rw", 12.8}, {"rerw", 10.7}}},
      {"ptb-word-small", {{"none", 4.7}, {"re", 2.7}}},
  };
  for (const auto& [cfg, modes] : targets) {
    const auto got = count_params_millions(config_path(cfg), c);
    for (const auto& [mode, want] : modes) {
      const auto it = got.find(mode);
      if (it == got.end()) {
        c.expect(false, cfg + ":" + mode + " missing from output");
        continue;
      }
      const double rel = std::abs(it->second - want) / want;
      c.note(cfg + ":" + mode + " " + fixed(it->second, 2) + "M/" + fixed(want, 1) + "M");
      c.expect(rel <= 0.05, cfg + ":" + mode + " off by " + fixed(100 * rel, 1) + "%");
    }
  }
}

// sum(out * W) with a fixed random W so every output element matters.
Var project(Graph<double>& g, Var out) {
  const auto& v = g.value(out);
  Rng local(v.rows() * 131 + v.cols());
  return g.sum(g.mul(out, g.constant(random_tensor(v.rows(), v.cols(), local))));
}

void c2_gradients(Checks& c) {
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::size_t checks = 0;
  auto record = [&](const std::string& what, const GradcheckReport& r) {
    ++checks;
    worst = std::max(worst, r.max_rel_error);
    c.expect(r.checked > 0, what + ": nothing checked");
    c.expect(r.max_rel_error < 1e-4, what + ": relative error " + std::to_string(r.max_rel_error));
  };

  ParamRegistry<double> reg;
  Rng rng(11);
  auto param = [&](const std::string& name, std::size_t r, std::size_t cols) -> ParamStorage<double>& {
    auto& s = reg.add(name, r, cols);
    fill_uniform(s, rng, 1.0);
    return s;
  };
  auto& a = param("a", 3, 4);
  auto& b = param("b", 3, 4);
  auto& m = param("m", 4, 2);
  auto& n = param("n", 5, 4);
  auto& row = param("row", 1, 4);
  auto& nar = param("nar", 3, 2);
  auto& tab = param("tab", 5, 3);
  auto& wide = param("wide", 1, 6);
  auto& seq = param("seq", 8, 3);
  auto& logits = param("logits", 4, 6);
  const Tensor<double> mask(3, 4, {1, 0, 1, 1, 0, 0, 1, 1, 0, 1, 1, 0});
  const std::vector<std::size_t> targets{0, 5, 2, 2};

  const std::vector<std::pair<std::string, std::function<Var(Graph<double>&)>>> ops = {
      {"add", [&](Graph<double>& g) { return g.add(g.param(a), g.param(b)); }},
      {"sub", [&](Graph<double>& g) { return g.sub(g.param(a), g.param(b)); }},
      {"mul", [&](Graph<double>& g) { return g.mul(g.param(a), g.param(b)); }},
      {"scale", [&](Graph<double>& g) { return g.scale(g.param(a), -1.7); }},
      {"sigmoid", [&](Graph<double>& g) { return g.sigmoid(g.param(a)); }},
      {"tanh", [&](Graph<double>& g) { return g.tanh(g.param(a)); }},
      {"relu", [&](Graph<double>& g) { return g.relu(g.param(a)); }},
      {"sum", [&](Graph<double>& g) { return g.sum(g.mul(g.param(a), g.param(a))); }},
      {"matmul", [&](Graph<double>& g) { return g.matmul(g.param(a), g.param(m)); }},
      {"matmul_nt", [&](Graph<double>& g) { return g.matmul_nt(g.param(a), g.param(n)); }},
      {"add_row", [&](Graph<double>& g) { return g.add_row(g.param(a), g.param(row)); }},
      {"concat_cols",
       [&](Graph<double>& g) {
         const std::vector<Var> parts{g.param(a), g.param(nar), g.param(a)};
         return g.concat_cols(parts);
       }},
      {"concat_rows",
       [&](Graph<double>& g) {
         const std::vector<Var> parts{g.param(n), g.param(a)};
         return g.concat_rows(parts);
       }},
      {"slice_cols", [&](Graph<double>& g) { return g.slice_cols(g.param(a), 1, 3); }},
      {"slice_rows", [&](Graph<double>& g) { return g.slice_rows(g.param(n), 1, 4); }},
      {"gather_rows", [&](Graph<double>& g) { return g.gather_rows(g.param(tab), {4, 0, 4, 2}); }},
      {"gather_cols", [&](Graph<double>& g) { return g.gather_cols(g.param(wide), {5, 1, 1, 0}); }},
      {"gather_sum",
       [&](Graph<double>& g) { return g.gather_sum(g.param(tab), {{0, 1}, {4}, {2, 2, 3}}); }},
      {"gather_concat",
       [&](Graph<double>& g) { return g.gather_concat(g.param(tab), {3, -1, 0, 3, 1, -1}, 3); }},
      {"max_over_time",
       [&](Graph<double>& g) { return g.max_over_time(g.param(seq), 4, {1, 1, 1, 0, 1, 1, 0, 0}); }},
      {"dropout", [&](Graph<double>& g) { return g.dropout(g.param(a), mask, 0.4); }},
  };
  for (const auto& [name, build] : ops) {
    record(name, gradcheck(reg, [&](Graph<double>& g) { return project(g, build(g)); }));
  }
  for (auto red : {Reduction::Mean, Reduction::Sum}) {
    record("softmax_cross_entropy", gradcheck(reg, [&](Graph<double>& g) {
             return g.softmax_cross_entropy(g.param(logits), targets, red);
           }));
  }

  for (auto kind : {EmbedderKind::CharCNN, EmbedderKind::SylConcat, EmbedderKind::MorphSum}) {
    for (auto mode : {ReuseMode::None, ReuseMode::RE, ReuseMode::RW, ReuseMode::RERW}) {
      auto model = toy_model(kind, mode);
      const auto stream = toy_stream(7, 6, 5);
      const auto batch = batchify(stream, 2, 3).at(0);
      Rng mask_rng(8);
      const auto masks = sample_dropout_masks(model, 2, 0.3, mask_rng);
      auto state = model.initial_state(2);
      Rng srng(1);
      for (auto& h : state.h) h = random_tensor(2, model.config().hidden_dim, srng);
      for (auto& cell : state.c) cell = random_tensor(2, model.config().hidden_dim, srng);
      const auto r = gradcheck(model.params(), [&](Graph<double>& g) {
        ForwardOptions<double> opts;
        opts.masks = &masks;
        return model.forward(g, batch, state, opts).loss;
      });
      record(std::string(embedder_kind_name(kind)) + "+" + std::string(reuse_mode_name(mode)), r);
    }
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  c.note(std::to_string(checks) + " checks, worst " + std::to_string(worst) + ", " + fixed(secs, 1) +
         "s");
  c.expect(secs < 300.0, "gradient checks took longer than 5 minutes");
}

void c3_tying(Checks& c) {
  auto model = toy_model(EmbedderKind::MorphSum, ReuseMode::RERW);
  c.expect(model.fully_tied(), "RE+RW model does not report full tying");
  // Every output-side slot aliases the input-side storage of the same layer.
  std::map<std::string, const ParamStorage<double>*> by_name;
  for (const auto& slot : model.params().slots()) by_name[slot.name] = slot.storage.get();
  std::size_t aliased = 0;
  for (const auto& [name, storage] : by_name) {
    if (name.rfind("out.", 0) != 0) continue;
    const auto in = by_name.find("in." + name.substr(4));
    c.expect(in != by_name.end() && in->second == storage, name + " is not shared with the input side");
    ++aliased;
  }
  c.expect(aliased > 0, "no output-side slots to compare");

  Rng rng(6);
  const auto h = random_tensor(3, model.config().hidden_dim, rng);
  const auto logits = model.logits(h);
  const auto& in = model.word_matrix(Side::Input);
  const auto& bias = model.params().at("softmax.b").value;
  double max_diff = 0.0;
  for (std::size_t r = 0; r < h.rows(); ++r) {
    for (std::size_t w = 0; w < in.rows(); ++w) {
      double dot = bias[w];
      for (std::size_t j = 0; j < h.cols(); ++j) dot += h(r, j) * in(w, j);
      max_diff = std::max(max_diff, std::abs(dot - logits(r, w)));
    }
  }
  c.note("max |logit - (h.e + b)| = " + std::to_string(max_diff));
  c.expect(max_diff < 1e-12, "logits differ from input-embedding dot products");

  for (auto kind : {EmbedderKind::MorphSum, EmbedderKind::SylConcat, EmbedderKind::CharCNN}) {
    auto unique = [&](ReuseMode mode) {
      auto s = toy_setup(kind, mode);
      s.shape.vocab_size = 500;
      s.shape.subword_size = 120;
      return count_parameters(s.config, s.shape).unique_params;
    };
    const auto none = unique(ReuseMode::None), re = unique(ReuseMode::RE),
               rw = unique(ReuseMode::RW), both = unique(ReuseMode::RERW);
    const std::string k(embedder_kind_name(kind));
    c.expect(none > re && re > both, k + ": none > RE > RE+RW violated");
    c.expect(none > rw && rw > both, k + ": none > RW > RE+RW violated");
  }
}

void c4_sweep(Checks& c) {
  for (auto [units, layers, flagged] : {std::tuple{"morph", 3, 6}, std::tuple{"char", 4, 14}}) {
    const auto r = run_cli(std::string("sweep-tying --enumerate-only --units ") + units);
    c.expect(r.code == 0, std::string("sweep-tying --units ") + units + " failed");
    std::istringstream in(r.output);
    std::string header;
    std::getline(in, header);
    std::size_t rows = 0;
    int flags = 0;
    for (std::string line; std::getline(in, line);) {
      if (line.empty()) continue;
      ++rows;
      // Third column; the tie list may be quoted and hold commas.
      std::size_t pos = line.find(',') + 1;
      if (line[pos] == '"') pos = line.find('"', pos + 1) + 1;
      else pos = line.find(',', pos);
      flags += line.compare(pos, 3, ",1,") == 0;
    }
    const std::size_t expected_rows = std::size_t{1} << layers;
    c.note(std::string(units) + ": " + std::to_string(rows) + " masks, " + std::to_string(flags) +
           " flagged");
    c.expect(rows == expected_rows, std::string(units) + ": expected " +
                                        std::to_string(expected_rows) + " CSV rows");
    c.expect(flags == flagged, std::string(units) + ": expected " + std::to_string(flagged) +
                                   " flagged masks");
  }
}

// Reads "key value" pairs from the final summary line of `train`.
std::map<std::string, double> summary_values(const std::string& output) {
  std::map<std::string, double> out;
  std::istringstream in(output);
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("best_epoch", 0) != 0) continue;
    std::istringstream row(line);
    std::string key;
    double value = 0;
    while (row >> key >> value) out[key] = value;
  }
  return out;
}

std::string first_log_row(const fs::path& csv) {
  std::ifstream in(csv);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  // Drop the trailing wall-clock column.
  return row.substr(0, row.rfind(','));
}

void c5_training(Checks& c) {
  TempDir dir("accept-train");
  const auto corpus = data_dir() / "synthetic";
  const auto start = std::chrono::steady_clock::now();
  const auto full = run_cli("train --config " + config_path("synthetic-morph-small") + " --data " +
                            corpus.string() + " --out " + (dir / "full").string());
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  c.expect(full.code == 0, "training exited with " + std::to_string(full.code));
  const auto values = summary_values(full.output);
  if (!values.contains("test_ppl")) {
    c.expect(false, "no summary line in training output");
    return;
  }

  const auto train_tokens = load_split(corpus, Split::Train);
  const auto test_tokens = load_split(corpus, Split::Test);
  const auto vocab = Vocabulary::build(train_tokens);
  const double unigram =
      unigram_perplexity(encode(vocab, train_tokens), encode(vocab, test_tokens), vocab.size());
  const double ppl = values.at("test_ppl");
  c.note("test PPL " + fixed(ppl, 2) + " vs unigram " + fixed(unigram, 2) + " (ratio " +
         fixed(ppl / unigram, 3) + "), " + fixed(secs / 60.0, 1) + " min, " +
         std::to_string(train_tokens.size()) + " training tokens");
  c.expect(ppl < 0.7 * unigram, "test PPL is not below 0.7 x unigram");
  c.expect(secs < 15 * 60, "training took longer than 15 minutes");

  // Same seed, fresh process: the first epoch replays exactly.
  const auto replay = run_cli("train --config " + config_path("synthetic-morph-small") +
                              " --set epochs=1 --data " + corpus.string() + " --out " +
                              (dir / "replay").string());
  c.expect(replay.code == 0, "replay run failed");
  const auto a = first_log_row(dir / "full" / "train_log.csv");
  const auto b = first_log_row(dir / "replay" / "train_log.csv");
  c.expect(!a.empty() && a == b, "first epoch differs between runs: '" + a + "' vs '" + b + "'");
}

void c6_numerics(Checks& c) {
  auto s = toy_setup(EmbedderKind::MorphSum, ReuseMode::RERW, 16, 16);
  s.shape.vocab_size = 200;
  s.shape.subword_size = 40;
  s.segmentation.units.clear();
  for (std::size_t w = 0; w < 200; ++w) s.segmentation.units.push_back({w % 40, (w * 7) % 40});
  LanguageModel<double> model(s.config, s.shape, s.segmentation);
  init_parameters(model.params(), 0.05, 1);

  // Row sums of exp(-loss) over every possible target, through the
  // library's own cross-entropy.
  Rng rng(4);
  auto h = random_tensor(3, 16, rng);
  for (auto& v : h.values()) v *= 20.0;  // spread the logits
  const auto logits = model.logits(h);
  double worst_sum = 0.0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    double total = 0.0;
    for (std::size_t w = 0; w < 200; ++w) {
      Graph<double> one;
      const std::vector<std::size_t> t{w};
      Tensor<double> single(1, 200);
      for (std::size_t j = 0; j < 200; ++j) single[j] = logits(r, j);
      total += std::exp(-one.scalar(one.softmax_cross_entropy(one.constant(single), t, Reduction::Sum)));
    }
    worst_sum = std::max(worst_sum, std::abs(total - 1.0));
  }
  c.note("max |sum p - 1| = " + std::to_string(worst_sum));
  c.expect(worst_sum <= 1e-6, "softmax rows do not sum to 1");

  const auto r = evaluate(model, toy_stream(400, 200, 2), 4, 10);
  const double nll = r.total_nll / static_cast<double>(r.tokens);
  c.note("untrained NLL " + fixed(nll, 4) + " vs ln|W| " + fixed(std::log(200.0), 4));
  c.expect(std::abs(nll - std::log(200.0)) / std::log(200.0) < 0.05, "untrained NLL not near ln|W|");

  auto fm = toy_setup(EmbedderKind::MorphSum, ReuseMode::None, 16, 16);
  fm.shape = s.shape;
  fm.segmentation = s.segmentation;
  LanguageModel<float> fmodel(fm.config, fm.shape, fm.segmentation);
  init_parameters(fmodel.params(), 0.5, 3);
  std::vector<std::size_t> words(200);
  std::iota(words.begin(), words.end(), 0);
  double worst_kde = 0.0;
  for (auto side : {Side::Input, Side::Output}) {
    const auto gates = collect_gates(fmodel, side, words);
    worst_kde = std::max(worst_kde, std::abs(gaussian_kde(gates).integral - 1.0));
  }
  c.note("max |KDE integral - 1| = " + std::to_string(worst_kde));
  c.expect(worst_kde <= 1e-3, "KDE does not integrate to 1");

  for (auto side : {Side::Input, Side::Output}) {
    const auto curve = pca_curve(fmodel.word_matrix(side));
    bool monotone = true;
    for (std::size_t i = 1; i < curve.size(); ++i) monotone &= curve[i].second >= curve[i - 1].second;
    c.expect(monotone, "PCA curve decreases");
    c.expect(!curve.empty() && curve.back().second == 1.0, "PCA curve does not end at 1");
  }
}

std::size_t concatenation_violations(const fs::path& corpus, Checks& c, const std::string& tag) {
  const auto tokens = load_split(corpus, Split::Train);
  const auto vocab = Vocabulary::build(tokens);
  const auto counts = word_frequency_table(vocab);
  std::size_t bad = 0;
  for (auto kind : {UnitKind::Char, UnitKind::Syllable, UnitKind::Morph}) {
    Config cfg;
    if (kind == UnitKind::Morph) cfg.set("morph_counts", "type");
    const auto seg = make_segmenter(cfg, kind, counts);
    const auto inv = build_subword_vocab(vocab, *seg);
    for (std::size_t w = 0; w < vocab.size(); ++w) {
      if (w == vocab.unk() || w == vocab.eos()) continue;
      std::string joined;
      for (auto u : inv.segmentation.units[w]) joined += inv.vocab.unit(u);
      bad += joined != vocab.word(w);
    }
  }
  c.note(tag + ": " + std::to_string(vocab.size()) + " words x 3 unit kinds, " + std::to_string(bad) +
         " violations");
  return bad;
}

void c7_segmentation(Checks& c) {
  const auto patterns = HyphenationPatterns::load(data_dir() / "patterns" / "hyph_en_US.dic");
  const Syllabifier syl(patterns);
  std::ifstream in(data_dir() / "fixtures" / "syllables_en.tsv");
  std::size_t words = 0, mismatches = 0;
  for (std::string line; std::getline(in, line);) {
    const auto tab = line.find('\t');
    std::istringstream parts(line.substr(tab + 1));
    std::vector<std::string> expected;
    for (std::string p; parts >> p;) expected.push_back(p);
    ++words;
    if (syl.split(line.substr(0, tab)) != expected) {
      ++mismatches;
      c.expect(false, "syllables of '" + line.substr(0, tab) + "'");
    }
  }
  c.note("syllable fixture " + std::to_string(words - mismatches) + "/" + std::to_string(words));
  c.expect(words == 50, "fixture should hold 50 words");

  const auto lexicon = walk_talk_lexicon();
  const auto oracle = brute_force_mdl(lexicon);
  const std::set<std::string> want{"walk", "talk", "s", "ed"};
  const auto model = MorphModel::train(lexicon);
  std::set<std::string> learned;
  for (const auto& [m, n] : model.lexicon()) learned.insert(m);
  c.expect(oracle.morphs == want, "brute-force optimum is not {walk, talk, s, ed}");
  c.expect(learned == want, "morph trainer did not recover {walk, talk, s, ed}");
  c.expect(std::abs(model.total_cost() - oracle.cost) < 1e-9 * oracle.cost,
           "morph trainer cost differs from the exhaustive optimum");

  c.expect(concatenation_violations(data_dir() / "synthetic", c, "synthetic") == 0,
           "concatenation invariant broken on the synthetic vocabulary");
  if (const auto ptb = ptb_dir()) {
    c.expect(concatenation_violations(*ptb, c, "PTB") == 0,
             "concatenation invariant broken on the PTB vocabulary");
  } else {
    c.note("PTB vocabulary check skipped (SWLM_PTB_DIR unset)");
  }
}

void c8_ttr(Checks& c) {
  const auto points = load_ttr_csv(data_dir() / "fixtures" / "ttr_points.csv");
  const auto fit = ttr_fit(points);
  c.note(std::to_string(fit.points) + " points, slope " + fixed(fit.slope, 2) + ", r " +
         (fit.pearson_r ? fixed(*fit.pearson_r, 3) : std::string("n/a")));
  c.expect(std::abs(fit.slope - 2109.0) / 2109.0 < 0.15, "slope outside 15% of 2109");
  c.expect(fit.pearson_r && std::abs(*fit.pearson_r - 0.84) < 0.1, "r outside 0.1 of 0.84");
}

void c9_full_ptb(Checks& c) {
  const auto ptb = ptb_dir();
  if (!ptb) {
    c.skip = "SWLM_PTB_DIR unset";
    return;
  }
  const char* run = std::getenv("SWLM_ACCEPT_FULL");
  if (!run || std::string(run) != "1") {
    c.skip = "full 70-epoch run needs SWLM_ACCEPT_FULL=1 (hours of CPU time)";
    return;
  }
  TempDir dir("accept-ptb");
  const auto r = run_cli("train --config " + config_path("ptb-morph-small") + " --data " +
                         ptb->string() + " --out " + (dir / "run").string());
  c.expect(r.code == 0, "training exited with " + std::to_string(r.code));
  const auto values = summary_values(r.output);
  if (!values.contains("test_ppl")) {
    c.expect(false, "no summary line in training output");
    return;
  }
  c.note("test PPL " + fixed(values.at("test_ppl"), 2));
  c.expect(values.at("test_ppl") <= 90.0, "test PPL above 90");
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "parameter counts", true, c1_parameter_counts},
      {2, "gradient checks", true, c2_gradients},
      {3, "tying semantics", true, c3_tying},
      {4, "sweep enumeration", true, c4_sweep},
      {5, "synthetic training", true, c5_training},
      {6, "normalization and numerics", true, c6_numerics},
      {7, "segmentation", true, c7_segmentation},
      {8, "TTR regression", true, c8_ttr},
      {9, "full PTB perplexity (non-gating)", false, c9_full_ptb},
  };
  bool gating_failed = false;
  for (const auto& cr : criteria) {
    Checks checks;
    const auto start = std::chrono::steady_clock::now();
    try {
      cr.run(checks);
    } catch (const std::exception& e) {
      checks.failures.push_back(std::string("exception: ") + e.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    Status status = Status::Pass;
    if (!checks.failures.empty()) status = Status::Fail;
    else if (checks.skip) status = Status::Skip;
    const char* tag = status == Status::Pass ? "PASS" : status == Status::Fail ? "FAIL" : "SKIP";
    std::string detail;
    for (const auto& n : checks.notes) detail += (detail.empty() ? "" : "; ") + n;
    if (checks.skip) detail += (detail.empty() ? "" : "; ") + *checks.skip;
    for (const auto& f : checks.failures) detail += (detail.empty() ? "" : "; ") + ("FAILED " + f);
    std::cout << tag << " C" << cr.id << " " << cr.title << " [" << fixed(secs, 1) << "s] " << detail
              << std::endl;
    if (status == Status::Fail && cr.gating) gating_failed = true;
  }
  return gating_failed ? 1 : 0;
}
