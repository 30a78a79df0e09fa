#include "swlm/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "swlm/embedders.hpp"
#include "swlm/error.hpp"
#include "swlm/hyphenation.hpp"
#include "swlm/morph.hpp"
#include "swlm/utf8.hpp"

#ifndef SWLM_DATA_DIR
#define SWLM_DATA_DIR "data"
#endif

namespace swlm {

const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys = {
      // model
      "units", "hidden_dim", "lstm_layers", "word_dim", "subword_dim", "highway_dim",
      "highway_layers", "char_dim", "filter_widths", "feature_maps", "feature_maps_per_width",
      "max_word_len", "syllable_slots", "softmax", "reuse", "tie",
      // schedule
      "initial_lr", "decay_start", "decay_rate", "epochs", "bptt_steps", "batch_size",
      "clip_norm", "dropout", "init_range", "seed", "sample_fraction", "lr_probe",
      "eval_batch_size",
      // data and segmentation
      "min_count", "patterns", "left_min", "right_min", "morph_model", "morph_passes",
      "morph_seed", "morph_counts", "segmentation_file", "word_vocab_size", "subword_vocab_size", "name"};
  return keys;
}

std::filesystem::path data_dir() {
  if (const char* env = std::getenv("SWLM_DATA"); env && *env) return env;
  return SWLM_DATA_DIR;
}

namespace {

// frequency: raw counts; log: round(log2(c + 1)); type: 1 per word type.
std::map<std::string, std::size_t> dampen_counts(const std::map<std::string, std::size_t>& counts,
                                                 const std::string& mode) {
  if (mode == "frequency") return counts;
  if (mode != "log" && mode != "type") {
    throw UsageError("morph_counts must be frequency, log or type");
  }
  std::map<std::string, std::size_t> out;
  for (const auto& [w, c] : counts) {
    const auto d = mode == "type" ? 1.0 : std::round(std::log2(static_cast<double>(c) + 1.0));
    if (c > 0) out[w] = std::max<std::size_t>(1, static_cast<std::size_t>(d));
  }
  return out;
}

UnitKind unit_kind_of(EmbedderKind kind) {
  switch (kind) {
    case EmbedderKind::CharCNN: return UnitKind::Char;
    case EmbedderKind::SylConcat: return UnitKind::Syllable;
    default: return UnitKind::Morph;
  }
}

}  // namespace

std::shared_ptr<const Segmenter> make_segmenter(Config& cfg, UnitKind kind,
                                                const std::map<std::string, std::size_t>& word_counts,
                                                const std::filesystem::path& work_dir) {
  std::shared_ptr<const Segmenter> base;
  switch (kind) {
    case UnitKind::Char: base = std::make_shared<CharSegmenter>(); break;
    case UnitKind::Syllable: {
      const std::filesystem::path p =
          cfg.get("patterns", (data_dir() / "patterns" / "hyph_en_US.dic").string());
      auto patterns = HyphenationPatterns::load(p);
      if (cfg.has("left_min") || cfg.has("right_min")) {
        patterns.set_minima(cfg.get_size("left_min", patterns.left_min()),
                            cfg.get_size("right_min", patterns.right_min()));
      }
      cfg.set("patterns", std::filesystem::absolute(p).string());
      base = std::make_shared<Syllabifier>(std::move(patterns));
      break;
    }
    case UnitKind::Morph: {
      if (cfg.has("morph_model")) {
        base = std::make_shared<MorphSegmenter>(MorphModel::load(cfg.get("morph_model")));
        break;
      }
      if (cfg.has("segmentation_file")) break;
      MorphTrainingOptions opts;
      opts.max_passes = cfg.get_size("morph_passes", opts.max_passes);
      opts.seed = static_cast<std::uint64_t>(cfg.get_int("morph_seed", 1));
      if (word_counts.empty()) throw DataError("no words to train the morph segmenter on");
      auto model = MorphModel::train(dampen_counts(word_counts, cfg.get("morph_counts", "frequency")),
                                     opts);
      if (!work_dir.empty()) {
        std::filesystem::create_directories(work_dir);
        const auto path = std::filesystem::absolute(work_dir / "morph.model");
        model.save(path);
        cfg.set("morph_model", path.string());
      }
      base = std::make_shared<MorphSegmenter>(std::move(model));
      break;
    }
  }
  if (cfg.has("segmentation_file")) {
    return std::make_shared<TableSegmenter>(kind, load_segmentation_file(cfg.get("segmentation_file")),
                                            base);
  }
  return base;
}

std::shared_ptr<const Segmenter> segmenter_for(const ModelBundle& bundle) {
  if (!bundle.subwords) return nullptr;
  Config cfg = bundle.config;
  const auto kind = bundle.subwords->kind();
  if (kind == UnitKind::Morph && !cfg.has("morph_model") && !cfg.has("segmentation_file")) {
    // Rebuild a table from the stored segmentation: exact for vocabulary words.
    std::map<std::string, std::vector<std::string>> table;
    for (std::size_t w = 0; w < bundle.vocab.size(); ++w) {
      std::vector<std::string> units;
      for (auto u : bundle.segmentation.units.at(w)) units.push_back(bundle.subwords->unit(u));
      table[bundle.vocab.word(w)] = std::move(units);
    }
    return std::make_shared<TableSegmenter>(kind, std::move(table), std::make_shared<CharSegmenter>());
  }
  return make_segmenter(cfg, kind, {});
}

PreparedData prepare_data(Config cfg, const std::filesystem::path& dir,
                          const std::filesystem::path& work_dir) {
  cfg.require_known(known_config_keys());
  PreparedData d;
  const auto train_tokens = load_split(dir, Split::Train);
  const auto valid_tokens = load_split(dir, Split::Valid);
  const auto test_tokens = load_split(dir, Split::Test);
  d.bundle.vocab = Vocabulary::build(train_tokens, cfg.get_size("min_count", 1));
  d.train = encode(d.bundle.vocab, train_tokens);
  d.valid = encode(d.bundle.vocab, valid_tokens);
  d.test = encode(d.bundle.vocab, test_tokens);

  const EmbedderKind kind = parse_embedder_kind(cfg.get("units", "morph"));
  if (kind == EmbedderKind::CharCNN && !cfg.has("max_word_len")) {
    // Longest training word plus the two markers.
    std::size_t longest = 1;
    for (const auto& w : d.bundle.vocab.words()) {
      if (w != kUnkToken && w != kEosToken) longest = std::max(longest, utf8::split_chars(w).size());
    }
    const auto widths = cfg.get_sizes("filter_widths", EmbedderConfig{}.filter_widths);
    const std::size_t widest = *std::max_element(widths.begin(), widths.end());
    cfg.set("max_word_len", std::to_string(std::max(longest + 2, widest)));
  }
  if (kind != EmbedderKind::Word) {
    d.segmenter = make_segmenter(cfg, unit_kind_of(kind), word_frequency_table(d.bundle.vocab),
                                 work_dir);
    auto inv = build_subword_vocab(d.bundle.vocab, *d.segmenter);
    d.bundle.subwords = std::move(inv.vocab);
    d.bundle.segmentation = std::move(inv.segmentation);
  }
  d.bundle.config = std::move(cfg);
  return d;
}

}  // namespace swlm
