#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "swlm/checkpoint.hpp"
#include "swlm/config.hpp"
#include "swlm/corpus.hpp"
#include "swlm/segmentation.hpp"

namespace swlm {

// Every key accepted in config files and --set overrides.
const std::vector<std::string>& known_config_keys();

// Directory of bundled data (patterns, configs, fixtures, synthetic corpus).
std::filesystem::path data_dir();

// Segmenter for the config's unit kind. Keys: patterns (syllables),
// segmentation_file (external table, any kind), morph_model (load) or
// morph_passes/morph_seed (train on `word_counts`). A freshly trained morph
// model is saved to `work_dir`/morph.model and recorded in `cfg`.
std::shared_ptr<const Segmenter> make_segmenter(Config& cfg, UnitKind kind,
                                                const std::map<std::string, std::size_t>& word_counts,
                                                const std::filesystem::path& work_dir = {});

// Rebuilds the segmenter recorded in a checkpoint's config echo.
std::shared_ptr<const Segmenter> segmenter_for(const ModelBundle& bundle);

struct PreparedData {
  ModelBundle bundle;
  EncodedStream train;
  EncodedStream valid;
  EncodedStream test;
  std::shared_ptr<const Segmenter> segmenter;
};

// Loads the three splits, builds the word vocabulary (min_count) and, for
// subword units, the segmenter, subword vocabulary and segmentation.
PreparedData prepare_data(Config cfg, const std::filesystem::path& dir,
                          const std::filesystem::path& work_dir = {});

}  // namespace swlm
