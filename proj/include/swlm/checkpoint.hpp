#pragma once

#include <filesystem>
#include <optional>

#include "swlm/config.hpp"
#include "swlm/corpus.hpp"
#include "swlm/rnnlm.hpp"
#include "swlm/segmentation.hpp"

namespace swlm {

// Everything besides parameter values needed to rebuild a model.
struct ModelBundle {
  Config config;
  Vocabulary vocab;
  std::optional<SubwordVocabulary> subwords;
  Segmentation segmentation;
};

ModelShape model_shape(const Vocabulary& vocab, const SubwordVocabulary* subwords);

LanguageModel<float> build_model(const ModelBundle& bundle);

// Container: a "swlm-checkpoint" magic line, the JSON header length on its
// own line, the JSON header (format version, config echo, vocabularies,
// segmentation, slot names with shapes and storage ids), then one raw
// little-endian float32 array per unique storage in id order.
void save_checkpoint(const std::filesystem::path& path, const ModelBundle& bundle,
                     const LanguageModel<float>& model);

struct LoadedCheckpoint {
  ModelBundle bundle;
  LanguageModel<float> model;
};

// Rebuilds the model from the config echo, then checks every slot's shape
// and the storage sharing pattern against the header before reading values.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace swlm
