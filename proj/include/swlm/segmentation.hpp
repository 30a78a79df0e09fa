#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "swlm/corpus.hpp"
#include "swlm/hyphenation.hpp"
#include "swlm/morph.hpp"

namespace swlm {

enum class UnitKind { Char, Syllable, Morph };

std::string_view unit_kind_name(UnitKind kind);
UnitKind parse_unit_kind(std::string_view name);

inline constexpr std::string_view kPadUnit = "<pad>";
inline constexpr std::string_view kBowUnit = "<bow>";
inline constexpr std::string_view kEowUnit = "<eow>";

// Dense subword inventory. Special units come first: `<pad>` (and for
// characters `<bow>`/`<eow>`), then dedicated `<unk>` and `<eos>` units,
// then real units by descending frequency with lexicographic tie-break.
class SubwordVocabulary {
 public:
  SubwordVocabulary() = default;
  SubwordVocabulary(UnitKind kind, std::vector<std::string> units);

  UnitKind kind() const { return kind_; }
  std::size_t size() const { return units_.size(); }
  const std::vector<std::string>& units() const { return units_; }
  const std::string& unit(std::size_t index) const { return units_.at(index); }
  std::optional<std::size_t> find(std::string_view unit) const;

  std::size_t pad_index() const { return pad_; }
  std::size_t bow_index() const;
  std::size_t eow_index() const;
  std::size_t unk_index() const { return unk_; }
  std::size_t eos_index() const { return eos_; }

 private:
  UnitKind kind_ = UnitKind::Char;
  std::vector<std::string> units_;
  std::unordered_map<std::string, std::size_t> ids_;
  std::size_t pad_ = 0, bow_ = 0, eow_ = 0, unk_ = 0, eos_ = 0;
};

// sigma(w) for every word index: n_w >= 1 subword indices per word.
struct Segmentation {
  std::vector<std::vector<std::size_t>> units;

  std::size_t word_count() const { return units.size(); }
  std::size_t max_units() const;
};

// Maps a word to its surface subword strings.
class Segmenter {
 public:
  virtual ~Segmenter() = default;
  virtual UnitKind kind() const = 0;
  virtual std::vector<std::string> split(std::string_view word) const = 0;
};

class CharSegmenter final : public Segmenter {
 public:
  UnitKind kind() const override { return UnitKind::Char; }
  std::vector<std::string> split(std::string_view word) const override;
};

class Syllabifier final : public Segmenter {
 public:
  explicit Syllabifier(HyphenationPatterns patterns) : patterns_(std::move(patterns)) {}
  UnitKind kind() const override { return UnitKind::Syllable; }
  std::vector<std::string> split(std::string_view word) const override;
  const HyphenationPatterns& patterns() const { return patterns_; }

 private:
  HyphenationPatterns patterns_;
};

class MorphSegmenter final : public Segmenter {
 public:
  explicit MorphSegmenter(MorphModel model) : model_(std::move(model)) {}
  UnitKind kind() const override { return UnitKind::Morph; }
  std::vector<std::string> split(std::string_view word) const override;
  const MorphModel& model() const { return model_; }

 private:
  MorphModel model_;
};

// Segmentation supplied externally (e.g. real Morfessor output). Words not
// in the table fall back to `fallback` when given, otherwise stay whole.
class TableSegmenter final : public Segmenter {
 public:
  TableSegmenter(UnitKind kind, std::map<std::string, std::vector<std::string>> table,
                 std::shared_ptr<const Segmenter> fallback = nullptr);
  UnitKind kind() const override { return kind_; }
  std::vector<std::string> split(std::string_view word) const override;

 private:
  UnitKind kind_;
  std::map<std::string, std::vector<std::string>> table_;
  std::shared_ptr<const Segmenter> fallback_;
};

struct SubwordInventory {
  SubwordVocabulary vocab;
  Segmentation segmentation;
};

// Materializes sigma(w) for every word, `<unk>` and `<eos>` included (each
// mapped to its dedicated unit). Unit frequencies are weighted by word
// frequency (minimum 1) for deterministic ordering.
SubwordInventory build_subword_vocab(const Vocabulary& vocab, const Segmenter& segmenter);

// Rebuilds the segmentation of `words` against an existing subword
// vocabulary. Words whose units are not all known get nullopt.
std::optional<std::vector<std::size_t>> map_units(const SubwordVocabulary& subwords,
                                                  const Segmenter& segmenter,
                                                  std::string_view word);

// CharCNN input: [BOW] + chars + [EOW], right-padded with PAD to max_len.
// Character lists longer than max_len - 2 are truncated from the right.
std::vector<std::size_t> char_sequence(std::span<const std::size_t> chars,
                                       const SubwordVocabulary& subwords, std::size_t max_len);
std::vector<std::size_t> char_sequence(std::string_view word, const SubwordVocabulary& subwords,
                                       std::size_t max_len);

// Word counts of a vocabulary as a morph-training table (specials excluded).
std::map<std::string, std::size_t> word_frequency_table(const Vocabulary& vocab);

}  // namespace swlm
