#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace swlm {

struct MorphTrainingOptions {
  std::size_t max_passes = 10;
  // Training stops once a pass improves the total cost by less than this.
  double min_improvement = 1e-6;
  std::uint64_t seed = 1;
};

struct MorphSplit {
  std::vector<std::string> morphs;
  // Set when a piece had to fall back to a character outside the lexicon.
  bool contains_novel_unit = false;
};

// Simplified Morfessor-Baseline style segmenter.
//
// Cost (nats) = corpus cost + lexicon cost, where
//   corpus cost  = -sum_m n_m ln(n_m / N) over frequency-weighted morph tokens
//   lexicon cost = sum over distinct morphs of (|m| + 1) ln(A + 1)
// with A the size of the training alphabet (one code per character plus an
// end-of-morph marker).
class MorphModel {
 public:
  MorphModel() = default;

  // Greedy recursive binary splitting; each pass revisits every word type in
  // a seeded shuffled order and never accepts a change that raises the cost.
  static MorphModel train(const std::map<std::string, std::size_t>& word_counts,
                          const MorphTrainingOptions& options = {});

  // Viterbi split under the unigram morph distribution. Unknown characters
  // fall back to single-character pieces.
  MorphSplit segment(std::string_view word) const;

  const std::unordered_map<std::string, std::size_t>& lexicon() const { return counts_; }
  std::size_t morph_count() const { return counts_.size(); }
  std::size_t alphabet_size() const { return alphabet_size_; }

  double corpus_cost() const;
  double lexicon_cost() const;
  double total_cost() const { return corpus_cost() + lexicon_cost(); }

  // Total cost after each training pass (index 0 = initial whole-word state).
  const std::vector<double>& cost_history() const { return history_; }

  // Segmentation chosen during training for a training word type, if any.
  const std::vector<std::string>* training_analysis(const std::string& word) const;

  void save(const std::filesystem::path& path) const;
  static MorphModel load(const std::filesystem::path& path);

 private:
  void add(const std::string& morph, double count);
  double lexicon_chars_cost(std::size_t chars) const;

  std::unordered_map<std::string, std::size_t> counts_;
  std::unordered_map<std::string, std::vector<std::string>> analyses_;
  // Running sums for O(1) cost updates.
  double tokens_ = 0.0;         // N
  double n_log_n_ = 0.0;        // sum_m n_m ln n_m
  std::size_t lexicon_chars_ = 0;  // sum over distinct morphs of |m| + 1
  std::size_t alphabet_size_ = 0;
  std::size_t max_morph_len_ = 0;
  std::vector<double> history_;

  friend class MorphTrainer;
};

// Parsed `word<TAB>unit1 unit2 ...` lines. Throws DataError when a line's
// units do not concatenate to its word.
std::map<std::string, std::vector<std::string>> load_segmentation_file(
    const std::filesystem::path& path);
void write_segmentation_file(const std::filesystem::path& path,
                             const std::map<std::string, std::vector<std::string>>& entries);

}  // namespace swlm
