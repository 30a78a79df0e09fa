#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "swlm/corpus.hpp"
#include "swlm/rnnlm.hpp"
#include "swlm/segmentation.hpp"
#include "swlm/tensor.hpp"
#include "swlm/tying.hpp"

namespace swlm {

double cosine_similarity(std::span<const float> a, std::span<const float> b);

struct Neighbor {
  std::string word;
  double similarity = 0.0;
};

struct NeighborReport {
  std::string query;
  Side side = Side::Input;
  bool available = true;
  std::string reason;  // why the query could not be embedded
  std::vector<Neighbor> neighbors;
};

// Top-k rows of `matrix` by cosine similarity to `query`, descending,
// skipping `exclude` (the query's own row, if any).
std::vector<Neighbor> rank_neighbors(const Tensor<float>& matrix, std::span<const float> query,
                                     const Vocabulary& vocab, std::size_t k,
                                     std::optional<std::size_t> exclude);

// Input side accepts out-of-vocabulary strings when the segmenter can map
// them onto known units; otherwise the report is marked unavailable.
// Output side requires an in-vocabulary word.
NeighborReport nearest_neighbors(LanguageModel<float>& model, const Vocabulary& vocab,
                                 const SubwordVocabulary* subwords, const Segmenter* segmenter,
                                 const std::string& word, Side side, std::size_t k);

// (k, retained variance fraction) for k = 1..min(rows-1, cols) after
// mean-centering; all-ones when the rows carry no variance.
std::vector<std::pair<std::size_t, double>> pca_curve(const Tensor<double>& matrix);
std::vector<std::pair<std::size_t, double>> pca_curve(const Tensor<float>& matrix);

struct KdeResult {
  double bandwidth = 0.0;
  std::vector<double> grid;
  std::vector<double> density;
  double integral = 0.0;
};

// Gaussian KDE with Silverman's bandwidth (1e-3 when the sample has no
// spread), evaluated on a grid padded by five bandwidths on each side.
KdeResult gaussian_kde(std::span<const double> sample, std::size_t grid_points = 2001);

// Transform-gate values of the first highway layer for sampled words.
std::vector<double> collect_gates(LanguageModel<float>& model, Side side,
                                  std::span<const std::size_t> words);

struct TtrPoint {
  std::string label;
  std::string setting;
  double ttr = 0.0;
  double delta_ppl = 0.0;
};

struct TtrFit {
  double slope = 0.0;
  std::optional<double> pearson_r;  // undefined for fewer than two points
  std::size_t points = 0;
};

TtrFit ttr_fit(std::span<const TtrPoint> points);
// CSV with header label,setting,ttr,delta_ppl[,source]; `settings` filters
// rows when non-empty.
std::vector<TtrPoint> load_ttr_csv(const std::filesystem::path& path,
                                   const std::vector<std::string>& settings = {});

struct OovTransferResult {
  std::size_t new_oov_tokens = 0;
  std::size_t new_oov_types = 0;
  // Words outside the training vocabulary that are composed from known
  // units and scored as extra softmax rows.
  std::size_t composed_types = 0;
  std::size_t tokens = 0;
  double ppl = 0.0;
};

// Rewrites corpus B against the model trained on A. Words with a unit
// unseen in A become `<unk>` (new OOVs). Other unknown words are added to
// the vocabulary when the model can embed them at both ends (subword input
// and subword softmax); their softmax bias is the mean of A's biases.
// Models without that ability map them to `<unk>` as well.
OovTransferResult oov_transfer(LanguageModel<float>& model, const Vocabulary& vocab,
                               const SubwordVocabulary* subwords, const Segmenter* segmenter,
                               std::span<const std::string> corpus_b, std::size_t batch_size,
                               std::size_t steps);

struct ParamRow {
  std::string label;
  TyingReport report;
};

// Millions with one decimal, e.g. 1492000 -> "1.5".
std::string format_millions(std::size_t count);

// CSV: label,unique_params,millions,total_params,tied_layers
std::string param_report_csv(std::span<const ParamRow> rows);

}  // namespace swlm
