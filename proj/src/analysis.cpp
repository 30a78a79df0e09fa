#include "swlm/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <unordered_map>

#include "swlm/error.hpp"
#include "swlm/trainer.hpp"

namespace swlm {

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw UsageError("cosine_similarity: length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

std::vector<Neighbor> rank_neighbors(const Tensor<float>& matrix, std::span<const float> query,
                                     const Vocabulary& vocab, std::size_t k,
                                     std::optional<std::size_t> exclude) {
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(matrix.rows());
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    if (exclude && *exclude == r) continue;
    scored.emplace_back(cosine_similarity(matrix.row(r), query), r);
  }
  const std::size_t n = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(),
                    [](const auto& a, const auto& b) {
                      return a.first != b.first ? a.first > b.first : a.second < b.second;
                    });
  std::vector<Neighbor> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({vocab.word(scored[i].second), scored[i].first});
  return out;
}

NeighborReport nearest_neighbors(LanguageModel<float>& model, const Vocabulary& vocab,
                                 const SubwordVocabulary* subwords, const Segmenter* segmenter,
                                 const std::string& word, Side side, std::size_t k) {
  NeighborReport rep;
  rep.query = word;
  rep.side = side;
  const auto& matrix = model.word_matrix(side);
  const auto idx = vocab.find(word);
  if (idx) {
    const std::vector<float> q(matrix.row(*idx).begin(), matrix.row(*idx).end());
    rep.neighbors = rank_neighbors(matrix, q, vocab, k, idx);
    return rep;
  }
  if (side == Side::Output) {
    throw UsageError("'" + word + "' is not in the vocabulary; output embeddings exist only for "
                     "vocabulary words");
  }
  if (model.config().kind() == EmbedderKind::Word || !subwords || !segmenter) {
    rep.available = false;
    rep.reason = "word-level model has no embedding for out-of-vocabulary words";
    return rep;
  }
  const auto units = map_units(*subwords, *segmenter, word);
  if (!units) {
    rep.available = false;
    rep.reason = "failed to segment into known units";
    return rep;
  }
  const std::vector<std::vector<std::size_t>> one{*units};
  const auto vec = model.embed_units(Side::Input, one);
  rep.neighbors = rank_neighbors(matrix, vec.row(0), vocab, k, std::nullopt);
  return rep;
}

std::vector<std::pair<std::size_t, double>> pca_curve(const Tensor<double>& matrix) {
  if (matrix.rows() < 2) throw UsageError("pca_curve needs at least two rows");
  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const Mat> x(matrix.data(), static_cast<Eigen::Index>(matrix.rows()),
                          static_cast<Eigen::Index>(matrix.cols()));
  const Mat centered = x.rowwise() - x.colwise().mean();
  const std::size_t rank_bound = std::min(matrix.rows() - 1, matrix.cols());
  std::vector<std::pair<std::size_t, double>> curve;
  Eigen::VectorXd eig;
  if (matrix.cols() <= matrix.rows()) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(centered.transpose() * centered);
    eig = solver.eigenvalues().reverse();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(centered * centered.transpose());
    eig = solver.eigenvalues().reverse();
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < eig.size(); ++i) total += std::max(0.0, eig[i]);
  double acc = 0.0;
  for (std::size_t k = 1; k <= std::max<std::size_t>(rank_bound, 1); ++k) {
    if (total <= 0.0) {
      curve.emplace_back(k, 1.0);
      continue;
    }
    acc += std::max(0.0, eig[static_cast<Eigen::Index>(k - 1)]);
    curve.emplace_back(k, std::min(1.0, acc / total));
  }
  // Remaining eigenvalues are numerically zero; the last point is 1.
  if (!curve.empty()) curve.back().second = 1.0;
  return curve;
}

std::vector<std::pair<std::size_t, double>> pca_curve(const Tensor<float>& matrix) {
  return pca_curve(matrix.cast<double>());
}

KdeResult gaussian_kde(std::span<const double> sample, std::size_t grid_points) {
  if (sample.empty()) throw UsageError("gaussian_kde: empty sample");
  if (grid_points < 3) throw UsageError("gaussian_kde: grid too small");
  const double n = static_cast<double>(sample.size());
  double mean = 0.0;
  for (double v : sample) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : sample) var += (v - mean) * (v - mean);
  const double sd = sample.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double q) {
    const double pos = q * (n - 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  };
  const double iqr = quantile(0.75) - quantile(0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (spread <= 0.0) spread = sd;
  KdeResult r;
  r.bandwidth = spread > 0.0 ? 0.9 * spread * std::pow(n, -0.2) : 1e-3;
  const double h = r.bandwidth;
  const double lo = sorted.front() - 5.0 * h;
  const double hi = sorted.back() + 5.0 * h;
  const double step = (hi - lo) / static_cast<double>(grid_points - 1);
  const double norm = 1.0 / (n * h * std::sqrt(2.0 * std::numbers::pi));
  r.grid.resize(grid_points);
  r.density.assign(grid_points, 0.0);
  for (std::size_t i = 0; i < grid_points; ++i) r.grid[i] = lo + step * static_cast<double>(i);
  // Sorted sample: only points within 8 bandwidths contribute noticeably.
  for (std::size_t i = 0; i < grid_points; ++i) {
    const double x = r.grid[i];
    auto first = std::lower_bound(sorted.begin(), sorted.end(), x - 8.0 * h);
    auto last = std::upper_bound(sorted.begin(), sorted.end(), x + 8.0 * h);
    double s = 0.0;
    for (auto it = first; it != last; ++it) {
      const double z = (x - *it) / h;
      s += std::exp(-0.5 * z * z);
    }
    r.density[i] = s * norm;
  }
  for (std::size_t i = 1; i < grid_points; ++i) {
    r.integral += 0.5 * (r.density[i] + r.density[i - 1]) * step;
  }
  return r;
}

std::vector<double> collect_gates(LanguageModel<float>& model, Side side,
                                  std::span<const std::size_t> words) {
  const auto gates = model.gate_values(side, words);
  return {gates.values().begin(), gates.values().end()};
}

TtrFit ttr_fit(std::span<const TtrPoint> points) {
  if (points.empty()) throw UsageError("ttr_fit needs at least one point");
  double sxx = 0.0, sxy = 0.0;
  for (const auto& p : points) {
    sxx += p.ttr * p.ttr;
    sxy += p.ttr * p.delta_ppl;
  }
  if (sxx == 0.0) throw UsageError("ttr_fit: all TTR values are zero");
  TtrFit fit;
  fit.points = points.size();
  fit.slope = sxy / sxx;
  if (points.size() >= 2) {
    const double n = static_cast<double>(points.size());
    double mx = 0.0, my = 0.0;
    for (const auto& p : points) {
      mx += p.ttr;
      my += p.delta_ppl;
    }
    mx /= n;
    my /= n;
    double cxx = 0.0, cyy = 0.0, cxy = 0.0;
    for (const auto& p : points) {
      cxx += (p.ttr - mx) * (p.ttr - mx);
      cyy += (p.delta_ppl - my) * (p.delta_ppl - my);
      cxy += (p.ttr - mx) * (p.delta_ppl - my);
    }
    if (cxx > 0.0 && cyy > 0.0) fit.pearson_r = cxy / std::sqrt(cxx * cyy);
  }
  return fit;
}

std::vector<TtrPoint> load_ttr_csv(const std::filesystem::path& path,
                                   const std::vector<std::string>& settings) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open TTR table '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("TTR table '" + path.string() + "' is empty");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) header.push_back(f);
  }
  auto col = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("TTR table lacks column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_label = col("label"), c_setting = col("setting"), c_ttr = col("ttr"),
                    c_delta = col("delta_ppl");
  std::vector<TtrPoint> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    const std::size_t need = std::max({c_label, c_setting, c_ttr, c_delta}) + 1;
    if (f.size() < need) {
      throw DataError("TTR table line " + std::to_string(line_no) + ": too few columns");
    }
    TtrPoint p;
    p.label = f[c_label];
    p.setting = f[c_setting];
    try {
      p.ttr = std::stod(f[c_ttr]);
      p.delta_ppl = std::stod(f[c_delta]);
    } catch (const std::exception&) {
      throw DataError("TTR table line " + std::to_string(line_no) + ": bad number");
    }
    if (!settings.empty() &&
        std::find(settings.begin(), settings.end(), p.setting) == settings.end()) {
      continue;
    }
    out.push_back(std::move(p));
  }
  return out;
}

OovTransferResult oov_transfer(LanguageModel<float>& model, const Vocabulary& vocab,
                               const SubwordVocabulary* subwords, const Segmenter* segmenter,
                               std::span<const std::string> corpus_b, std::size_t batch_size,
                               std::size_t steps) {
  OovTransferResult res;
  const auto& mc = model.config();
  const bool composable = mc.kind() != EmbedderKind::Word && mc.subword_softmax && subwords &&
                          segmenter;
  std::vector<std::string> words = vocab.words();
  std::vector<std::size_t> freqs = vocab.frequencies();
  Segmentation seg = model.segmentation();
  std::unordered_map<std::string, std::size_t> added;
  std::set<std::string> new_oov_types;
  EncodedStream stream;
  stream.tokens.reserve(corpus_b.size());
  for (const auto& w : corpus_b) {
    if (auto id = vocab.find(w)) {
      stream.tokens.push_back(*id);
      continue;
    }
    if (auto it = added.find(w); it != added.end()) {
      stream.tokens.push_back(it->second);
      continue;
    }
    std::optional<std::vector<std::size_t>> units;
    if (subwords && segmenter && mc.kind() != EmbedderKind::Word) {
      units = map_units(*subwords, *segmenter, w);
    }
    if (mc.kind() != EmbedderKind::Word && subwords && segmenter && !units) {
      ++res.new_oov_tokens;
      new_oov_types.insert(w);
      stream.tokens.push_back(vocab.unk());
      continue;
    }
    if (!composable) {
      stream.tokens.push_back(vocab.unk());
      continue;
    }
    const std::size_t id = words.size();
    words.push_back(w);
    freqs.push_back(0);
    seg.units.push_back(*units);
    added.emplace(w, id);
    stream.tokens.push_back(id);
  }
  res.new_oov_types = new_oov_types.size();
  res.composed_types = added.size();
  res.tokens = stream.tokens.size();

  if (added.empty()) {
    res.ppl = evaluate_ppl(model, stream, batch_size, steps);
    return res;
  }
  ModelShape shape = model.shape();
  shape.vocab_size = words.size();
  LanguageModel<float> extended(mc, shape, std::move(seg));
  auto& dst = extended.params();
  const auto& src = model.params();
  for (const auto& slot : dst.slots()) {
    const auto& s = src.at(slot.name);
    auto& d = dst.at(slot.name);
    if (slot.name == "softmax.b") {
      double mean = 0.0;
      for (float b : s.value.values()) mean += b;
      mean /= static_cast<double>(s.value.size());
      std::copy(s.value.values().begin(), s.value.values().end(), d.value.values().begin());
      for (std::size_t i = s.value.size(); i < d.value.size(); ++i) {
        d.value[i] = static_cast<float>(mean);
      }
      continue;
    }
    if (!s.value.same_shape(d.value)) throw UsageError("oov_transfer: slot shape changed");
    d.value = s.value;
  }
  dst.bump_version();
  res.ppl = evaluate_ppl(extended, stream, batch_size, steps);
  return res;
}

std::string format_millions(std::size_t count) {
  std::ostringstream o;
  o.setf(std::ios::fixed);
  o.precision(1);
  o << static_cast<double>(count) / 1e6;
  return o.str();
}

std::string param_report_csv(std::span<const ParamRow> rows) {
  std::ostringstream o;
  o << "label,unique_params,millions,total_params,tied_layers\n";
  for (const auto& r : rows) {
    std::string tied;
    for (const auto& n : r.report.tied_layer_names) tied += (tied.empty() ? "" : ";") + n;
    o << r.label << ',' << r.report.unique_params << ',' << format_millions(r.report.unique_params)
      << ',' << r.report.total_params << ',' << (tied.empty() ? "none" : tied) << '\n';
  }
  return o.str();
}

}  // namespace swlm
