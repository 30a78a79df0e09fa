#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "swlm/checkpoint.hpp"
#include "swlm/error.hpp"
#include "swlm/optim.hpp"
#include "swlm/rnnlm.hpp"
#include "swlm/trainer.hpp"
#include "test_support.hpp"

using namespace swlm;
using namespace swlm::testing;

namespace {

BatchView toy_batch(std::size_t lanes, std::size_t steps, std::size_t vocab, std::uint64_t seed) {
  const auto s = toy_stream(lanes * steps + 1, vocab, seed);
  return batchify(s, lanes, steps).at(0);
}

GradcheckReport model_gradcheck(LanguageModel<double>& model, bool dropout, double sample_fraction) {
  const auto batch = toy_batch(2, 3, model.shape().vocab_size, 5);
  Rng mask_rng(8);
  const auto masks = sample_dropout_masks(model, 2, 0.3, mask_rng);
  auto state = model.initial_state(2);
  Rng srng(1);
  for (auto& h : state.h) h = random_tensor(2, model.config().hidden_dim, srng);
  for (auto& c : state.c) c = random_tensor(2, model.config().hidden_dim, srng);
  return gradcheck(model.params(), [&](Graph<double>& g) {
    Rng rng(21);
    ForwardOptions<double> opts;
    opts.masks = dropout ? &masks : nullptr;
    opts.sample_fraction = sample_fraction;
    opts.rng = &rng;
    return model.forward(g, batch, state, opts).loss;
  });
}

std::vector<double> softmax(std::span<const double> row) {
  const double mx = *std::max_element(row.begin(), row.end());
  std::vector<double> p(row.size());
  double z = 0;
  for (std::size_t i = 0; i < row.size(); ++i) z += p[i] = std::exp(row[i] - mx);
  for (auto& v : p) v /= z;
  return p;
}

}  // namespace

TEST_CASE("gradcheck: full model for every embedder and reuse mode") {
  for (auto kind : {EmbedderKind::CharCNN, EmbedderKind::SylConcat, EmbedderKind::MorphSum}) {
    for (auto mode : {ReuseMode::None, ReuseMode::RE, ReuseMode::RW, ReuseMode::RERW}) {
      auto model = toy_model(kind, mode);
      const auto report = model_gradcheck(model, true, 0.0);
      INFO(embedder_kind_name(kind), " ", reuse_mode_name(mode), " ", report.worst);
      CHECK(report.max_rel_error < 1e-4);
    }
  }
}

TEST_CASE("gradcheck: word model with and without reuse") {
  for (auto mode : {ReuseMode::None, ReuseMode::RE}) {
    auto model = toy_model(EmbedderKind::Word, mode);
    const auto report = model_gradcheck(model, true, 0.0);
    INFO(report.worst);
    CHECK(report.max_rel_error < 1e-4);
  }
}

TEST_CASE("gradcheck: softmax projection and sampled softmax") {
  auto model = toy_model(EmbedderKind::MorphSum, ReuseMode::RERW, 4, 4, 6);
  CHECK(model.params().contains("softmax.proj"));
  auto report = model_gradcheck(model, false, 0.0);
  INFO(report.worst);
  CHECK(report.max_rel_error < 1e-4);

  auto s = toy_setup(EmbedderKind::MorphSum, ReuseMode::RE);
  // A larger vocabulary so that sampling actually drops words.
  s.shape.vocab_size = 40;
  s.segmentation.units.clear();
  for (std::size_t w = 0; w < 40; ++w) s.segmentation.units.push_back({w % 9, (w / 9) % 9});
  LanguageModel<double> big(s.config, s.shape, s.segmentation);
  init_parameters(big.params(), 0.5, 2);
  report = model_gradcheck(big, true, 0.2);
  INFO(report.worst);
  CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("sampled softmax degenerates to the exact loss when every word is drawn") {
  auto model = toy_model(EmbedderKind::MorphSum, ReuseMode::None);
  const auto batch = toy_batch(2, 3, 6, 9);
  const auto state = model.initial_state(2);
  double exact = 0;
  {
    Graph<double> g;
    exact = g.scalar(model.forward(g, batch, state).loss);
  }
  for (double f : {0.999, 0.5}) {
    // V = 6: round(0.5 * 6) = 3 negatives; the batch covers at least 3 words.
    Rng rng(4);
    std::vector<std::size_t> targets(batch.targets);
    const auto cand = model.sample_candidates(targets, f, rng);
    if (cand.words.size() != 6) continue;
    Rng rng2(4);
    ForwardOptions<double> opts;
    opts.sample_fraction = f;
    opts.rng = &rng2;
    Graph<double> g;
    CHECK(g.scalar(model.forward(g, batch, state, opts).loss) == doctest::Approx(exact));
  }
  Rng rng(3);
  const std::vector<std::size_t> few = {0};
  const auto all = model.sample_candidates(few, 0.999, rng);
  CHECK(all.words.size() == 6);
  CHECK(all.negative_count == 5);
}

TEST_CASE("sampled candidates: targets first, distinct log-uniform negatives") {
  auto s = toy_setup(EmbedderKind::Word, ReuseMode::None);
  s.shape.vocab_size = 1000;
  LanguageModel<double> model(s.config, s.shape, {}, false);
  Rng rng(12);
  const std::vector<std::size_t> targets = {7, 3, 7, 900};
  const auto c = model.sample_candidates(targets, 0.05, rng);
  CHECK(c.target_count == 3);
  CHECK(c.negative_count == 50);
  CHECK(c.words.size() == 53);
  CHECK(std::set<std::size_t>(c.words.begin(), c.words.end()).size() == 53);
  CHECK(c.words[0] == 7);
  CHECK(c.log_expected[1] == 0.0);
  for (std::size_t i = 3; i < c.words.size(); ++i) {
    CHECK(c.log_expected[i] <= 0.0);
  }
  // Ranks below 100 hold about 26 of 50 distinct log-uniform draws
  // (simulated 0.5% quantile: 18) against 5 under a uniform proposal.
  const auto low = std::count_if(c.words.begin() + 3, c.words.end(), [](auto w) { return w < 100; });
  CHECK(low > 15);
  CHECK_THROWS_AS(model.sample_candidates(targets, 1.0, rng), UsageError);
}

TEST_CASE("full reuse: logits are dot products with input embeddings plus bias") {
  auto model = toy_model(EmbedderKind::MorphSum, ReuseMode::RERW);
  CHECK(model.fully_tied());
  Rng rng(6);
  const auto h = random_tensor(3, 4, rng);
  const auto logits = model.logits(h);
  const auto& in = model.word_matrix(Side::Input);
  const auto& b = model.params().at("softmax.b").value;
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t w = 0; w < 6; ++w) {
      double dot = b[w];
      for (std::size_t j = 0; j < 4; ++j) dot += h(r, j) * in(w, j);
      CHECK(logits(r, w) == doctest::Approx(dot).epsilon(1e-12));
    }
    const auto p = softmax(logits.row(r));
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("word matrix cache follows parameter updates") {
  auto model = toy_model(EmbedderKind::MorphSum, ReuseMode::None);
  const Tensor<double> before = model.word_matrix(Side::Output);
  auto& b = model.params().at("out.emb.table");
  b.grad.fill(1.0);
  sgd_step(model.params(), 0.1);
  const auto& after = model.word_matrix(Side::Output);
  CHECK(after(0, 0) != before(0, 0));
}

TEST_CASE("frozen forward equals the live forward") {
  auto model = toy_model(EmbedderKind::SylConcat, ReuseMode::RW);
  const auto batch = toy_batch(2, 4, 6, 3);
  const auto state = model.initial_state(2);
  Graph<double> g1, g2;
  ForwardOptions<double> frozen;
  frozen.frozen = true;
  const double live = g1.scalar(model.forward(g1, batch, state).loss);
  CHECK(g2.scalar(model.forward(g2, batch, state, frozen).loss) == doctest::Approx(live));
}

TEST_CASE("evaluation does not depend on the window length") {
  auto model = toy_model(EmbedderKind::MorphSum, ReuseMode::RE);
  const auto stream = toy_stream(97, 6, 4);
  const auto a = evaluate(model, stream, 3, 5);
  const auto b = evaluate(model, stream, 3, 11);
  CHECK(a.tokens == b.tokens);
  CHECK(a.tokens == 96);
  CHECK(a.total_nll == doctest::Approx(b.total_nll).epsilon(1e-12));
}

TEST_CASE("untrained model scores close to ln V") {
  auto s = toy_setup(EmbedderKind::MorphSum, ReuseMode::RERW, 16, 16);
  s.shape.vocab_size = 200;
  s.shape.subword_size = 40;
  s.segmentation.units.clear();
  for (std::size_t w = 0; w < 200; ++w) s.segmentation.units.push_back({w % 40, (w * 7) % 40});
  LanguageModel<double> model(s.config, s.shape, s.segmentation);
  init_parameters(model.params(), 0.05, 1);
  const auto r = evaluate(model, toy_stream(400, 200, 2), 4, 10);
  const double nll = r.total_nll / static_cast<double>(r.tokens);
  CHECK(std::abs(nll - std::log(200.0)) / std::log(200.0) < 0.05);
}

TEST_CASE("forward validates its inputs") {
  auto model = toy_model(EmbedderKind::MorphSum, ReuseMode::None);
  auto batch = toy_batch(2, 3, 6, 1);
  Graph<double> g;
  CHECK_THROWS_AS(model.forward(g, batch, model.initial_state(3)), UsageError);
  batch.inputs[0] = 99;
  CHECK_THROWS_AS(model.forward(g, batch, model.initial_state(2)), DataError);
  auto s = toy_setup(EmbedderKind::MorphSum, ReuseMode::None);
  s.segmentation.units.pop_back();
  CHECK_THROWS_AS(LanguageModel<double>(s.config, s.shape, s.segmentation), UsageError);
}

TEST_CASE("checkpoint round trip preserves parameters and tying") {
  TempDir dir("ckpt");
  ModelBundle bundle;
  bundle.config = Config::parse(
      "units = morph\nhidden_dim = 4\nhighway_dim = 4\nsubword_dim = 4\nreuse = rw\n");
  bundle.vocab = Vocabulary::from_words({"walk", "walks", "talk", "talks"}, {4, 3, 2, 1});
  const TableSegmenter seg(UnitKind::Morph, {{"walk", {"walk"}},
                                             {"walks", {"walk", "s"}},
                                             {"talk", {"talk"}},
                                             {"talks", {"talk", "s"}}});
  auto inv = build_subword_vocab(bundle.vocab, seg);
  bundle.subwords = inv.vocab;
  bundle.segmentation = inv.segmentation;
  auto model = build_model(bundle);
  init_parameters(model.params(), 0.3, 5);
  save_checkpoint(dir / "m.ckpt", bundle, model);

  auto loaded = load_checkpoint(dir / "m.ckpt");
  CHECK(loaded.bundle.vocab.words() == bundle.vocab.words());
  CHECK(loaded.model.tied_layers() == model.tied_layers());
  CHECK(loaded.model.params().shares_storage("in.hw1.W", "out.hw1.W"));
  for (const auto& slot : model.params().slots()) {
    const auto& a = slot.storage->value;
    const auto& b = loaded.model.params().at(slot.name).value;
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  }
  const EncodedStream stream{{0, 1, 2, 3, 4, 5, 0, 2, 1, 3, 5, 4, 0}};
  CHECK(evaluate(loaded.model, stream, 2, 3).total_nll ==
        doctest::Approx(evaluate(model, stream, 2, 3).total_nll));

  // Truncation and trailing bytes are both rejected.
  const auto bytes = std::filesystem::file_size(dir / "m.ckpt");
  std::filesystem::copy_file(dir / "m.ckpt", dir / "short.ckpt");
  std::filesystem::resize_file(dir / "short.ckpt", bytes - 3);
  CHECK_THROWS_AS(load_checkpoint(dir / "short.ckpt"), DataError);
  std::filesystem::copy_file(dir / "m.ckpt", dir / "long.ckpt");
  std::ofstream(dir / "long.ckpt", std::ios::app | std::ios::binary) << "xx";
  CHECK_THROWS_AS(load_checkpoint(dir / "long.ckpt"), DataError);
  std::ofstream(dir / "junk.ckpt") << "not a checkpoint";
  CHECK_THROWS_AS(load_checkpoint(dir / "junk.ckpt"), DataError);
}

TEST_CASE("full-sized parameter counts") {
  ModelConfig mc;
  mc.hidden_dim = 200;
  mc.embedder.kind = EmbedderKind::MorphSum;
  mc.embedder.subword_dim = mc.embedder.highway_dim = 200;
  const ModelShape shape{10000, 3400};
  // 3400*200 + 2 highway layers + 2 LSTM layers + 10000 bias.
  const std::size_t lstm = 2 * 4 * (200 * 200 + 200 * 200 + 200);
  const std::size_t hw = 2 * 2 * (200 * 200 + 200);
  const std::size_t input = 3400 * 200 + hw;
  mc.tying.mode = ReuseMode::RERW;
  CHECK(count_parameters(mc, shape).unique_params == input + lstm + 10000);
  mc.tying.mode = ReuseMode::None;
  CHECK(count_parameters(mc, shape).unique_params == 2 * input + lstm + 10000);
}
