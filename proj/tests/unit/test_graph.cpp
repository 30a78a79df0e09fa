#include <doctest.h>

#include <cmath>
#include <numeric>

#include "swlm/error.hpp"
#include "swlm/graph.hpp"
#include "swlm/optim.hpp"
#include "test_support.hpp"

using namespace swlm;
using namespace swlm::testing;
using Var = Graph<double>::Var;

namespace {

// Registry with named random parameters plus a fixed random projection so
// that every output element receives a distinct upstream gradient.
struct OpFixture {
  ParamRegistry<double> reg;
  Rng rng{11};

  ParamStorage<double>& param(const std::string& name, std::size_t r, std::size_t c,
                              double range = 1.0) {
    auto& s = reg.add(name, r, c);
    fill_uniform(s, rng, range);
    return s;
  }

  // sum(out * W) with W fixed per shape.
  Var project(Graph<double>& g, Var out) {
    const auto& v = g.value(out);
    Rng local(v.rows() * 131 + v.cols());
    return g.sum(g.mul(out, g.constant(random_tensor(v.rows(), v.cols(), local))));
  }

  void check(const std::function<Var(Graph<double>&)>& build) {
    const auto report = gradcheck(reg, [&](Graph<double>& g) { return project(g, build(g)); });
    INFO(report.worst);
    CHECK(report.checked > 0);
    CHECK(report.max_rel_error < 1e-4);
  }
};

}  // namespace

TEST_CASE("matmul forward matches hand computation") {
  Graph<double> g;
  const Var a = g.constant(Tensor<double>(2, 3, {1, 2, 3, 4, 5, 6}));
  const Var b = g.constant(Tensor<double>(3, 2, {7, 8, 9, 10, 11, 12}));
  const auto& c = g.value(g.matmul(a, b));
  CHECK(c(0, 0) == 58);
  CHECK(c(0, 1) == 64);
  CHECK(c(1, 0) == 139);
  CHECK(c(1, 1) == 154);
  const auto& d = g.value(g.matmul_nt(a, a));
  CHECK(d(0, 1) == 32);
  CHECK(d(1, 1) == 77);
}

TEST_CASE("shape mismatches throw") {
  Graph<double> g;
  const Var a = g.constant(Tensor<double>(2, 3));
  const Var b = g.constant(Tensor<double>(2, 3));
  CHECK_THROWS_AS(g.matmul(a, b), Error);
  CHECK_THROWS_AS(g.add(a, g.constant(Tensor<double>(3, 2))), Error);
  CHECK_THROWS_AS(g.gather_rows(a, {5}), Error);
  CHECK_THROWS_AS(g.slice_cols(a, 2, 4), Error);
}

TEST_CASE("non-finite values raise NumericError") {
  Graph<double> g;
  CHECK_THROWS_AS(g.constant(Tensor<double>(1, 2, {1.0, std::nan("")})), NumericError);
  const Var big = g.constant(Tensor<double>(1, 1, {1e300}));
  CHECK_THROWS_AS(g.scale(big, 1e300), NumericError);
}

TEST_CASE("sigmoid is stable at extremes") {
  Graph<double> g;
  const auto& s = g.value(g.sigmoid(g.constant(Tensor<double>(1, 3, {-800.0, 0.0, 800.0}))));
  CHECK(s[0] == doctest::Approx(0.0));
  CHECK(s[1] == doctest::Approx(0.5));
  CHECK(s[2] == doctest::Approx(1.0));
}

TEST_CASE("softmax cross entropy of uniform logits is ln V") {
  Graph<double> g;
  const std::vector<std::size_t> targets = {0, 3};
  const Var l = g.constant(Tensor<double>(2, 7, 0.25));
  CHECK(g.scalar(g.softmax_cross_entropy(l, targets)) == doctest::Approx(std::log(7.0)));
  CHECK(g.scalar(g.softmax_cross_entropy(l, targets, Reduction::Sum)) ==
        doctest::Approx(2 * std::log(7.0)));
}

TEST_CASE("softmax cross entropy survives huge logits") {
  Graph<double> g;
  const std::vector<std::size_t> targets = {1};
  const Var l = g.constant(Tensor<double>(1, 3, {1000.0, 1001.0, 999.0}));
  const double expected = std::log(std::exp(-1.0) + 1.0 + std::exp(-2.0));
  CHECK(g.scalar(g.softmax_cross_entropy(l, targets)) == doctest::Approx(expected));
}

TEST_CASE("gather and reduction forwards") {
  Graph<double> g;
  const Var t = g.constant(Tensor<double>(3, 2, {1, 2, 3, 4, 5, 6}));
  const auto& s = g.value(g.gather_sum(t, {{0, 2}, {1}, {2, 2}}));
  CHECK(s(0, 0) == 6);
  CHECK(s(0, 1) == 8);
  CHECK(s(2, 1) == 12);
  const auto& c = g.value(g.gather_concat(t, {1, -1, 2, 0}, 2));
  CHECK(c.rows() == 2);
  CHECK(c.cols() == 4);
  CHECK(c(0, 0) == 3);
  CHECK(c(0, 2) == 0);
  CHECK(c(1, 3) == 2);
  const auto& m = g.value(g.max_over_time(t, 3, {1, 1, 0}));
  CHECK(m(0, 0) == 3);
  CHECK(m(0, 1) == 4);
  CHECK_THROWS_AS(g.max_over_time(t, 3, {0, 0, 0}), UsageError);
  const auto& gc = g.value(g.gather_cols(t, {1, 1, 0}));
  CHECK(gc(2, 0) == 6);
  CHECK(gc(2, 2) == 5);
}

TEST_CASE("dropout scales kept units by the inverse keep rate") {
  Graph<double> g;
  const Var a = g.constant(Tensor<double>(1, 4, {1, 1, 1, 1}));
  const auto& d = g.value(g.dropout(a, Tensor<double>(1, 4, {1, 0, 1, 0}), 0.5));
  CHECK(d[0] == doctest::Approx(2.0));
  CHECK(d[1] == 0.0);
}

TEST_CASE("gradcheck: elementwise ops") {
  OpFixture f;
  auto& a = f.param("a", 3, 4);
  auto& b = f.param("b", 3, 4);
  f.check([&](Graph<double>& g) { return g.add(g.param(a), g.param(b)); });
  f.check([&](Graph<double>& g) { return g.sub(g.param(a), g.param(b)); });
  f.check([&](Graph<double>& g) { return g.mul(g.param(a), g.param(b)); });
  f.check([&](Graph<double>& g) { return g.scale(g.param(a), -1.7); });
  f.check([&](Graph<double>& g) { return g.sigmoid(g.param(a)); });
  f.check([&](Graph<double>& g) { return g.tanh(g.param(a)); });
  f.check([&](Graph<double>& g) { return g.relu(g.param(a)); });
  f.check([&](Graph<double>& g) { return g.sum(g.mul(g.param(a), g.param(a))); });
}

TEST_CASE("gradcheck: products and broadcasts") {
  OpFixture f;
  auto& a = f.param("a", 3, 4);
  auto& b = f.param("b", 4, 2);
  auto& c = f.param("c", 5, 4);
  auto& row = f.param("row", 1, 4);
  f.check([&](Graph<double>& g) { return g.matmul(g.param(a), g.param(b)); });
  f.check([&](Graph<double>& g) { return g.matmul_nt(g.param(a), g.param(c)); });
  f.check([&](Graph<double>& g) { return g.add_row(g.param(a), g.param(row)); });
  // Same operand on both sides.
  f.check([&](Graph<double>& g) { return g.matmul_nt(g.param(a), g.param(a)); });
}

TEST_CASE("gradcheck: slicing and concatenation") {
  OpFixture f;
  auto& a = f.param("a", 3, 4);
  auto& b = f.param("b", 3, 2);
  auto& c = f.param("c", 2, 4);
  f.check([&](Graph<double>& g) {
    const std::vector<Var> parts = {g.param(a), g.param(b), g.param(a)};
    return g.concat_cols(parts);
  });
  f.check([&](Graph<double>& g) {
    const std::vector<Var> parts = {g.param(c), g.param(a)};
    return g.concat_rows(parts);
  });
  f.check([&](Graph<double>& g) { return g.slice_cols(g.param(a), 1, 3); });
  f.check([&](Graph<double>& g) { return g.slice_rows(g.param(a), 1, 3); });
}

TEST_CASE("gradcheck: gathers with repeated indices") {
  OpFixture f;
  auto& t = f.param("t", 5, 3);
  auto& row = f.param("row", 1, 6);
  f.check([&](Graph<double>& g) { return g.gather_rows(g.param(t), {4, 0, 4, 2}); });
  f.check([&](Graph<double>& g) { return g.gather_cols(g.param(row), {5, 1, 1, 0}); });
  f.check([&](Graph<double>& g) { return g.gather_sum(g.param(t), {{0, 1}, {4}, {2, 2, 3}}); });
  f.check([&](Graph<double>& g) { return g.gather_concat(g.param(t), {3, -1, 0, 3, 1, -1}, 3); });
}

TEST_CASE("gradcheck: max over time") {
  OpFixture f;
  auto& a = f.param("a", 8, 3);
  f.check([&](Graph<double>& g) {
    return g.max_over_time(g.param(a), 4, {1, 1, 1, 0, 1, 1, 0, 0});
  });
}

TEST_CASE("gradcheck: dropout") {
  OpFixture f;
  auto& a = f.param("a", 2, 5);
  const Tensor<double> mask(2, 5, {1, 0, 1, 1, 0, 0, 1, 1, 0, 1});
  f.check([&](Graph<double>& g) { return g.dropout(g.param(a), mask, 0.4); });
}

TEST_CASE("gradcheck: softmax cross entropy") {
  OpFixture f;
  auto& l = f.param("logits", 4, 6, 2.0);
  const std::vector<std::size_t> targets = {0, 5, 2, 2};
  for (auto red : {Reduction::Mean, Reduction::Sum}) {
    const auto report = gradcheck(f.reg, [&](Graph<double>& g) {
      return g.softmax_cross_entropy(g.param(l), targets, red);
    });
    INFO(report.worst);
    CHECK(report.max_rel_error < 1e-4);
  }
}

TEST_CASE("gradcheck: composite two-layer network") {
  OpFixture f;
  auto& x = f.param("x", 4, 3);
  auto& w1 = f.param("w1", 3, 5);
  auto& b1 = f.param("b1", 1, 5);
  auto& w2 = f.param("w2", 5, 4);
  const std::vector<std::size_t> targets = {1, 0, 3, 3};
  const auto report = gradcheck(f.reg, [&](Graph<double>& g) {
    const Var h = g.tanh(g.add_row(g.matmul(g.param(x), g.param(w1)), g.param(b1)));
    return g.softmax_cross_entropy(g.matmul(h, g.param(w2)), targets, Reduction::Sum);
  });
  INFO(report.worst);
  CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("parameter gradients accumulate across uses") {
  ParamRegistry<double> reg;
  auto& p = reg.add("p", 1, 2);
  p.value.fill(1.0);
  Graph<double> g;
  const Var a = g.param(p);
  const Var b = g.param(p);
  g.backward(g.sum(g.add(a, b)));
  CHECK(p.grad[0] == doctest::Approx(2.0));
  CHECK(p.grad[1] == doctest::Approx(2.0));
}

TEST_CASE("clip_global_norm divides by batch then caps the norm") {
  ParamRegistry<double> reg;
  auto& p = reg.add("p", 1, 2);
  auto& q = reg.add("q", 1, 1);
  reg.add("q2", 1, 1);
  reg.tie("q2", "q");
  p.grad = Tensor<double>(1, 2, {30.0, 40.0});
  q.grad = Tensor<double>(1, 1, {0.0});
  const double scale = clip_global_norm(reg, 5.0, 2);
  // After division the norm is 25, so the factor is 1/5.
  CHECK(scale == doctest::Approx(0.2));
  CHECK(gradient_norm(reg) == doctest::Approx(5.0));
  CHECK(p.grad[0] == doctest::Approx(3.0));

  p.grad = Tensor<double>(1, 2, {0.3, 0.4});
  CHECK(clip_global_norm(reg, 5.0, 1) == doctest::Approx(1.0));
  CHECK(p.grad[1] == doctest::Approx(0.4));
}

TEST_CASE("sgd_step updates shared storage once") {
  ParamRegistry<double> reg;
  auto& p = reg.add("p", 1, 1);
  reg.add("q", 1, 1);
  reg.tie("q", "p");
  p.value[0] = 1.0;
  p.grad[0] = 2.0;
  const auto before = reg.version();
  sgd_step(reg, 0.5);
  CHECK(p.value[0] == doctest::Approx(0.0));
  CHECK(p.grad[0] == 0.0);
  CHECK(reg.version() != before);
  CHECK(reg.unique_params() == 1);
  CHECK(reg.total_params() == 2);
}
