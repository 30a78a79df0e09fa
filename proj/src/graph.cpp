#include "swlm/graph.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

namespace swlm {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
Eigen::Map<RowMat<T>> as_mat(Tensor<T>& t) {
  return {t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
}

template <typename T>
Eigen::Map<const RowMat<T>> as_mat(const Tensor<T>& t) {
  return {t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
}

std::string shape_str(std::size_t r, std::size_t c) {
  return "[" + std::to_string(r) + "x" + std::to_string(c) + "]";
}

template <typename T>
void require_same(const Tensor<T>& a, const Tensor<T>& b, std::string_view op) {
  if (!a.same_shape(b)) {
    throw UsageError(std::string(op) + ": shape mismatch " + shape_str(a.rows(), a.cols()) +
                     " vs " + shape_str(b.rows(), b.cols()));
  }
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace

template <typename T>
const Tensor<T>& Graph<T>::val(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.param ? n.param->value : n.value;
}

template <typename T>
const Tensor<T>& Graph<T>::value(Var v) const {
  return val(v.id_);
}

template <typename T>
T Graph<T>::scalar(Var v) const {
  const auto& t = value(v);
  if (t.size() != 1) throw UsageError("scalar(): node is not 1x1");
  return t[0];
}

template <typename T>
const Tensor<T>& Graph<T>::grad(Var v) const {
  const Node& n = nodes_[v.id_];
  return n.param ? n.param->grad : n.grad;
}

template <typename T>
Tensor<T>& Graph<T>::grad_ref(std::size_t id) {
  Node& n = nodes_[id];
  if (n.param) return n.param->grad;
  if (n.grad.empty()) {
    const auto& v = n.value;
    n.grad = Tensor<T>(v.rows(), v.cols());
  }
  return n.grad;
}

template <typename T>
typename Graph<T>::Var Graph<T>::push(Tensor<T> value, bool requires_grad, std::string_view op) {
  if (!value.all_finite()) {
    throw NumericError("non-finite value produced by " + std::string(op));
  }
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var(nodes_.size() - 1);
}

template <typename T>
typename Graph<T>::Var Graph<T>::constant(Tensor<T> value) {
  return push(std::move(value), false, "constant");
}

template <typename T>
typename Graph<T>::Var Graph<T>::param(ParamStorage<T>& storage) {
  if (storage.value.size() != storage.size()) {
    throw UsageError("parameter storage is not allocated");
  }
  Node n;
  n.param = &storage;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var(nodes_.size() - 1);
}

template <typename T>
typename Graph<T>::Var Graph<T>::matmul(Var a, Var b) {
  const auto& A = value(a);
  const auto& B = value(b);
  if (A.cols() != B.rows()) {
    throw UsageError("matmul: shape mismatch " + shape_str(A.rows(), A.cols()) + " . " +
                     shape_str(B.rows(), B.cols()));
  }
  Tensor<T> out(A.rows(), B.cols());
  as_mat(out).noalias() = as_mat(A) * as_mat(B);
  const Var o = push(std::move(out), needs(a) || needs(b), "matmul");
  nodes_[o.id_].backward = [this, a, b, o] {
    const auto& g = out_grad(o.id_);
    if (needs(a)) as_mat(grad_ref(a.id_)).noalias() += as_mat(g) * as_mat(val(b.id_)).transpose();
    if (needs(b)) as_mat(grad_ref(b.id_)).noalias() += as_mat(val(a.id_)).transpose() * as_mat(g);
  };
  return o;
}

template <typename T>
typename Graph<T>::Var Graph<T>::matmul_nt(Var a, Var b) {
  const auto& A = value(a);
  const auto& B = value(b);
  if (A.cols() != B.cols()) {
    throw UsageError("matmul_nt: shape mismatch " + shape_str(A.rows(), A.cols()) + " . " +
                     shape_str(B.rows(), B.cols()) + "^T");
  }
  Tensor<T> out(A.rows(), B.rows());
  as_mat(out).noalias() = as_mat(A) * as_mat(B).transpose();
  const Var o = push(std::move(out), needs(a) || needs(b), "matmul_nt");
  nodes_[o.id_].backward = [this, a, b, o] {
    const auto& g = out_grad(o.id_);
    if (needs(a)) as_mat(grad_ref(a.id_)).noalias() += as_mat(g) * as_mat(val(b.id_));
    if (needs(b)) as_mat(grad_ref(b.id_)).noalias() += as_mat(g).transpose() * as_mat(val(a.id_));
  };
  return o;
}

template <typename T>
typename Graph<T>::Var Graph<T>::add(Var a, Var b) {
  const auto& A = value(a);
  const auto& B = value(b);
  require_same(A, B, "add");
  Tensor<T> out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += B[i];
  const Var o = push(std::move(out), needs(a) || needs(b), "add");
  nodes_[o.id_].backward = [this, a, b, o] {
    const auto& g = out_grad(o.id_);
    for (Var x : {a, b}) {
      if (!needs(x)) continue;
      auto& gx = grad_ref(x.id_);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
  };
  return o;
}

template <typename T>
typename Graph<T>::Var Graph<T>::add_row(Var a, Var row) {
  const auto& A = value(a);
  const auto& R = value(row);
  if (R.rows() != 1 || R.cols() != A.cols()) {
    throw UsageError("add_row: expected [1x" + std::to_string(A.cols()) + "] row, got " +
                     shape_str(R.rows(), R.cols()));
  }
  Tensor<T> out = A;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto dst = out.row(r);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += R[c];
  }
  const Var o = push(std::move(out), needs(a) || needs(row), "add_row");
  nodes_[o.id_].backward = [this, a, row, o] {
    const auto& g = out_grad(o.id_);
    if (needs(a)) {
      auto& ga = grad_ref(a.id_);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (needs(row)) {
      auto& gr = grad_ref(row.id_);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        const auto src = g.row(r);
        for (std::size_t c = 0; c < src.size(); ++c) gr[c] += src[c];
      }
    }
  };
  return o;
}

template <typename T>
typename Graph<T>::Var Graph<T>::sub(Var a, Var b) {
  const auto& A = value(a);
  const auto& B = value(b);
  require_same(A, B, "sub");
  Tensor<T> out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= B[i];
  const Var o = push(std::move(out), needs(a) || needs(b), "sub");
  nodes_[o.id_].backward = [this, a, b, o] {
    const auto& g = out_grad(o.id_);
    if (needs(a)) {
      auto& ga = grad_ref(a.id_);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (needs(b)) {
      auto& gb = grad_ref(b.id_);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  };
  return o;
}

template <typename T>
typename Graph<T>::Var Graph<T>::mul(Var a, Var b) {
  const auto& A = value(a);
  const auto& B = value(b);
  require_same(A, B, "mul");
  Tensor<T> out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= B[i];
  const Var o = push(std::move(out), needs(a) || needs(b), "mul");
  nodes_[o.id_].backward = [this, a, b, o] {
    const auto& g = out_grad(o.id_);
    if (needs(a)) {
      auto& ga = grad_ref(a.id_);
      const auto& B = val(b.id_);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * B[i];
    }
    if (needs(b)) {
      auto& gb = grad_ref(b.id_);
      const auto& A = val(a.id_);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * A[i];
    }
  };
  return o;
}

template <typename T>
typename Graph<T>::Var Graph<T>::scale(Var a, T factor) {
  Tensor<T> out = value(a);
  for (auto& v : out.values()) v *= factor;
  const Var o = push(std::move(out), needs(a), "scale");
  nodes_[o.id_].backward = [this, a, o, factor] {
    const auto& g = out_grad(o.id_);
    auto& ga = grad_ref(a.id_);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
  };
  return o;
}

template <typename T>
template <typename Fwd, typename Bwd>
typename Graph<T>::Var Graph<T>::unary(Var a, std::string_view op, Fwd fwd, Bwd dfdx) {
  Tensor<T> out = value(a);
  for (auto& v : out.values()) v = fwd(v);
  const Var o = push(std::move(out), needs(a), op);
  nodes_[o.id_].backward = [this, a, o, dfdx] {
    const auto& g = out_grad(o.id_);
    const auto& x = val(a.id_);
    const auto& y = val(o.id_);
    auto& ga = grad_ref(a.id_);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dfdx(x[i], y[i]);
  };
  return o;
}

template <typename T>
typename Graph<T>::Var Graph<T>::relu(Var a) {
  return unary(
      a, "relu", [](T x) { return x > T(0) ? x : T(0); },
      [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
typename Graph<T>::Var Graph<T>::sigmoid(Var a) {
  return unary(
      a, "sigmoid", [](T x) { return stable_sigmoid(x); }, [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
typename Graph<T>::Var Graph<T>::tanh(Var a) {
  return unary(
      a, "tanh", [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
typename Graph<T>::Var Graph<T>::sum(Var a) {
  T total = T(0);
  for (T v : value(a).values()) total += v;
  const Var o = push(Tensor<T>::scalar(total), needs(a), "sum");
  nodes_[o.id_].backward = [this, a, o] {
    const T g = out_grad(o.id_)[0];
    for (auto& v : grad_ref(a.id_).values()) v += g;
  };
  return o;
}

template <typename T>
typename Graph<T>::Var Graph<T>::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw UsageError("concat_cols: no inputs");
  const std::size_t rows = value(parts[0]).rows();
  std::size_t cols = 0;
  bool req = false;
  for (Var p : parts) {
    if (value(p).rows() != rows) throw UsageError("concat_cols: row count mismatch");
    cols += value(p).cols();
    req = req || needs(p);
  }
  Tensor<T> out(rows, cols);
  std::size_t offset = 0;
  for (Var p : parts) {
    const auto& P = value(p);
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy(P.row(r).begin(), P.row(r).end(), out.row(r).begin() + offset);
    }
    offset += P.cols();
  }
  const Var o = push(std::move(out), req, "concat_cols");
  nodes_[o.id_].backward = [this, ps = std::vector<Var>(parts.begin(), parts.end()), o] {
    const auto& g = out_grad(o.id_);
    std::size_t off = 0;
    for (Var p : ps) {
      const std::size_t w = val(p.id_).cols();
      if (needs(p)) {
        auto& gp = grad_ref(p.id_);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = 0; c < w; ++c) gp(r, c) += g(r, off + c);
        }
      }
      off += w;
    }
  };
  return o;
}

template <typename T>
typename Graph<T>::Var Graph<T>::slice_cols(Var a, std::size_t begin, std::size_t end) {
  const auto& A = value(a);
  if (begin >= end || end > A.cols()) throw UsageError("slice_cols: range out of bounds");
  const std::size_t w = end - begin;
  Tensor<T> out(A.rows(), w);
  for (std::size_t r = 0; r < A.rows(); ++r) {
    std::copy_n(A.row(r).begin() + begin, w, out.row(r).begin());
  }
  const Var o = push(std::move(out), needs(a), "slice_cols");
  nodes_[o.id_].backward = [this, a, o, begin, w] {
    const auto& g = out_grad(o.id_);
    auto& ga = grad_ref(a.id_);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      for (std::size_t c = 0; c < w; ++c) ga(r, begin + c) += g(r, c);
    }
  };
  return o;
}

template <typename T>
typename Graph<T>::Var Graph<T>::concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw UsageError("concat_rows: no inputs");
  const std::size_t cols = value(parts[0]).cols();
  std::size_t rows = 0;
  bool req = false;
  for (Var p : parts) {
    if (value(p).cols() != cols) throw UsageError("concat_rows: column count mismatch");
    rows += value(p).rows();
    req = req || needs(p);
  }
  std::vector<T> data;
  data.reserve(rows * cols);
  for (Var p : parts) {
    const auto v = value(p).values();
    data.insert(data.end(), v.begin(), v.end());
  }
  const Var o = push(Tensor<T>(rows, cols, std::move(data)), req, "concat_rows");
  nodes_[o.id_].backward = [this, ps = std::vector<Var>(parts.begin(), parts.end()), o] {
    const auto& g = out_grad(o.id_);
    std::size_t off = 0;
    for (Var p : ps) {
      const std::size_t n = val(p.id_).size();
      if (needs(p)) {
        auto& gp = grad_ref(p.id_);
        for (std::size_t i = 0; i < n; ++i) gp[i] += g[off + i];
      }
      off += n;
    }
  };
  return o;
}

template <typename T>
typename Graph<T>::Var Graph<T>::slice_rows(Var a, std::size_t begin, std::size_t end) {
  const auto& A = value(a);
  if (begin >= end || end > A.rows()) throw UsageError("slice_rows: range out of bounds");
  const std::size_t cols = A.cols();
  std::vector<T> data(A.data() + begin * cols, A.data() + end * cols);
  const Var o = push(Tensor<T>(end - begin, cols, std::move(data)), needs(a), "slice_rows");
  nodes_[o.id_].backward = [this, a, o, begin, cols] {
    const auto& g = out_grad(o.id_);
    auto& ga = grad_ref(a.id_);
    for (std::size_t i = 0; i < g.size(); ++i) ga[begin * cols + i] += g[i];
  };
  return o;
}

template <typename T>
typename Graph<T>::Var Graph<T>::gather_rows(Var table, std::vector<std::size_t> rows) {
  const auto& E = value(table);
  const std::size_t d = E.cols();
  Tensor<T> out(rows.size(), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= E.rows()) throw UsageError("gather_rows: index out of range");
    std::copy(E.row(rows[i]).begin(), E.row(rows[i]).end(), out.row(i).begin());
  }
  const Var o = push(std::move(out), needs(table), "gather_rows");
  nodes_[o.id_].backward = [this, table, o, rows = std::move(rows)] {
    const auto& g = out_grad(o.id_);
    auto& ge = grad_ref(table.id_);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      auto dst = ge.row(rows[i]);
      const auto src = g.row(i);
      for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
    }
  };
  return o;
}

template <typename T>
typename Graph<T>::Var Graph<T>::gather_cols(Var a, std::vector<std::size_t> cols) {
  const auto& A = value(a);
  Tensor<T> out(A.rows(), cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) {
    if (cols[j] >= A.cols()) throw UsageError("gather_cols: index out of range");
  }
  for (std::size_t r = 0; r < A.rows(); ++r) {
    for (std::size_t j = 0; j < cols.size(); ++j) out(r, j) = A(r, cols[j]);
  }
  const Var o = push(std::move(out), needs(a), "gather_cols");
  nodes_[o.id_].backward = [this, a, o, cols = std::move(cols)] {
    const auto& g = out_grad(o.id_);
    auto& ga = grad_ref(a.id_);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      for (std::size_t j = 0; j < cols.size(); ++j) ga(r, cols[j]) += g(r, j);
    }
  };
  return o;
}

template <typename T>
typename Graph<T>::Var Graph<T>::gather_sum(Var table, std::vector<std::vector<std::size_t>> groups) {
  const auto& E = value(table);
  const std::size_t d = E.cols();
  Tensor<T> out(groups.size(), d);
  for (std::size_t i = 0; i < groups.size(); ++i) {
    auto dst = out.row(i);
    for (auto idx : groups[i]) {
      if (idx >= E.rows()) throw UsageError("gather_sum: index out of range");
      const auto src = E.row(idx);
      for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
    }
  }
  const Var o = push(std::move(out), needs(table), "gather_sum");
  nodes_[o.id_].backward = [this, table, o, groups = std::move(groups)] {
    const auto& g = out_grad(o.id_);
    auto& ge = grad_ref(table.id_);
    for (std::size_t i = 0; i < groups.size(); ++i) {
      const auto src = g.row(i);
      for (auto idx : groups[i]) {
        auto dst = ge.row(idx);
        for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
      }
    }
  };
  return o;
}

template <typename T>
typename Graph<T>::Var Graph<T>::gather_concat(Var table, std::vector<std::ptrdiff_t> idx,
                                               std::size_t width) {
  const auto& E = value(table);
  const std::size_t d = E.cols();
  if (width == 0 || idx.size() % width != 0) throw UsageError("gather_concat: bad index layout");
  const std::size_t n = idx.size() / width;
  Tensor<T> out(n, width * d);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0) continue;
    const auto r = static_cast<std::size_t>(idx[i]);
    if (r >= E.rows()) throw UsageError("gather_concat: index out of range");
    std::copy(E.row(r).begin(), E.row(r).end(), out.data() + i * d);
  }
  const Var o = push(std::move(out), needs(table), "gather_concat");
  nodes_[o.id_].backward = [this, table, o, idx = std::move(idx), d] {
    const auto& g = out_grad(o.id_);
    auto& ge = grad_ref(table.id_);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] < 0) continue;
      auto dst = ge.row(static_cast<std::size_t>(idx[i]));
      const T* src = g.data() + i * d;
      for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
    }
  };
  return o;
}

template <typename T>
typename Graph<T>::Var Graph<T>::max_over_time(Var a, std::size_t steps,
                                               std::vector<std::uint8_t> valid) {
  const auto& A = value(a);
  if (steps == 0 || A.rows() % steps != 0 || valid.size() != A.rows()) {
    throw UsageError("max_over_time: bad group layout");
  }
  const std::size_t groups = A.rows() / steps;
  const std::size_t m = A.cols();
  Tensor<T> out(groups, m);
  std::vector<std::size_t> argmax(groups * m, 0);
  for (std::size_t gi = 0; gi < groups; ++gi) {
    bool any = false;
    for (std::size_t p = 0; p < steps; ++p) {
      const std::size_t r = gi * steps + p;
      if (!valid[r]) continue;
      const auto src = A.row(r);
      for (std::size_t c = 0; c < m; ++c) {
        if (!any || src[c] > out(gi, c)) {
          out(gi, c) = src[c];
          argmax[gi * m + c] = r;
        }
      }
      any = true;
    }
    if (!any) throw UsageError("max_over_time: group without valid positions");
  }
  const Var o = push(std::move(out), needs(a), "max_over_time");
  nodes_[o.id_].backward = [this, a, o, argmax = std::move(argmax), m] {
    const auto& g = out_grad(o.id_);
    auto& ga = grad_ref(a.id_);
    for (std::size_t i = 0; i < argmax.size(); ++i) ga(argmax[i], i % m) += g[i];
  };
  return o;
}

template <typename T>
typename Graph<T>::Var Graph<T>::dropout(Var a, const Tensor<T>& mask, T rate) {
  const auto& A = value(a);
  require_same(A, mask, "dropout");
  if (!(rate >= T(0) && rate < T(1))) throw UsageError("dropout rate must be in [0, 1)");
  Tensor<T> scaled = mask;
  const T keep = T(1) / (T(1) - rate);
  for (auto& v : scaled.values()) v *= keep;
  Tensor<T> out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= scaled[i];
  const Var o = push(std::move(out), needs(a), "dropout");
  nodes_[o.id_].backward = [this, a, o, scaled = std::move(scaled)] {
    const auto& g = out_grad(o.id_);
    auto& ga = grad_ref(a.id_);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * scaled[i];
  };
  return o;
}

template <typename T>
typename Graph<T>::Var Graph<T>::softmax_cross_entropy(Var logits,
                                                       std::span<const std::size_t> targets,
                                                       Reduction reduction) {
  const auto& L = value(logits);
  const std::size_t n = L.rows();
  const std::size_t v = L.cols();
  if (v < 2) throw UsageError("softmax_cross_entropy needs at least two classes");
  if (targets.size() != n) throw UsageError("softmax_cross_entropy: target count mismatch");
  Tensor<T> probs(n, v);
  T total = T(0);
  for (std::size_t r = 0; r < n; ++r) {
    if (targets[r] >= v) throw UsageError("softmax_cross_entropy: invalid target index");
    const auto row = L.row(r);
    const T mx = *std::max_element(row.begin(), row.end());
    T z = T(0);
    auto p = probs.row(r);
    for (std::size_t c = 0; c < v; ++c) {
      p[c] = std::exp(row[c] - mx);
      z += p[c];
    }
    for (std::size_t c = 0; c < v; ++c) p[c] /= z;
    total += std::log(z) + mx - row[targets[r]];
  }
  const T norm = reduction == Reduction::Mean ? T(1) / static_cast<T>(n) : T(1);
  const Var o = push(Tensor<T>::scalar(total * norm), needs(logits), "softmax_cross_entropy");
  nodes_[o.id_].backward = [this, logits, o, probs = std::move(probs),
                            tg = std::vector<std::size_t>(targets.begin(), targets.end()), norm] {
    const T g = out_grad(o.id_)[0] * norm;
    auto& gl = grad_ref(logits.id_);
    for (std::size_t r = 0; r < tg.size(); ++r) {
      auto dst = gl.row(r);
      const auto p = probs.row(r);
      for (std::size_t c = 0; c < p.size(); ++c) dst[c] += g * p[c];
      dst[tg[r]] -= g;
    }
  };
  return o;
}

template <typename T>
void Graph<T>::backward(Var loss) {
  if (value(loss).size() != 1) throw UsageError("backward: loss must be a 1x1 scalar");
  for (auto& n : nodes_) {
    if (!n.param) n.grad = Tensor<T>();
  }
  if (!nodes_[loss.id_].requires_grad) return;
  grad_ref(loss.id_)[0] += T(1);
  for (std::size_t id = loss.id_ + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || !n.backward) continue;
    if (n.grad.empty()) continue;
    n.backward();
  }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace swlm
