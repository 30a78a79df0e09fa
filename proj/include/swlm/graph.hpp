#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "swlm/params.hpp"
#include "swlm/tensor.hpp"

namespace swlm {

enum class Reduction { Mean, Sum };

// Reverse-mode tape over 2-D tensors. Nodes are appended in evaluation order,
// so every node only references earlier ones and the tape is acyclic by
// construction; backward() walks it once in reverse.
//
// A graph lives for one batch. Parameter leaves alias registry storage, so
// their gradients land directly in the storage accumulators: a tensor used
// at several sites (or reached through several tied names) receives the sum
// of all contributions.
//
// Every forward op checks its result for NaN/Inf and throws NumericError.
template <typename T>
class Graph {
 public:
  class Var {
   public:
    Var() = default;
    bool valid() const { return id_ != kNone; }
    std::size_t id() const { return id_; }

   private:
    friend class Graph;
    static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
    explicit Var(std::size_t id) : id_(id) {}
    std::size_t id_ = kNone;
  };

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor<T> value);
  Var param(ParamStorage<T>& storage);

  const Tensor<T>& value(Var v) const;
  T scalar(Var v) const;
  // Gradient accumulated at `v` by the last backward(); empty if none reached it.
  const Tensor<T>& grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  // [n x k] . [k x m]
  Var matmul(Var a, Var b);
  // [n x k] . [m x k]^T
  Var matmul_nt(Var a, Var b);
  Var add(Var a, Var b);
  // [n x m] + [1 x m], broadcast over rows
  Var add_row(Var a, Var row);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, T factor);
  Var relu(Var a);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var sum(Var a);

  Var concat_cols(std::span<const Var> parts);
  Var slice_cols(Var a, std::size_t begin, std::size_t end);
  Var concat_rows(std::span<const Var> parts);
  Var slice_rows(Var a, std::size_t begin, std::size_t end);

  // Embedding lookup: out[i] = table[rows[i]].
  Var gather_rows(Var table, std::vector<std::size_t> rows);
  // out[:, j] = a[:, cols[j]].
  Var gather_cols(Var a, std::vector<std::size_t> cols);
  // out[i] = sum_j table[groups[i][j]].
  Var gather_sum(Var table, std::vector<std::vector<std::size_t>> groups);
  // out[i] = [table[idx[i*width]] ; ... ; table[idx[i*width + width-1]]], with
  // negative indices contributing zero blocks.
  Var gather_concat(Var table, std::vector<std::ptrdiff_t> idx, std::size_t width);

  // `a` holds groups of `steps` consecutive rows. out[g][c] is the max of
  // a[g*steps + p][c] over positions p with valid[g*steps + p] != 0.
  Var max_over_time(Var a, std::size_t steps, std::vector<std::uint8_t> valid);

  // out = a * mask / (1 - rate) with a caller-supplied 0/1 mask.
  Var dropout(Var a, const Tensor<T>& mask, T rate);

  // Negative log-likelihood of `targets` under softmax(logits) per row,
  // computed with max subtraction, in nats.
  Var softmax_cross_entropy(Var logits, std::span<const std::size_t> targets,
                            Reduction reduction = Reduction::Mean);

  // Seeds d(loss)/d(loss) = 1 and propagates to every reachable node.
  void backward(Var loss);

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    ParamStorage<T>* param = nullptr;
    bool requires_grad = false;
    std::function<void()> backward;
  };

  Var push(Tensor<T> value, bool requires_grad, std::string_view op);
  Tensor<T>& grad_ref(std::size_t id);
  const Tensor<T>& out_grad(std::size_t id) const { return nodes_[id].grad; }
  bool needs(Var v) const { return nodes_[v.id_].requires_grad; }
  const Tensor<T>& val(std::size_t id) const;

  template <typename Fwd, typename Bwd>
  Var unary(Var a, std::string_view op, Fwd fwd, Bwd dfdx);

  std::deque<Node> nodes_;
};

}  // namespace swlm
