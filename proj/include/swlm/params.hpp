#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "swlm/tensor.hpp"

namespace swlm {

enum class InitRule {
  Uniform,
  // LSTM bias [1 x 4d], gate order (input, forget, cell, output): the forget
  // slice starts at 1, the rest is uniform.
  LstmBias,
  // Highway transform-gate bias, starts at -2 so gates open slowly.
  HighwayGateBias,
  Zero,
};

template <typename T>
struct ParamStorage {
  std::size_t id = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  InitRule init = InitRule::Uniform;
  Tensor<T> value;
  Tensor<T> grad;

  std::size_t size() const { return rows * cols; }
};

// Named trainable tensors. A slot is a name bound to a storage; tying
// re-binds a slot to another slot's storage so both names alias one tensor
// and one gradient accumulator.
//
// A registry built with allocate=false records shapes only, which lets the
// parameter counts of full-sized models be computed without allocating them.
template <typename T>
class ParamRegistry {
 public:
  struct Slot {
    std::string name;
    std::shared_ptr<ParamStorage<T>> storage;
  };

  explicit ParamRegistry(bool allocate = true) : allocate_(allocate) {}
  ParamRegistry(const ParamRegistry&) = delete;
  ParamRegistry& operator=(const ParamRegistry&) = delete;
  ParamRegistry(ParamRegistry&&) = default;
  ParamRegistry& operator=(ParamRegistry&&) = default;

  ParamStorage<T>& add(const std::string& name, std::size_t rows, std::size_t cols,
                       InitRule init = InitRule::Uniform);

  // Re-binds `alias` to the storage behind `source`. Shapes must match.
  void tie(const std::string& alias, const std::string& source);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  ParamStorage<T>& at(const std::string& name);
  const ParamStorage<T>& at(const std::string& name) const;
  std::size_t storage_id(const std::string& name) const { return at(name).id; }
  bool shares_storage(const std::string& a, const std::string& b) const {
    return storage_id(a) == storage_id(b);
  }

  const std::vector<Slot>& slots() const { return slots_; }

  // Unique storages in creation (id) order.
  std::vector<ParamStorage<T>*> storages();
  std::vector<const ParamStorage<T>*> storages() const;

  // Sum of slot sizes, counting aliased storages once per name.
  std::size_t total_params() const;
  // Sum over unique storages: the trainable model size.
  std::size_t unique_params() const;

  void zero_grad();

  bool allocated() const { return allocate_; }

  // Incremented whenever parameter values change; caches compare against it.
  std::uint64_t version() const { return version_; }
  void bump_version() { ++version_; }

 private:
  bool allocate_;
  std::vector<Slot> slots_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t next_id_ = 0;
  std::uint64_t version_ = 0;
};

}  // namespace swlm
