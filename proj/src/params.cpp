#include "swlm/params.hpp"

#include <algorithm>
#include <map>

namespace swlm {

template <typename T>
ParamStorage<T>& ParamRegistry<T>::add(const std::string& name, std::size_t rows,
                                       std::size_t cols, InitRule init) {
  if (contains(name)) throw UsageError("duplicate parameter '" + name + "'");
  if (rows == 0 || cols == 0) throw UsageError("parameter '" + name + "' has an empty shape");
  auto storage = std::make_shared<ParamStorage<T>>();
  storage->id = next_id_++;
  storage->rows = rows;
  storage->cols = cols;
  storage->init = init;
  if (allocate_) {
    storage->value = Tensor<T>(rows, cols);
    storage->grad = Tensor<T>(rows, cols);
  }
  index_[name] = slots_.size();
  slots_.push_back({name, storage});
  return *slots_.back().storage;
}

template <typename T>
void ParamRegistry<T>::tie(const std::string& alias, const std::string& source) {
  auto& dst = slots_.at(index_.at(alias));
  const auto& src = slots_.at(index_.at(source));
  if (dst.storage->rows != src.storage->rows || dst.storage->cols != src.storage->cols) {
    throw UsageError("cannot tie '" + alias + "' to '" + source + "': shape mismatch");
  }
  dst.storage = src.storage;
}

template <typename T>
ParamStorage<T>& ParamRegistry<T>::at(const std::string& name) {
  const auto it = index_.find(name);
  if (it == index_.end()) throw UsageError("unknown parameter '" + name + "'");
  return *slots_[it->second].storage;
}

template <typename T>
const ParamStorage<T>& ParamRegistry<T>::at(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw UsageError("unknown parameter '" + name + "'");
  return *slots_[it->second].storage;
}

template <typename T>
std::vector<ParamStorage<T>*> ParamRegistry<T>::storages() {
  std::map<std::size_t, ParamStorage<T>*> unique;
  for (auto& s : slots_) unique[s.storage->id] = s.storage.get();
  std::vector<ParamStorage<T>*> out;
  for (auto& [id, p] : unique) out.push_back(p);
  return out;
}

template <typename T>
std::vector<const ParamStorage<T>*> ParamRegistry<T>::storages() const {
  std::map<std::size_t, const ParamStorage<T>*> unique;
  for (const auto& s : slots_) unique[s.storage->id] = s.storage.get();
  std::vector<const ParamStorage<T>*> out;
  for (auto& [id, p] : unique) out.push_back(p);
  return out;
}

template <typename T>
std::size_t ParamRegistry<T>::total_params() const {
  std::size_t n = 0;
  for (const auto& s : slots_) n += s.storage->size();
  return n;
}

template <typename T>
std::size_t ParamRegistry<T>::unique_params() const {
  std::size_t n = 0;
  for (const auto* s : storages()) n += s->size();
  return n;
}

template <typename T>
void ParamRegistry<T>::zero_grad() {
  for (auto* s : storages()) s->grad.fill(T(0));
}

template class ParamRegistry<float>;
template class ParamRegistry<double>;

}  // namespace swlm
