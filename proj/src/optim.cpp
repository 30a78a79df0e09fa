#include "swlm/optim.hpp"

#include <cmath>

#include "swlm/error.hpp"

namespace swlm {

template <typename T>
double gradient_norm(const ParamRegistry<T>& registry) {
  double sq = 0.0;
  for (const auto* s : registry.storages()) {
    for (T g : s->grad.values()) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  return std::sqrt(sq);
}

template <typename T>
double clip_global_norm(ParamRegistry<T>& registry, double max_norm, std::size_t batch_size) {
  if (batch_size == 0) throw UsageError("clip_global_norm: batch_size must be positive");
  if (!(max_norm > 0.0)) throw UsageError("clip_global_norm: max_norm must be positive");
  const T inv = T(1) / static_cast<T>(batch_size);
  for (auto* s : registry.storages()) {
    for (auto& g : s->grad.values()) g *= inv;
  }
  const double norm = gradient_norm(registry);
  if (!std::isfinite(norm)) throw NumericError("non-finite gradient norm");
  if (norm <= max_norm) return 1.0;
  const double scale = max_norm / norm;
  for (auto* s : registry.storages()) {
    for (auto& g : s->grad.values()) g = static_cast<T>(g * scale);
  }
  return scale;
}

template <typename T>
void sgd_step(ParamRegistry<T>& registry, double lr) {
  const T step = static_cast<T>(lr);
  for (auto* s : registry.storages()) {
    auto v = s->value.values();
    auto g = s->grad.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= step * g[i];
    s->grad.fill(T(0));
  }
  registry.bump_version();
}

template double gradient_norm(const ParamRegistry<float>&);
template double gradient_norm(const ParamRegistry<double>&);
template double clip_global_norm(ParamRegistry<float>&, double, std::size_t);
template double clip_global_norm(ParamRegistry<double>&, double, std::size_t);
template void sgd_step(ParamRegistry<float>&, double);
template void sgd_step(ParamRegistry<double>&, double);

}  // namespace swlm
