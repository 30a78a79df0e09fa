#pragma once

#include <cstddef>

#include "swlm/params.hpp"

namespace swlm {

// Divides every gradient by batch_size, then rescales so the global L2 norm
// over unique storages is at most max_norm. Returns the rescaling factor
// (1 when no clipping happened).
template <typename T>
double clip_global_norm(ParamRegistry<T>& registry, double max_norm, std::size_t batch_size);

// Global L2 norm of the current gradients over unique storages.
template <typename T>
double gradient_norm(const ParamRegistry<T>& registry);

// p -= lr * grad once per unique storage, then zeroes gradients.
template <typename T>
void sgd_step(ParamRegistry<T>& registry, double lr);

}  // namespace swlm
