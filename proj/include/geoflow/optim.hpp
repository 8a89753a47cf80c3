#pragma once
#include <cmath>
#include <cstdint>
#include <string>

#include "geoflow/store.hpp"

namespace geoflow {

struct TrainSchedule {
  double lr_max = 1e-3;
  double lr_min = 0;
  int64_t total_iters = 1;
  double weight_decay = 1e-2;
  double latent_l2 = 1e-4;

  void validate() const {
    if (lr_min > lr_max) throw UsageError("TrainSchedule: lr_min > lr_max");
    if (total_iters < 1) throw UsageError("TrainSchedule: total_iters must be >= 1");
  }
};

inline double cosine_lr(const TrainSchedule& s, int64_t iter) {
  if (iter < 0 || iter > s.total_iters) throw UsageError("cosine_lr: iter outside [0, total_iters]");
  double phase = 3.14159265358979323846 * double(iter) / double(s.total_iters);
  return s.lr_min + 0.5 * (s.lr_max - s.lr_min) * (1 + std::cos(phase));
}

// Decoupled-weight-decay Adam, beta = (0.9, 0.999), eps = 1e-8, bias
// correction, lr from the cosine schedule at `iter` (1-based step).
// Tensors named "z/..." skip the decay term.
template <typename T>
void adamw_step(ParameterStoreT<T>& store, const GradientsT<T>& grads, const TrainSchedule& schedule,
                int64_t iter) {
  if (iter < 1) throw UsageError("adamw_step: iter must be >= 1");
  schedule.validate();
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double lr = cosine_lr(schedule, std::min(iter, schedule.total_iters));
  for (const auto& [name, grad] : grads) {
    auto it = store.entries.find(name);
    if (it == store.entries.end()) throw UsageError("adamw_step: no such parameter: " + name);
    auto& e = it->second;
    if (!grad.same_shape(e.value))
      throw UsageError("adamw_step: gradient shape mismatch for " + name);
    e.step += 1;
    double bc1 = 1 - std::pow(beta1, double(e.step));
    double bc2 = 1 - std::pow(beta2, double(e.step));
    bool decay = schedule.weight_decay > 0 && name.rfind("z/", 0) != 0;
    for (size_t i = 0; i < e.value.numel(); ++i) {
      double g = double(grad.data[i]);
      double m = beta1 * double(e.m.data[i]) + (1 - beta1) * g;
      double v = beta2 * double(e.v.data[i]) + (1 - beta2) * g * g;
      e.m.data[i] = T(m);
      e.v.data[i] = T(v);
      double update = (m / bc1) / (std::sqrt(v / bc2) + eps);
      double p = double(e.value.data[i]);
      if (decay) p -= lr * schedule.weight_decay * p;
      e.value.data[i] = T(p - lr * update);
    }
  }
}

// Checkpoint file: magic GFM1, u32 version, u32 tensor count; per tensor
// u16 name length + name, u8 rank, u32 dims, float32 data (little-endian).
void save_checkpoint(const ParameterStore& store, const std::string& path);
ParameterStore load_checkpoint(const std::string& path);

}  // namespace geoflow
