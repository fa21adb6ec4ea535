#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "retroroute/tensor.hpp"

namespace retroroute::nn {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moments are held in double, one buffer per parameter tensor.
struct AdamState {
  AdamHyper hyper;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t t = 0;

  static AdamState for_params(std::span<const Tensor> params, AdamHyper hyper = {});
};

/// One bias-corrected ADAM update on a single buffer at step `t` (1-based).
void adam_update(std::span<float> param, std::span<const float> grad,
                 std::span<double> m, std::span<double> v, std::uint64_t t,
                 double lr, const AdamHyper& hyper);

/// Increments state.t and updates every parameter from its grad buffer
/// (a parameter without a grad buffer sees a zero gradient).
void adam_step(std::span<Tensor> params, AdamState& state, double lr);

/// Global L2 norm over all grad buffers, summed in double.
double global_grad_norm(std::span<const Tensor> params);

/// Scales all grads by max_norm / norm when norm > max_norm. Returns the
/// norm measured before clipping.
double clip_global_norm(std::span<Tensor> params, double max_norm);

/// Linear warmup over the first ⌊warmup_fraction·total_steps⌋ steps, then
/// cosine decay from peak_lr to final_lr at total_steps.
struct LrSchedule {
  double peak_lr = 3e-4;
  double final_lr = 3e-5;
  std::uint64_t total_steps = 1;
  double warmup_fraction = 0.10;

  std::uint64_t warmup_steps() const noexcept;
  /// Throws InputError when the schedule parameters are inconsistent.
  void validate() const;
};

/// Throws StepOutOfRange outside [0, total_steps].
double lr_at(std::int64_t step, const LrSchedule& schedule);

}  // namespace retroroute::nn
