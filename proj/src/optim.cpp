#include "retroroute/optim.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "retroroute/errors.hpp"
#include "retroroute/ops.hpp"

namespace retroroute::nn {

AdamState AdamState::for_params(std::span<const Tensor> params, AdamHyper hyper) {
  AdamState s;
  s.hyper = hyper;
  for (const auto& p : params) {
    s.m.emplace_back(p.numel(), 0.0);
    s.v.emplace_back(p.numel(), 0.0);
  }
  return s;
}

void adam_update(std::span<float> param, std::span<const float> grad,
                 std::span<double> m, std::span<double> v, std::uint64_t t,
                 double lr, const AdamHyper& h) {
  if (grad.size() != param.size() || m.size() != param.size() ||
      v.size() != param.size()) {
    throw ShapeMismatch("adam_update: buffer sizes differ");
  }
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g;
    v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g * g;
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    param[i] = static_cast<float>(param[i] - lr * m_hat / (std::sqrt(v_hat) + h.eps));
  }
}

void adam_step(std::span<Tensor> params, AdamState& state, double lr) {
  if (lr < 0.0) throw InputError("negative learning rate");
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeMismatch("adam_step: optimizer state has " +
                        std::to_string(state.m.size()) + " slots for " +
                        std::to_string(params.size()) + " parameters");
  }
  ++state.t;
  std::vector<float> zeros;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    std::span<const float> g;
    if (p.has_grad()) {
      g = p.grad();
    } else {
      zeros.assign(p.numel(), 0.0f);
      g = zeros;
    }
    adam_update(p.data(), g, state.m[i], state.v[i], state.t, lr, state.hyper);
  }
}

double global_grad_norm(std::span<const Tensor> params) {
  // Summed in parameter order so the result does not depend on threading.
  double sq = 0.0;
  for (const auto& p : params) {
    if (!p.has_grad()) continue;
    const auto* node = p.node();
    double local = 0.0;
    const auto n = static_cast<std::ptrdiff_t>(node->grad.size());
    if (deterministic()) {
      for (std::ptrdiff_t i = 0; i < n; ++i) {
        const double g = node->grad[static_cast<std::size_t>(i)];
        local += g * g;
      }
    } else {
#pragma omp parallel for reduction(+ : local) if (n > (1 << 16))
      for (std::ptrdiff_t i = 0; i < n; ++i) {
        const double g = node->grad[static_cast<std::size_t>(i)];
        local += g * g;
      }
    }
    sq += local;
  }
  return std::sqrt(sq);
}

double clip_global_norm(std::span<Tensor> params, double max_norm) {
  if (!(max_norm > 0.0)) throw InputError("clip_global_norm: max_norm must be positive");
  const double norm = global_grad_norm(params);
  if (norm > max_norm) {
    const auto factor = static_cast<float>(max_norm / norm);
    for (auto& p : params) {
      if (!p.has_grad()) continue;
      for (float& g : p.grad()) g *= factor;
    }
  }
  return norm;
}

std::uint64_t LrSchedule::warmup_steps() const noexcept {
  return static_cast<std::uint64_t>(
      std::floor(warmup_fraction * static_cast<double>(total_steps)));
}

void LrSchedule::validate() const {
  if (total_steps == 0) throw InputError("schedule: total_steps must be positive");
  if (!(final_lr > 0.0 && final_lr <= peak_lr)) {
    throw InputError("schedule: need 0 < final_lr <= peak_lr");
  }
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) {
    throw InputError("schedule: warmup fraction outside [0, 1)");
  }
}

double lr_at(std::int64_t step, const LrSchedule& s) {
  s.validate();
  if (step < 0 || static_cast<std::uint64_t>(step) > s.total_steps) {
    throw StepOutOfRange("step " + std::to_string(step) + " outside [0, " +
                         std::to_string(s.total_steps) + "]");
  }
  const auto st = static_cast<std::uint64_t>(step);
  const std::uint64_t warm = s.warmup_steps();
  if (st < warm) {
    return s.peak_lr * static_cast<double>(st) / static_cast<double>(warm);
  }
  const double progress = static_cast<double>(st - warm) /
                          static_cast<double>(s.total_steps - warm);
  return s.final_lr + (s.peak_lr - s.final_lr) *
                          (1.0 + std::cos(std::numbers::pi * progress)) / 2.0;
}

}  // namespace retroroute::nn
