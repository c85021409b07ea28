#pragma once

#include <span>
#include <vector>

#include "sqseg/tensor.hpp"

namespace sqseg {

struct LossOptions {
  double eps = 1.0;           // Dice smoothing
  double clamp = 1e-7;        // lower bound on p inside the log
  bool symmetric_bce = false; // add the -(1-g) log(1-p) term
};

/// Soft Dice plus foreground log term:
///   L = 1 - (2 sum(p g) + eps) / (sum(p^2) + sum(g^2) + eps) - (1/N) sum(g log p)
/// p must lie in [0, 1] and g in {0, 1}. Sums run in index order in double.
/// Throws DimensionError on length mismatch, std::invalid_argument otherwise.
double hybrid_loss(std::span<const double> p, std::span<const double> g, const LossOptions& opt = {});

/// dL/dp of the formula above. The clamp is treated as a hard floor, so the
/// log term contributes nothing where p is below it.
std::vector<double> hybrid_loss_grad(std::span<const double> p, std::span<const double> g,
                                     const LossOptions& opt = {});

// Tensor front-ends; shapes must match exactly.
double hybrid_loss(const Tensor& p, const Tensor& g, const LossOptions& opt = {});
Tensor hybrid_loss_grad(const Tensor& p, const Tensor& g, const LossOptions& opt = {});

}  // namespace sqseg
