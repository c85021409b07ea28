#include "sqseg/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "sqseg/mask.hpp"

namespace sqseg {

namespace {

void check(std::span<const double> p, std::span<const double> g, const LossOptions& opt) {
  if (p.size() != g.size())
    throw DimensionError("hybrid_loss: p has " + std::to_string(p.size()) + " elements, g has " +
                         std::to_string(g.size()));
  if (p.empty()) throw std::invalid_argument("hybrid_loss: empty input");
  if (!(opt.eps > 0.0)) throw std::invalid_argument("hybrid_loss: eps must be > 0");
  if (!(opt.clamp > 0.0 && opt.clamp < 1.0)) throw std::invalid_argument("hybrid_loss: clamp must be in (0, 1)");
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0 && p[i] <= 1.0))
      throw std::invalid_argument("hybrid_loss: p[" + std::to_string(i) + "] outside [0, 1]");
    if (g[i] != 0.0 && g[i] != 1.0)
      throw std::invalid_argument("hybrid_loss: g[" + std::to_string(i) + "] is not binary");
  }
}

struct Sums {
  double pg = 0, pp = 0, gg = 0;
};

Sums sums(std::span<const double> p, std::span<const double> g) {
  Sums s;
  for (std::size_t i = 0; i < p.size(); ++i) {
    s.pg += p[i] * g[i];
    s.pp += p[i] * p[i];
    s.gg += g[i] * g[i];
  }
  return s;
}

std::vector<double> to_double(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

void same_shape(const Tensor& p, const Tensor& g) {
  if (p.shape() != g.shape())
    throw DimensionError("hybrid_loss: shape " + shape_string(p.shape()) + " vs " + shape_string(g.shape()));
}

}  // namespace

double hybrid_loss(std::span<const double> p, std::span<const double> g, const LossOptions& opt) {
  check(p, g, opt);
  const Sums s = sums(p, g);
  const double dice = 1.0 - (2.0 * s.pg + opt.eps) / (s.pp + s.gg + opt.eps);
  double ce = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (g[i] != 0.0) ce -= std::log(std::max(p[i], opt.clamp));
    else if (opt.symmetric_bce) ce -= std::log(std::max(1.0 - p[i], opt.clamp));
  }
  return dice + ce / static_cast<double>(p.size());
}

std::vector<double> hybrid_loss_grad(std::span<const double> p, std::span<const double> g,
                                     const LossOptions& opt) {
  check(p, g, opt);
  const Sums s = sums(p, g);
  const double num = 2.0 * s.pg + opt.eps;
  const double den = s.pp + s.gg + opt.eps;
  const double n = static_cast<double>(p.size());
  std::vector<double> grad(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    double d = -(2.0 * g[i] * den - 2.0 * p[i] * num) / (den * den);
    if (g[i] != 0.0) {
      if (p[i] > opt.clamp) d -= 1.0 / (n * p[i]);
    } else if (opt.symmetric_bce) {
      if (1.0 - p[i] > opt.clamp) d += 1.0 / (n * (1.0 - p[i]));
    }
    grad[i] = d;
  }
  return grad;
}

double hybrid_loss(const Tensor& p, const Tensor& g, const LossOptions& opt) {
  same_shape(p, g);
  return hybrid_loss(to_double(p), to_double(g), opt);
}

Tensor hybrid_loss_grad(const Tensor& p, const Tensor& g, const LossOptions& opt) {
  same_shape(p, g);
  const auto grad = hybrid_loss_grad(to_double(p), to_double(g), opt);
  return Tensor(p.shape(), std::vector<float>(grad.begin(), grad.end()));
}

}  // namespace sqseg
