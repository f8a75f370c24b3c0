#include "sparseg/loss.hpp"

#include <stdexcept>
#include <string>

namespace sparseg {

namespace {

struct DiceSums {
  double overlap = 0.0;  // A
  double total = 0.0;    // B
  std::size_t selected = 0;
};

void check_inputs(std::span<const double> r, std::span<const std::uint8_t> t, std::span<const std::uint8_t> s) {
  if (r.size() != t.size() || r.size() != s.size()) {
    throw std::invalid_argument("dice loss: length mismatch (r=" + std::to_string(r.size()) +
                                ", t=" + std::to_string(t.size()) + ", s=" + std::to_string(s.size()) + ")");
  }
}

DiceSums accumulate(std::span<const double> r, std::span<const std::uint8_t> t, std::span<const std::uint8_t> s) {
  DiceSums sums;
  double sum_t = 0.0;
  double sum_r = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double ri = r[i];
    if (!(ri >= 0.0 && ri <= 1.0)) {
      throw std::invalid_argument("dice loss: prediction " + std::to_string(ri) + " outside [0,1] at " +
                                  std::to_string(i));
    }
    if (t[i] > 1 || s[i] > 1) throw std::invalid_argument("dice loss: targets and selection must be 0/1");
    if (!s[i]) continue;
    ++sums.selected;
    const double ti = t[i];
    sums.overlap += ti * ri;
    sum_t += ti;
    sum_r += ri;
  }
  sums.total = sum_t + sum_r;
  return sums;
}

}  // namespace

double batch_dice(std::span<const double> r, std::span<const std::uint8_t> t, double eps) {
  if (r.size() != t.size()) {
    throw std::invalid_argument("batch_dice: length mismatch (r=" + std::to_string(r.size()) +
                                ", t=" + std::to_string(t.size()) + ")");
  }
  double overlap = 0.0;
  double sum_t = 0.0;
  double sum_r = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double ri = r[i];
    if (!(ri >= 0.0 && ri <= 1.0)) {
      throw std::invalid_argument("batch_dice: prediction outside [0,1] at " + std::to_string(i));
    }
    if (t[i] > 1) throw std::invalid_argument("batch_dice: targets must be 0/1");
    const double ti = t[i];
    overlap += ti * ri;
    sum_t += ti;
    sum_r += ri;
  }
  return -(2.0 * overlap + eps) / (sum_t + sum_r + eps);
}

double selective_batch_dice_value(std::span<const double> r, std::span<const std::uint8_t> t,
                                  std::span<const std::uint8_t> s, double eps) {
  check_inputs(r, t, s);
  const DiceSums sums = accumulate(r, t, s);
  if (sums.selected == 0) throw std::invalid_argument("selective_batch_dice: no selected voxels (N' = 0)");
  return -(2.0 * sums.overlap + eps) / (sums.total + eps);
}

LossOutput selective_batch_dice(std::span<const double> r, std::span<const std::uint8_t> t,
                                std::span<const std::uint8_t> s, double eps) {
  check_inputs(r, t, s);
  const DiceSums sums = accumulate(r, t, s);
  if (sums.selected == 0) throw std::invalid_argument("selective_batch_dice: no selected voxels (N' = 0)");

  const double num = 2.0 * sums.overlap + eps;
  const double den = sums.total + eps;
  LossOutput out;
  out.value = -num / den;
  out.gradient.assign(r.size(), 0.0);
  const double den2 = den * den;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (!s[i]) continue;
    out.gradient[i] = -(2.0 * static_cast<double>(t[i]) * den - num) / den2;
  }
  return out;
}

}  // namespace sparseg
