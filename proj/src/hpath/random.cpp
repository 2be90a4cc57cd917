#include "sfe/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sfe/error.hpp"

namespace sfe {

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

DensitySampler::DensitySampler(const Density& p) : support_(p.support), dim_(p.support->dim()) {
  const Vec w = p.weights();
  const double total = w.sum();
  if (!(total > 0.0)) throw InvalidArgument("sampler: density has zero mass");
  const std::size_t n = w.size();
  if (dim_ == 1) {
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), 0);
    const RowMat& pts = support_->points();
    std::sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) { return pts(a, 0) < pts(b, 0); });
    cumulative_.resize(n);
    double c = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      c += w[order_[k]] / total;
      cumulative_[k] = c;
    }
    cumulative_.back() = 1.0;
    return;
  }
  // Vose's alias method.
  prob_.assign(n, 0.0);
  alias_.assign(n, 0);
  std::vector<double> scaled(n);
  std::vector<std::size_t> small, large;
  for (std::size_t i = 0; i < n; ++i) {
    scaled[i] = w[i] / total * static_cast<double>(n);
    (scaled[i] < 1.0 ? small : large).push_back(i);
  }
  while (!small.empty() && !large.empty()) {
    const std::size_t s = small.back(), l = large.back();
    small.pop_back();
    prob_[s] = scaled[s];
    alias_[s] = l;
    scaled[l] = (scaled[l] + scaled[s]) - 1.0;
    if (scaled[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  for (std::size_t i : large) prob_[i] = 1.0;
  for (std::size_t i : small) prob_[i] = 1.0;
}

std::size_t DensitySampler::cell(Rng& rng) const {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  if (dim_ == 1) {
    const double u = unif(rng);
    const auto k = static_cast<std::size_t>(std::upper_bound(cumulative_.begin(), cumulative_.end(), u) - cumulative_.begin());
    return order_[std::min(k, order_.size() - 1)];
  }
  const double u = unif(rng) * static_cast<double>(prob_.size());
  const auto i = std::min(static_cast<std::size_t>(u), prob_.size() - 1);
  return (u - static_cast<double>(i)) < prob_[i] ? i : alias_[i];
}

Eigen::RowVectorXd DensitySampler::operator()(Rng& rng) const {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const RowMat& pts = support_->points();
  if (dim_ == 1) {
    const double u = unif(rng);
    auto k = static_cast<std::size_t>(std::upper_bound(cumulative_.begin(), cumulative_.end(), u) - cumulative_.begin());
    k = std::min(k, order_.size() - 1);
    const double lo = k == 0 ? 0.0 : cumulative_[k - 1];
    const double mass = cumulative_[k] - lo;
    const std::size_t i = order_[k];
    const double width = support_->cell_volumes()[i];
    const double frac = mass > 0.0 ? std::clamp((u - lo) / mass, 0.0, 1.0) : 0.5;
    Eigen::RowVectorXd x(1);
    x[0] = pts(i, 0) - 0.5 * width + frac * width;
    return x;
  }
  const std::size_t i = cell(rng);
  const double side = std::pow(support_->cell_volumes()[i], 1.0 / dim_);
  Eigen::RowVectorXd x = pts.row(i);
  for (int k = 0; k < dim_; ++k) x[k] += (unif(rng) - 0.5) * side;
  return x;
}

RowMat sample_density(const Density& p, std::size_t n, std::uint64_t seed) {
  const DensitySampler sampler(p);
  RowMat out(n, p.support->dim());
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(stream_seed(seed, i));
    out.row(i) = sampler(rng);
  }
  return out;
}

}  // namespace sfe
