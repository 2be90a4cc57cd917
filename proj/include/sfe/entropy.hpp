#pragma once

#include <optional>

#include "sfe/measure.hpp"
#include "sfe/types.hpp"

namespace sfe {

// S(p) = sum_i p_i log p_i * vol_i with 0 log 0 = 0.
double entropy_S(const Density& p);

// nullopt stands for a law without a Lebesgue density, for which S = +inf.
double entropy_S(const std::optional<Density>& p);

// H(m | n) = sum m_i log(m_i / n_i) over m_i > 0; +inf if some m_i > 0 has
// n_i = 0. Inputs are flattened measures on a common (product) support.
double relative_entropy(const Vec& m, const Vec& n);
double relative_entropy(const RowMat& m, const RowMat& n);
double relative_entropy(const DiscreteMeasure& m, const DiscreteMeasure& n);

}  // namespace sfe
