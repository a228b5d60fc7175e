#pragma once

#include <boost/math/distributions/chi_squared.hpp>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace test_support {

// Pearson goodness-of-fit p-value for observed counts against expected
// counts (same total). Degrees of freedom = cells - 1.
inline double chi_square_p_value(const std::vector<double>& observed,
                                 const std::vector<double>& expected) {
  if (observed.size() != expected.size() || observed.size() < 2)
    throw std::invalid_argument("chi_square_p_value: bad cell counts");
  double statistic = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double diff = observed[i] - expected[i];
    statistic += diff * diff / expected[i];
  }
  boost::math::chi_squared distribution(static_cast<double>(observed.size() - 1));
  return boost::math::cdf(boost::math::complement(distribution, statistic));
}

}  // namespace test_support
