#pragma once

#include <cstdint>

namespace qmem {

// Stateless counter-based generator: every (seed, stream, counter) triple maps to an
// independent 64-bit word, so results do not depend on evaluation order.
std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter);

// Uniform in the open interval (0, 1).
double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter);

// Inverse of the standard normal CDF for p in (0, 1).
double normal_quantile(double p);

// Full width at half maximum of a Gaussian per unit standard deviation.
inline constexpr double fwhm_per_sigma = 2.3548200450309493;

} // namespace qmem
