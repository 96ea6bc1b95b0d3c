#pragma once

#include <vector>

namespace strata {

// Sinusoidal encoding of a ground sample distance s (m/pixel). Entries are
// interleaved [sin(ln s / w_0), cos(ln s / w_0), sin(ln s / w_1), ...] with
// geometric frequencies w_j = 10^(j / (K-1)), K = dim/2 (w_0 = 1 when K = 1).
// Throws DomainError for s <= 0 or an odd/zero dim.
std::vector<double> resolution_embedding(double gsd, int dim);

} // namespace strata
