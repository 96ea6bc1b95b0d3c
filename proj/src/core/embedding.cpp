#include "strata/core/embedding.hpp"

#include "strata/core/errors.hpp"

#include <cmath>

namespace strata {

std::vector<double> resolution_embedding(double gsd, int dim)
{
    if (!(gsd > 0.0))
        throw DomainError("resolution_embedding: gsd must be positive");
    if (dim <= 0 || dim % 2 != 0)
        throw DomainError("resolution_embedding: dim must be positive and even");
    const int k = dim / 2;
    const double a = std::log(gsd);
    std::vector<double> out(dim);
    for (int j = 0; j < k; ++j) {
        const double w = k == 1 ? 1.0 : std::pow(10.0, static_cast<double>(j) / (k - 1));
        out[2 * j] = std::sin(a / w);
        out[2 * j + 1] = std::cos(a / w);
    }
    return out;
}

} // namespace strata
