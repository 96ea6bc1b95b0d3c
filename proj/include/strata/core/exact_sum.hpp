#pragma once

#include <vector>

namespace strata {

// Correctly rounded floating-point summation (Shewchuk partials). The result
// does not depend on the order in which terms are added, which lets
// reductions over permuted or rotated inputs stay bit-identical.
class ExactSum {
public:
    void add(double x);
    double value() const;
    void clear() noexcept { partials_.clear(); }

private:
    std::vector<double> partials_;
};

} // namespace strata
