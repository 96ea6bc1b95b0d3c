#pragma once

#include <stdexcept>
#include <string>

namespace strata {

// Root of every error thrown by the library. Subclasses name the failing
// contract so callers (and the CLI exit-code mapping) can discriminate.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DomainError : public Error { using Error::Error; };
class SamplingError : public Error { using Error::Error; };
class DegenerateGeometryError : public Error { using Error::Error; };
class ContractError : public Error { using Error::Error; };
class LadderError : public Error { using Error::Error; };
class PlanError : public Error { using Error::Error; };
class RegistryError : public Error { using Error::Error; };
class QuantizationError : public Error { using Error::Error; };
class MetricError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };

class AtlasCapacityError : public Error {
public:
    AtlasCapacityError(const std::string& what, int required_size)
        : Error(what), required_size_(required_size) {}
    // Smallest power-of-two atlas edge that would hold the layout.
    int required_size() const noexcept { return required_size_; }

private:
    int required_size_;
};

} // namespace strata
