#pragma once

#include <stdexcept>
#include <string>

namespace advisor {

// Bad arguments, malformed files, violated preconditions. CLI exit code 2.
class InputError : public std::invalid_argument {
public:
    explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

// Numerical failures. CLI exit code 1.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Speed below the invertibility threshold of the linearization map.
class StallError : public NumericalError {
public:
    explicit StallError(const std::string& what) : NumericalError(what) {}
};

class RankDeficient : public NumericalError {
public:
    explicit RankDeficient(const std::string& what) : NumericalError(what) {}
};

class ZeroVariance : public NumericalError {
public:
    explicit ZeroVariance(const std::string& what) : NumericalError(what) {}
};

class SingularInnovation : public NumericalError {
public:
    explicit SingularInnovation(const std::string& what) : NumericalError(what) {}
};

class AllWeightsVanished : public NumericalError {
public:
    explicit AllWeightsVanished(const std::string& what) : NumericalError(what) {}
};

class CovarianceError : public NumericalError {
public:
    explicit CovarianceError(const std::string& what) : NumericalError(what) {}
};

}  // namespace advisor
