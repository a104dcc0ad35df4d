#pragma once

#include <stdexcept>
#include <string>

namespace clusterdr {

// Bad input data or configuration. The CLI maps this to exit code 1.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Numerical or estimation failure on otherwise valid input (exit code 2).
class EstimationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace clusterdr
