#pragma once

#include <stdexcept>
#include <string>

namespace sosnet {

// Bad input data: files, CSV rows, configs. The CLI maps this to exit code 2.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure: non-finite loss, singular solve. CLI exit code 3.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace sosnet
