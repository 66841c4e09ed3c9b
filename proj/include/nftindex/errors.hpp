#pragma once

#include <stdexcept>
#include <string>

namespace nftidx {

/// Bad input: malformed files, violated preconditions, unknown ids.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical procedure could not produce a meaningful answer
/// (rank-deficient design, degenerate regression window).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Reading or writing a file failed.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace nftidx
