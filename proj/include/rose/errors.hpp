#pragma once

#include <stdexcept>
#include <string>

namespace rose {

// Non-finite values detected in an activation, gradient or loss. The message
// names the offending layer or tensor.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Weights-file failures, one kind per distinct corruption mode.
class WeightsError : public IoError {
public:
    enum class Kind { BadMagic, BadVersion, Truncated, ShapeMismatch, TrailingData };

    WeightsError(Kind kind, const std::string& msg) : IoError(msg), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

}  // namespace rose
