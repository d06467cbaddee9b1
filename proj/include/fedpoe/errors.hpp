#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedpoe {

/// Configuration rejected; one issue per offending field path.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> issues);
    const std::vector<std::string>& issues() const { return issues_; }

private:
    std::vector<std::string> issues_;
};

/// A non-finite value appeared during a run.
class NumericError : public std::runtime_error {
public:
    NumericError(std::uint64_t step, const std::string& what);
    std::uint64_t step() const { return step_; }

private:
    std::uint64_t step_;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace fedpoe
