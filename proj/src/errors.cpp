#include "fedpoe/errors.hpp"

namespace fedpoe {

namespace {
std::string join_issues(const std::vector<std::string>& issues) {
    std::string out = "invalid configuration";
    for (const auto& issue : issues) {
        out += "\n  ";
        out += issue;
    }
    return out;
}
}  // namespace

ConfigError::ConfigError(std::vector<std::string> issues)
    : std::runtime_error(join_issues(issues)), issues_(std::move(issues)) {}

NumericError::NumericError(std::uint64_t step, const std::string& what)
    : std::runtime_error("numeric failure at step " + std::to_string(step) + ": " + what), step_(step) {}

}  // namespace fedpoe
