#include "fedpoe/online_opt.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace fedpoe {

SampleBuffer::SampleBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("SampleBuffer: capacity must be positive");
}

void SampleBuffer::push(FeatureVector z, double label) {
    if (entries_.size() == capacity_) entries_.pop_front();
    entries_.push_back(Entry{std::move(z), label});
}

ParameterVector ogd_step(const ParameterVector& theta, const ParameterVector& grad, double eta) {
    if (theta.size() != grad.size()) {
        throw std::invalid_argument("ogd_step: parameter length " + std::to_string(theta.size()) +
                                    " != gradient length " + std::to_string(grad.size()));
    }
    ParameterVector out = theta;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= eta * grad[i];
    return out;
}

ParameterVector minibatch_step(const ParameterVector& theta, const SampleBuffer& buffer, double eta) {
    if (buffer.empty()) throw std::invalid_argument("minibatch_step: empty buffer");
    if (buffer.size() == 1) {
        const auto& e = buffer.entries().front();
        return ogd_step(theta, loss_gradient(theta, e.z, e.label), eta);
    }
    std::vector<double> sum(theta.size(), 0.0);
    for (const auto& e : buffer.entries()) {
        if (e.z.size() != theta.size()) throw std::invalid_argument("minibatch_step: dimension mismatch");
        const double residual = 2.0 * (predict(theta, e.z) - e.label);
        const auto f = e.z.values();
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += residual * f[i];
    }
    const double scale = eta / static_cast<double>(buffer.size());
    ParameterVector out = theta;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= scale * sum[i];
    return out;
}

ParameterVector federated_average(std::span<const ParameterVector> locals) {
    if (locals.empty()) throw std::invalid_argument("federated_average: no parameters to average");
    const std::size_t dim = locals.front().size();
    for (const auto& p : locals) {
        if (p.size() != dim) throw std::invalid_argument("federated_average: length mismatch");
    }
    // Canonical (sorted) order plus a running mean: the result does not
    // depend on client order and reproduces v exactly when all inputs equal v.
    std::vector<double> mean(dim, 0.0);
    std::vector<double> column(locals.size());
    for (std::size_t i = 0; i < dim; ++i) {
        for (std::size_t k = 0; k < locals.size(); ++k) column[k] = locals[k][i];
        std::sort(column.begin(), column.end());
        double m = 0.0;
        for (std::size_t k = 0; k < column.size(); ++k) m += (column[k] - m) / static_cast<double>(k + 1);
        mean[i] = m;
    }
    return ParameterVector(std::move(mean));
}

}  // namespace fedpoe
