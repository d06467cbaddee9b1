#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <span>

#include "fedpoe/model.hpp"

namespace fedpoe {

/// The b most recent (feature, label) pairs seen by one client; oldest
/// evicted first.
class SampleBuffer {
public:
    struct Entry {
        FeatureVector z;
        double label;
    };

    explicit SampleBuffer(std::size_t capacity);

    void push(FeatureVector z, double label);

    std::size_t capacity() const { return capacity_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const std::deque<Entry>& entries() const { return entries_; }

private:
    std::size_t capacity_;
    std::deque<Entry> entries_;
};

struct Hyperparams {
    double eta = 0.0;    // descent rate
    double eta_c = 0.0;  // hedge rate
    std::optional<double> G;  // gradient bound; measured from the run when unset
    std::size_t b = 1;
    std::size_t M = 0;
    std::size_t n = 1;
    std::size_t U = 0;
};

/// theta - eta * grad
ParameterVector ogd_step(const ParameterVector& theta, const ParameterVector& grad, double eta);

/// Descent on the mean raw-loss gradient over the buffer, evaluated at theta.
/// The divisor is the actual buffer length.
ParameterVector minibatch_step(const ParameterVector& theta, const SampleBuffer& buffer, double eta);

/// Elementwise mean.
ParameterVector federated_average(std::span<const ParameterVector> locals);

}  // namespace fedpoe
