#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace fedpoe {

/// Embedded representation z(x) of one input; unit Euclidean norm.
class FeatureVector {
public:
    FeatureVector() = default;
    explicit FeatureVector(std::vector<double> values) : values_(std::move(values)) {}

    std::span<const double> values() const { return values_; }
    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }

    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;

private:
    std::vector<double> values_;
};

/// Linear-model parameters over the feature space (length 2D).
class ParameterVector {
public:
    ParameterVector() = default;
    explicit ParameterVector(std::vector<double> values) : values_(std::move(values)) {}

    static ParameterVector zeros(std::size_t n) { return ParameterVector(std::vector<double>(n, 0.0)); }

    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }
    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }

    double squared_norm() const;
    double norm() const;
    bool all_finite() const;

    friend bool operator==(const ParameterVector&, const ParameterVector&) = default;

private:
    std::vector<double> values_;
};

/// Raw squared loss and its [0, 1] clipped counterpart.
struct LossPair {
    double raw = 0.0;
    double clipped = 0.0;

    friend bool operator==(const LossPair&, const LossPair&) = default;
};

/// Frozen random Fourier frequencies for a Gaussian kernel with variance
/// sigma2. Rows are drawn i.i.d. from N(0, I / sigma2).
class RandomFeatureMap {
public:
    static RandomFeatureMap build(std::uint64_t seed, std::size_t input_dim, std::size_t num_features,
                                  double sigma2);

    std::size_t input_dim() const { return input_dim_; }
    std::size_t num_features() const { return num_features_; }
    /// Length of embedded vectors, 2 * num_features.
    std::size_t output_dim() const { return 2 * num_features_; }
    double sigma2() const { return sigma2_; }
    std::uint64_t seed() const { return seed_; }

    /// Row-major num_features x input_dim.
    std::span<const double> frequencies() const { return frequencies_; }
    std::span<const double> frequency(std::size_t k) const {
        return std::span<const double>(frequencies_).subspan(k * input_dim_, input_dim_);
    }

    FeatureVector embed(std::span<const double> x) const;

private:
    RandomFeatureMap() = default;

    std::vector<double> frequencies_;
    std::size_t input_dim_ = 0;
    std::size_t num_features_ = 0;
    double sigma2_ = 1.0;
    std::uint64_t seed_ = 0;
};

inline RandomFeatureMap build_feature_map(std::uint64_t seed, std::size_t input_dim, std::size_t num_features,
                                          double sigma2) {
    return RandomFeatureMap::build(seed, input_dim, num_features, sigma2);
}

inline FeatureVector embed(const RandomFeatureMap& map, std::span<const double> x) { return map.embed(x); }

double predict(const ParameterVector& theta, const FeatureVector& z);

LossPair squared_loss(double prediction, double label);

/// Gradient of the raw squared loss: 2 (theta.z - y) z.
ParameterVector loss_gradient(const ParameterVector& theta, const FeatureVector& z, double label);

}  // namespace fedpoe
