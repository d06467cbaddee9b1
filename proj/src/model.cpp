#include "fedpoe/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "fedpoe/rng.hpp"

namespace fedpoe {

double ParameterVector::squared_norm() const {
    double s = 0.0;
    for (double v : values_) s += v * v;
    return s;
}

double ParameterVector::norm() const { return std::sqrt(squared_norm()); }

bool ParameterVector::all_finite() const {
    for (double v : values_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

RandomFeatureMap RandomFeatureMap::build(std::uint64_t seed, std::size_t input_dim, std::size_t num_features,
                                         double sigma2) {
    if (num_features == 0) throw std::invalid_argument("build_feature_map: num_features must be positive");
    if (input_dim == 0) throw std::invalid_argument("build_feature_map: input_dim must be positive");
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
        throw std::invalid_argument("build_feature_map: sigma2 must be positive and finite");
    }
    RandomFeatureMap map;
    map.input_dim_ = input_dim;
    map.num_features_ = num_features;
    map.sigma2_ = sigma2;
    map.seed_ = seed;
    map.frequencies_.resize(num_features * input_dim);

    // Fourier transform of exp(-|d|^2 / (2 sigma2)) is N(0, I / sigma2).
    const double scale = 1.0 / std::sqrt(sigma2);
    Stream stream = Stream::derive(seed, StreamPurpose::FeatureMap);
    for (double& w : map.frequencies_) w = scale * stream.normal();
    return map;
}

FeatureVector RandomFeatureMap::embed(std::span<const double> x) const {
    if (x.size() != input_dim_) {
        throw std::invalid_argument("embed: input has " + std::to_string(x.size()) + " features, map expects " +
                                    std::to_string(input_dim_));
    }
    for (double v : x) {
        if (!std::isfinite(v)) throw std::invalid_argument("embed: non-finite input");
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(num_features_));
    std::vector<double> z(2 * num_features_);
    for (std::size_t k = 0; k < num_features_; ++k) {
        const double* w = frequencies_.data() + k * input_dim_;
        double dot = 0.0;
        for (std::size_t j = 0; j < input_dim_; ++j) dot += w[j] * x[j];
        z[k] = scale * std::sin(dot);
        z[num_features_ + k] = scale * std::cos(dot);
    }
    return FeatureVector(std::move(z));
}

double predict(const ParameterVector& theta, const FeatureVector& z) {
    if (theta.size() != z.size()) {
        throw std::invalid_argument("predict: parameter length " + std::to_string(theta.size()) +
                                    " != feature length " + std::to_string(z.size()));
    }
    double s = 0.0;
    const auto t = theta.values();
    const auto f = z.values();
    for (std::size_t i = 0; i < t.size(); ++i) s += t[i] * f[i];
    return s;
}

LossPair squared_loss(double prediction, double label) {
    if (!std::isfinite(prediction) || !std::isfinite(label)) {
        throw std::invalid_argument("squared_loss: non-finite input");
    }
    const double d = prediction - label;
    const double raw = d * d;
    return LossPair{raw, raw < 1.0 ? raw : 1.0};
}

ParameterVector loss_gradient(const ParameterVector& theta, const FeatureVector& z, double label) {
    const double residual = predict(theta, z) - label;
    std::vector<double> g(z.size());
    const auto f = z.values();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = 2.0 * residual * f[i];
    return ParameterVector(std::move(g));
}

}  // namespace fedpoe
