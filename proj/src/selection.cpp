#include "fedpoe/selection.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fedpoe {

bool SelectionOutcome::contains(std::size_t j) const {
    return std::find(chosen.begin(), chosen.end(), j) != chosen.end();
}

Stream selection_stream(std::uint64_t seed, std::uint64_t replicate, std::uint64_t client, std::uint64_t step) {
    return Stream::derive(seed, StreamPurpose::Selection, {replicate, client, step});
}

std::vector<double> pmf_from_weights(const SnapshotWeights& weights) {
    if (weights.empty()) throw std::invalid_argument("pmf_from_weights: no snapshots");
    const auto log_w = weights.log_w();
    const double top = *std::max_element(log_w.begin(), log_w.end());
    double total = 0.0;
    for (double v : log_w) total += std::exp(v - top);
    const double lse = top + std::log(total);
    std::vector<double> p(log_w.size());
    for (std::size_t j = 0; j < p.size(); ++j) p[j] = std::exp(log_w[j] - lse);
    return p;
}

std::size_t inverse_cdf(std::span<const double> pmf, double u) {
    double cdf = 0.0;
    std::size_t last_positive = pmf.size();
    for (std::size_t j = 0; j < pmf.size(); ++j) {
        if (pmf[j] <= 0.0) continue;
        last_positive = j;
        cdf += pmf[j];
        if (u < cdf) return j;
    }
    // Rounding left the total just below u; fall back to the last live index.
    if (last_positive == pmf.size()) throw std::invalid_argument("inverse_cdf: PMF has no mass");
    return last_positive;
}

SelectionOutcome select_from_uniforms(std::span<const double> pmf, std::span<const double> uniforms) {
    if (pmf.empty()) throw std::invalid_argument("select_models: empty store");
    if (uniforms.empty()) throw std::invalid_argument("select_models: M must be positive");
    SelectionOutcome out;
    out.pmf.assign(pmf.begin(), pmf.end());
    for (double u : uniforms) {
        const std::size_t k = inverse_cdf(pmf, u);
        if (!out.contains(k)) out.chosen.push_back(k);
    }
    out.inclusion_probs.resize(pmf.size());
    for (std::size_t j = 0; j < pmf.size(); ++j) {
        out.inclusion_probs[j] = inclusion_probability(std::clamp(pmf[j], 0.0, 1.0), uniforms.size());
    }
    return out;
}

SelectionOutcome select_models(const SnapshotWeights& weights, std::size_t M, Stream& rng) {
    if (weights.empty()) throw std::invalid_argument("select_models: empty store");
    if (M == 0) throw std::invalid_argument("select_models: M must be positive");
    const auto pmf = pmf_from_weights(weights);
    std::vector<double> uniforms(M);
    for (double& u : uniforms) u = rng.uniform();
    return select_from_uniforms(pmf, uniforms);
}

}  // namespace fedpoe
