#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fedpoe/hedge.hpp"
#include "fedpoe/rng.hpp"

namespace fedpoe {

struct SelectionOutcome {
    /// Deduplicated indices in first-draw order.
    std::vector<std::size_t> chosen;
    /// Per-draw probabilities p_j.
    std::vector<double> pmf;
    /// q_j = 1 - (1 - p_j)^M.
    std::vector<double> inclusion_probs;

    bool contains(std::size_t j) const;
};

/// Selection substream for one (run seed, replicate, client, step).
Stream selection_stream(std::uint64_t seed, std::uint64_t replicate, std::uint64_t client, std::uint64_t step);

/// p_j = exp(log_w_j - logsumexp(log_w)).
std::vector<double> pmf_from_weights(const SnapshotWeights& weights);

/// Inverse-CDF lookup in ascending index order: the first j with u < cdf_j.
/// Indices with zero mass are never returned.
std::size_t inverse_cdf(std::span<const double> pmf, double u);

/// Runs the M draws given the uniforms explicitly (one per draw).
SelectionOutcome select_from_uniforms(std::span<const double> pmf, std::span<const double> uniforms);

/// M independent draws with replacement from the weight-proportional PMF.
SelectionOutcome select_models(const SnapshotWeights& weights, std::size_t M, Stream& rng);

}  // namespace fedpoe
