#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fedpoe/model.hpp"

namespace fedpoe {

struct StreamSample {
    std::vector<double> x;
    double y = 0.0;
    std::uint64_t t = 0;
    std::uint32_t client = 0;
    /// Group (location) the sample was drawn from.
    std::uint32_t source = 0;

    friend bool operator==(const StreamSample&, const StreamSample&) = default;
};

/// Affine map used to bring a column to [0, 1]: v' = (v - lo) / (hi - lo),
/// or 0 when hi == lo.
struct MinMax {
    double lo = 0.0;
    double hi = 1.0;

    double apply(double v) const { return hi > lo ? (v - lo) / (hi - lo) : 0.0; }
};

/// Client-to-group assignment and the per-group source mixtures, with an
/// optional schedule of mixture switches.
struct PartitionManifest {
    struct Switch {
        std::uint64_t step = 0;  // first step that uses the new mixtures
        std::vector<std::vector<double>> mixtures;
    };

    std::size_t num_clients = 0;
    std::vector<std::size_t> groups;                  // client -> group
    std::vector<std::vector<double>> mixtures;        // group -> source proportions
    std::vector<Switch> drift;

    std::size_t num_groups() const { return mixtures.size(); }
    const std::vector<double>& mixture_at(std::size_t group, std::uint64_t t) const;
    /// Throws std::invalid_argument describing the first violated invariant.
    void validate() const;

    /// Round-robin client -> group assignment with `bias` mass on the own
    /// group and the rest spread uniformly over the others.
    static PartitionManifest group_bias(std::size_t num_clients, std::size_t num_groups, double bias);
};

struct ClientStreams {
    std::size_t input_dim = 0;
    std::vector<std::vector<StreamSample>> clients;  // [client][t - 1]
    MinMax label_norm;
    std::vector<MinMax> feature_norm;  // csv only
    std::vector<ParameterVector> group_params;  // synthetic only: un-normalized ground truth
    std::vector<std::string> feature_names;     // csv only

    std::size_t num_clients() const { return clients.size(); }
    std::size_t horizon() const { return clients.empty() ? 0 : clients.front().size(); }
    const StreamSample& at(std::size_t client, std::uint64_t t) const { return clients[client][t - 1]; }
};

struct SynthParams {
    std::size_t num_clients = 1;
    std::size_t horizon = 0;
    std::size_t input_dim = 1;
    std::size_t num_groups = 1;
    double bias = 1.0;
    double noise_sd = 0.0;
    std::uint64_t seed = 0;
    /// Optional per-group overrides of noise_sd (indexed by source group).
    std::vector<double> group_noise_sd;
    /// Per-group distance from the shared function in [0, 1]; 1 (default)
    /// gives fully distinct groups, 0 gives the shared function.
    std::vector<double> group_heterogeneity;
    std::size_t centers_per_group = 3;
};

/// Group-biased non-i.i.d. streams. Labels are theta_g . z(x) + noise with
/// z from `map`, min-max normalized to [0, 1] with lower bound min(0, min).
ClientStreams synth_group_bias(const SynthParams& params, const RandomFeatureMap& map);

/// As synth_group_bias but the mixtures switch from `pre` to `post` at
/// `switch_at`. An empty `post` reverses each pre mixture.
ClientStreams synth_drift(const SynthParams& params, std::uint64_t switch_at,
                          const std::vector<std::vector<double>>& pre,
                          const std::vector<std::vector<double>>& post, const RandomFeatureMap& map);

/// Generic synthetic generator driven by an explicit manifest.
ClientStreams synth_from_manifest(const SynthParams& params, const PartitionManifest& manifest,
                                  const RandomFeatureMap& map);

struct CsvOptions {
    std::string label_column;
    std::optional<std::string> group_column;
    std::size_t horizon = 0;
    std::uint64_t seed = 0;
};

/// Reads an RFC-4180 CSV with header, min-max normalizes every feature
/// column and the label over the file, and deals rows to clients according
/// to the manifest. Without a group column the manifest must have one group
/// and rows are dealt in file order (row r -> client r mod N).
ClientStreams load_csv(const std::filesystem::path& path, const CsvOptions& options,
                       const PartitionManifest& manifest);

/// RFC-4180 record splitting (quoted fields, doubled quotes, embedded
/// newlines).
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

/// JSON-lines stream cache, one StreamSample per line, t-major order.
void write_stream_cache(const ClientStreams& streams, const std::filesystem::path& path);
ClientStreams read_stream_cache(const std::filesystem::path& path);

}  // namespace fedpoe
