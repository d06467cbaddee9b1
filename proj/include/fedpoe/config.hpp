#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fedpoe/simulation.hpp"

namespace fedpoe {

enum class DataSource { SyntheticBias, SyntheticDrift, Csv };

std::string_view to_string(DataSource source);

/// A learning rate given either as a number or as c/sqrt(T).
struct RateSpec {
    double value = 0.0;
    bool scaled_by_horizon = false;  // value / sqrt(T)

    double resolve(std::size_t T) const;
    std::string text() const;
};

struct DataConfig {
    DataSource source = DataSource::SyntheticBias;
    /// Binary labels in {0, 1}; accuracy thresholds predictions at 0.5.
    bool classification = false;

    // synthetic
    std::size_t input_dim = 3;
    std::size_t num_groups = 1;
    double bias = 1.0;
    double noise_sd = 0.0;
    std::vector<double> group_noise_sd;
    std::vector<double> group_heterogeneity;
    std::size_t centers_per_group = 3;

    // synthetic-drift
    std::uint64_t switch_at = 0;
    std::vector<std::vector<double>> pre;
    std::vector<std::vector<double>> post;

    // csv
    std::filesystem::path path;
    std::string label_column;
    std::optional<std::string> group_column;
    std::vector<std::vector<double>> mixtures;
};

struct FederationConfig {
    std::size_t clients = 1;
    std::size_t horizon = 0;
    double participation = 1.0;
    std::vector<std::size_t> participants;
};

struct HyperparamConfig {
    std::optional<RateSpec> eta;
    std::optional<RateSpec> eta_c;  // defaults to eta outside the ensemble modes
    std::optional<double> G;        // measured when unset
    std::size_t b = 1;
    std::optional<std::size_t> M;
    std::optional<std::size_t> n;
    std::optional<std::size_t> U;
};

struct ModelConfig {
    std::size_t features = 100;
    std::vector<double> bandwidths{1.0};
    std::optional<double> kernel_rate;
};

struct VerifyConfig {
    std::size_t selection_replicates = 20;
    double oracle_tolerance = 1e-9;
};

struct RunConfig {
    int schema = 1;
    std::string experiment = "experiment";
    std::uint64_t seed = 0;
    Mode mode = Mode::FedPoe;
    std::optional<std::filesystem::path> output;
    std::size_t threads = 1;
    DataConfig data;
    FederationConfig federation;
    HyperparamConfig hyperparams;
    ModelConfig model;
    VerifyConfig verify;
    /// Directory of the config file; relative data paths resolve against it.
    std::filesystem::path base_dir;

    Hyperparams resolved_hyperparams() const;
    SimulationSettings settings(std::uint64_t selection_replicate = 0) const;
};

/// Parses and validates; throws ConfigError listing every problem with its
/// field path (for example "hyperparams.eta: required").
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

/// Re-checks cross-field requirements after flag overrides.
void validate(const RunConfig& config);

/// --out, then the config's output field, then $FEDPOE_OUTPUT_ROOT/<experiment>,
/// then runs/<experiment>.
std::filesystem::path output_directory(const RunConfig& config);

}  // namespace fedpoe
