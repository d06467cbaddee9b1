#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fedpoe/bounds.hpp"
#include "fedpoe/config.hpp"
#include "fedpoe/data_streams.hpp"
#include "fedpoe/hindsight.hpp"
#include "fedpoe/metrics.hpp"
#include "fedpoe/simulation.hpp"

namespace fedpoe {

/// Feature maps for the configured bandwidths, one per kernel.
std::vector<RandomFeatureMap> build_maps(const RunConfig& config, std::size_t input_dim);

/// Synthetic streams use `generator` (the first kernel's map) for their
/// ground truth; csv streams ignore it.
ClientStreams build_streams(const RunConfig& config, const RandomFeatureMap* generator);

struct OracleArtifacts {
    /// With several kernels the global comparator is the best kernel's best
    /// parameter, and each client's personal comparator its own best kernel.
    std::size_t kernel = 0;
    std::vector<std::size_t> personal_kernel;
    ConvexOracle convex;
    std::vector<LossPair> global_losses;    // theta*, row-aligned
    std::vector<LossPair> personal_losses;  // phi_i*, row-aligned
    std::optional<FiniteSetOracle> finite;  // single kernel only
    std::vector<LossPair> finite_losses;    // h*, row-aligned
    std::vector<LossPair> finite_personal_losses;  // h_i*, row-aligned
    /// Distance of theta* / phi_i* from the generating parameter when the
    /// stream is exactly realizable.
    std::optional<double> theta_true_distance;
    std::vector<std::optional<double>> phi_true_distance;
};

struct ExpectedRegret {
    std::size_t replicates = 0;
    Regret finite;  // averaged over selection replicates
};

struct ExperimentResult {
    RunConfig config;
    Hyperparams hp;
    std::vector<RandomFeatureMap> maps;
    ClientStreams streams;
    RunResult run;
    std::optional<OracleArtifacts> oracle;  // T > 0 and oracles requested
    std::optional<SummaryRecord> summary;   // T > 0
    std::optional<ExpectedRegret> expected;
    double G_fed = 0.0;
    double G_local = 0.0;
    bool G_measured = true;
    std::vector<std::string> notes;  // non-fatal diagnostics (e.g. oracle not converged)

    std::size_t violated_bounds() const;
};

struct ExperimentOptions {
    bool oracles = true;
    bool bounds = true;
};

/// Runs the configured experiment end to end. Throws ConfigError for
/// configurations rejected at run time and NumericError on non-finite state.
ExperimentResult run_experiment(const RunConfig& config, const ExperimentOptions& options = {});

/// Bound curves for the trace file, evaluated at every t with the run's
/// parameters.
TraceBounds trace_bounds(const ExperimentResult& result);

std::string summary_json(const ExperimentResult& result);
std::string oracle_json(const ExperimentResult& result);
std::string trace_csv(const ExperimentResult& result);
std::string bound_table(const std::vector<BoundReport>& reports);

/// summary.json, ledger.jsonl and trace.csv under `dir`.
void write_run_artifacts(const ExperimentResult& result, const std::filesystem::path& dir);

/// Human-readable digest of a summary.json written by a previous run.
std::string report_from_summary(const std::string& summary_json_text);

}  // namespace fedpoe
