#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fedpoe/data_streams.hpp"
#include "fedpoe/ledger.hpp"
#include "fedpoe/model.hpp"

namespace fedpoe {

/// Rows of the mean squared loss (1/m) sum (theta.z - y)^2, kept as a
/// design matrix.
class LeastSquaresProblem {
public:
    explicit LeastSquaresProblem(std::size_t dim);

    void add(const FeatureVector& z, double y);

    std::size_t dim() const { return dim_; }
    std::size_t count() const { return labels_.size(); }
    /// Row-major count x dim.
    const std::vector<double>& rows() const { return rows_; }
    const std::vector<double>& labels() const { return labels_; }

    /// (2/m) Z^T (Z theta - y), accumulated in extended precision.
    std::vector<double> gradient(const ParameterVector& theta) const;
    double objective(const ParameterVector& theta) const;

private:
    std::size_t dim_;
    std::vector<double> rows_;
    std::vector<double> labels_;
};

struct BatchSolution {
    ParameterVector theta;
    double gradient_norm = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};

/// Least-squares solution from an SVD of the design matrix, refined until
/// the mean-loss gradient norm is at most `tolerance` or `max_refinements`
/// passes are spent. If the exact solution cannot reach the tolerance in
/// floating point, the weakest directions are dropped as far as the
/// tolerance allows. `iterations` counts refinement passes.
BatchSolution solve_batch(const LeastSquaresProblem& problem, double tolerance = 1e-9,
                          std::size_t max_refinements = 0);

struct ConvexOracle {
    BatchSolution global;                 // theta*
    std::vector<BatchSolution> personal;  // phi_i*
};

/// Best fixed parameters in hindsight over the whole stream (global) and
/// per client (personal).
ConvexOracle hindsight_convex(const ClientStreams& streams, const RandomFeatureMap& map, double tolerance = 1e-9,
                              std::size_t max_refinements = 0);

/// Row-aligned losses of fixed parameters on the stream: entry (t-1)*N + i.
std::vector<LossPair> comparator_losses(const ClientStreams& streams, const RandomFeatureMap& map,
                                        const ParameterVector& theta);
/// Row-aligned losses where client i is scored with its own parameters.
std::vector<LossPair> personal_comparator_losses(const ClientStreams& streams, const RandomFeatureMap& map,
                                                 const std::vector<BatchSolution>& personal);

/// The finite comparator set {h_loc, h_fed, rho_1..rho_D}.
struct FiniteSetOracle {
    std::vector<std::string> names;                 // "h_loc", "h_fed", "snapshot:<j>"
    std::vector<double> total_clipped;              // per candidate, summed over t and clients
    std::vector<double> total_raw;
    std::vector<std::vector<double>> client_clipped;  // [candidate][client]
    std::vector<std::vector<double>> client_raw;
    std::size_t best = 0;                           // h*
    std::vector<std::size_t> best_per_client;       // h_i*

    /// Row-aligned losses of candidate k.
    std::vector<LossPair> candidate_losses(std::size_t k) const;

private:
    friend FiniteSetOracle hindsight_over_H(const RegretLedger&, const SnapshotBackfill&);
    std::vector<std::vector<LossPair>> row_losses_;
};

/// Exact argmin over the finite set by summing clipped losses; ties go to
/// the lower index (h_loc, then h_fed, then snapshots in order).
FiniteSetOracle hindsight_over_H(const RegretLedger& ledger, const SnapshotBackfill& backfill);

struct Regret {
    double global_clipped = 0.0;  // (1/N) sum_t sum_i
    double global_raw = 0.0;
    std::vector<double> client_clipped;  // sum_t, per client
    std::vector<double> client_raw;
};

/// Regret of the ledger's final predictions against row-aligned comparator
/// losses.
Regret compute_regret(const RegretLedger& ledger, const std::vector<LossPair>& comparator);

/// Running global regret R_t for t = 1..T.
struct RegretTrace {
    std::vector<double> clipped;
    std::vector<double> raw;
};
RegretTrace regret_trace(const RegretLedger& ledger, const std::vector<LossPair>& comparator);

}  // namespace fedpoe
