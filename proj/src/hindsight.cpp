#include "fedpoe/hindsight.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>

namespace fedpoe {

LeastSquaresProblem::LeastSquaresProblem(std::size_t dim) : dim_(dim) {}

void LeastSquaresProblem::add(const FeatureVector& z, double y) {
    if (z.size() != dim_) throw std::invalid_argument("LeastSquaresProblem::add: dimension mismatch");
    rows_.insert(rows_.end(), z.values().begin(), z.values().end());
    labels_.push_back(y);
}

namespace {

// r = y - Z x and g = (2/m) Z^T (Z x - y), both accumulated in long double.
void residuals(const LeastSquaresProblem& p, std::span<const double> x, std::vector<double>& r,
               std::vector<long double>& g) {
    const std::size_t m = p.count(), dim = p.dim();
    r.resize(m);
    g.assign(dim, 0.0L);
    const double* row = p.rows().data();
    for (std::size_t i = 0; i < m; ++i, row += dim) {
        long double s = p.labels()[i];
        for (std::size_t k = 0; k < dim; ++k) s -= static_cast<long double>(row[k]) * x[k];
        r[i] = static_cast<double>(s);
        for (std::size_t k = 0; k < dim; ++k) g[k] -= s * row[k];
    }
    const long double scale = m ? 2.0L / static_cast<long double>(m) : 0.0L;
    for (auto& v : g) v *= scale;
}

double norm(const std::vector<long double>& v) {
    long double s = 0.0L;
    for (long double e : v) s += e * e;
    return static_cast<double>(std::sqrt(s));
}

}  // namespace

std::vector<double> LeastSquaresProblem::gradient(const ParameterVector& theta) const {
    std::vector<double> r;
    std::vector<long double> g;
    residuals(*this, theta.values(), r, g);
    return std::vector<double>(g.begin(), g.end());
}

double LeastSquaresProblem::objective(const ParameterVector& theta) const {
    if (labels_.empty()) return 0.0;
    std::vector<double> r;
    std::vector<long double> g;
    residuals(*this, theta.values(), r, g);
    long double s = 0.0L;
    for (double v : r) s += static_cast<long double>(v) * v;
    return static_cast<double>(s / static_cast<long double>(labels_.size()));
}

BatchSolution solve_batch(const LeastSquaresProblem& problem, double tolerance, std::size_t max_refinements) {
    const std::size_t dim = problem.dim(), m = problem.count();
    if (max_refinements == 0) max_refinements = 10;
    BatchSolution out;
    std::vector<double> x(dim, 0.0), r;
    std::vector<long double> g;
    if (m == 0) {
        out.theta = ParameterVector(std::move(x));
        out.converged = true;
        return out;
    }

    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const Eigen::MatrixXd z = Eigen::Map<const RowMajor>(problem.rows().data(), static_cast<Eigen::Index>(m),
                                                         static_cast<Eigen::Index>(dim));
    const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(problem.labels().data(), static_cast<Eigen::Index>(m));
    const Eigen::BDCSVD<Eigen::MatrixXd> svd(z, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    const Eigen::Index k_all = sv.size();

    // Exact least squares first (only numerically null directions
    // dropped). When rounding on a nearly singular problem keeps that above
    // the tolerance, fall back to a truncated SVD: drop the weakest
    // directions while the gradient they leave behind,
    // (2/m) sqrt(sum s_k^2 (u_k.y)^2), stays under half the tolerance. That
    // gives a low-norm minimizer instead of a huge, inaccurate one.
    const Eigen::VectorXd beta = svd.matrixU().transpose() * y;
    const double floor = k_all ? sv(0) * std::numeric_limits<double>::epsilon() * static_cast<double>(std::max(m, dim)) : 0.0;
    Eigen::Index exact_keep = k_all;  // singular values are sorted descending
    while (exact_keep > 0 && !(sv(exact_keep - 1) > floor)) --exact_keep;
    Eigen::Index truncated_keep = exact_keep;
    long double dropped = 0.0L;
    const long double budget = 0.25L * tolerance * static_cast<long double>(m);
    while (truncated_keep > 0) {
        const long double sk = sv(truncated_keep - 1), bk = beta(truncated_keep - 1);
        const long double next = dropped + sk * sk * bk * bk;
        if (std::sqrt(next) > budget) break;
        dropped = next;
        --truncated_keep;
    }

    std::vector<double> best(dim, 0.0);
    double best_g = 0.0;
    std::size_t passes = 0;
    for (const Eigen::Index keep : {exact_keep, truncated_keep}) {
        const auto solve = [&](const std::vector<double>& rhs) {
            const Eigen::VectorXd c =
                svd.matrixU().leftCols(keep).transpose() * Eigen::Map<const Eigen::VectorXd>(rhs.data(), static_cast<Eigen::Index>(m));
            return Eigen::VectorXd(svd.matrixV().leftCols(keep) * c.cwiseQuotient(sv.head(keep)));
        };
        std::fill(x.begin(), x.end(), 0.0);
        residuals(problem, x, r, g);
        best_g = norm(g);
        best = x;
        for (std::size_t pass = 0; pass < max_refinements && best_g > tolerance && keep > 0; ++pass) {
            const Eigen::VectorXd step = solve(r);
            ++passes;
            if (!step.allFinite()) break;
            for (std::size_t k = 0; k < dim; ++k) x[k] += step[static_cast<Eigen::Index>(k)];
            residuals(problem, x, r, g);
            const double gn = norm(g);
            if (!(gn < best_g)) break;
            best_g = gn;
            best = x;
        }
        if (best_g <= tolerance || truncated_keep == exact_keep) break;
    }
    out.theta = ParameterVector(std::move(best));
    out.gradient_norm = best_g;
    out.iterations = passes;
    out.converged = best_g <= tolerance;
    return out;
}

ConvexOracle hindsight_convex(const ClientStreams& streams, const RandomFeatureMap& map, double tolerance,
                              std::size_t max_refinements) {
    const std::size_t dim = map.output_dim();
    LeastSquaresProblem global(dim);
    std::vector<LeastSquaresProblem> personal(streams.num_clients(), LeastSquaresProblem(dim));
    for (std::size_t i = 0; i < streams.num_clients(); ++i) {
        for (const auto& s : streams.clients[i]) {
            const FeatureVector z = map.embed(s.x);
            global.add(z, s.y);
            personal[i].add(z, s.y);
        }
    }
    ConvexOracle out;
    out.global = solve_batch(global, tolerance, max_refinements);
    for (const auto& eq : personal) out.personal.push_back(solve_batch(eq, tolerance, max_refinements));
    return out;
}

std::vector<LossPair> comparator_losses(const ClientStreams& streams, const RandomFeatureMap& map,
                                        const ParameterVector& theta) {
    const std::size_t N = streams.num_clients();
    std::vector<LossPair> out(N * streams.horizon());
    for (std::uint64_t t = 1; t <= streams.horizon(); ++t) {
        for (std::size_t i = 0; i < N; ++i) {
            const auto& s = streams.at(i, t);
            out[(t - 1) * N + i] = squared_loss(predict(theta, map.embed(s.x)), s.y);
        }
    }
    return out;
}

std::vector<LossPair> personal_comparator_losses(const ClientStreams& streams, const RandomFeatureMap& map,
                                                 const std::vector<BatchSolution>& personal) {
    const std::size_t N = streams.num_clients();
    if (personal.size() != N) throw std::invalid_argument("personal_comparator_losses: one solution per client");
    std::vector<LossPair> out(N * streams.horizon());
    for (std::uint64_t t = 1; t <= streams.horizon(); ++t) {
        for (std::size_t i = 0; i < N; ++i) {
            const auto& s = streams.at(i, t);
            out[(t - 1) * N + i] = squared_loss(predict(personal[i].theta, map.embed(s.x)), s.y);
        }
    }
    return out;
}

std::vector<LossPair> FiniteSetOracle::candidate_losses(std::size_t k) const { return row_losses_.at(k); }

FiniteSetOracle hindsight_over_H(const RegretLedger& ledger, const SnapshotBackfill& backfill) {
    if (ledger.empty()) throw std::invalid_argument("hindsight_over_H: empty ledger");
    const std::size_t N = ledger.num_clients;
    const std::size_t rows = ledger.rows.size();
    const std::size_t D = backfill.size();

    FiniteSetOracle out;
    out.names = {"h_loc", "h_fed"};
    for (std::size_t j = 0; j < D; ++j) out.names.push_back("snapshot:" + std::to_string(j));
    const std::size_t K = out.names.size();
    out.row_losses_.assign(K, std::vector<LossPair>(rows));

    for (std::size_t r = 0; r < rows; ++r) {
        const LedgerRow& row = ledger.rows[r];
        out.row_losses_[0][r] = row.record.loss_local;
        out.row_losses_[1][r] = row.record.loss_fed;
        for (std::size_t j = 0; j < D; ++j) {
            if (row.t <= backfill.created_at[j]) {
                const std::size_t idx = (row.t - 1) * N + row.client;
                out.row_losses_[2 + j][r] = backfill.losses[j].at(idx);
            } else {
                if (j >= row.record.snapshot_losses.size()) {
                    throw std::invalid_argument("hindsight_over_H: ledger row at t=" + std::to_string(row.t) +
                                                " lacks snapshot " + std::to_string(j));
                }
                out.row_losses_[2 + j][r] = row.record.snapshot_losses[j];
            }
        }
    }

    out.total_clipped.assign(K, 0.0);
    out.total_raw.assign(K, 0.0);
    out.client_clipped.assign(K, std::vector<double>(N, 0.0));
    out.client_raw.assign(K, std::vector<double>(N, 0.0));
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t r = 0; r < rows; ++r) {
            const auto c = ledger.rows[r].client;
            out.total_clipped[k] += out.row_losses_[k][r].clipped;
            out.total_raw[k] += out.row_losses_[k][r].raw;
            out.client_clipped[k][c] += out.row_losses_[k][r].clipped;
            out.client_raw[k][c] += out.row_losses_[k][r].raw;
        }
    }
    auto argmin = [&](auto value) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < K; ++k) {
            if (value(k) < value(best)) best = k;
        }
        return best;
    };
    out.best = argmin([&](std::size_t k) { return out.total_clipped[k]; });
    out.best_per_client.resize(N);
    for (std::size_t i = 0; i < N; ++i) {
        out.best_per_client[i] = argmin([&](std::size_t k) { return out.client_clipped[k][i]; });
    }
    return out;
}

Regret compute_regret(const RegretLedger& ledger, const std::vector<LossPair>& comparator) {
    if (comparator.size() != ledger.rows.size()) {
        throw std::invalid_argument("compute_regret: ledger has " + std::to_string(ledger.rows.size()) +
                                    " rows, comparator has " + std::to_string(comparator.size()));
    }
    Regret out;
    const std::size_t N = ledger.num_clients;
    out.client_clipped.assign(N, 0.0);
    out.client_raw.assign(N, 0.0);
    for (std::size_t r = 0; r < comparator.size(); ++r) {
        const auto& row = ledger.rows[r];
        out.client_clipped[row.client] += row.record.loss_final.clipped - comparator[r].clipped;
        out.client_raw[row.client] += row.record.loss_final.raw - comparator[r].raw;
    }
    for (std::size_t i = 0; i < N; ++i) {
        out.global_clipped += out.client_clipped[i];
        out.global_raw += out.client_raw[i];
    }
    if (N > 0) {
        out.global_clipped /= static_cast<double>(N);
        out.global_raw /= static_cast<double>(N);
    }
    return out;
}

RegretTrace regret_trace(const RegretLedger& ledger, const std::vector<LossPair>& comparator) {
    if (comparator.size() != ledger.rows.size()) throw std::invalid_argument("regret_trace: length mismatch");
    RegretTrace out;
    const std::size_t N = ledger.num_clients;
    const std::size_t T = ledger.horizon();
    out.clipped.reserve(T);
    out.raw.reserve(T);
    double c = 0.0, w = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t i = 0; i < N; ++i) {
            const std::size_t r = t * N + i;
            c += ledger.rows[r].record.loss_final.clipped - comparator[r].clipped;
            w += ledger.rows[r].record.loss_final.raw - comparator[r].raw;
        }
        out.clipped.push_back(c / static_cast<double>(N));
        out.raw.push_back(w / static_cast<double>(N));
    }
    return out;
}

}  // namespace fedpoe
