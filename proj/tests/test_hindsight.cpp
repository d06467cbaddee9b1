#include <doctest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fedpoe/hindsight.hpp"
#include "fedpoe/rng.hpp"
#include "support.hpp"

using namespace fedpoe;
using namespace fedpoe::testing;

namespace {

// Least squares through a pivoted QR of the design matrix, independent of
// the solver under test.
Eigen::VectorXd qr_least_squares(const RandomFeatureMap& map, const ClientStreams& streams,
                                 std::optional<std::size_t> client = std::nullopt) {
    std::vector<const StreamSample*> rows;
    for (std::size_t i = 0; i < streams.num_clients(); ++i) {
        if (client && *client != i) continue;
        for (const auto& s : streams.clients[i]) rows.push_back(&s);
    }
    Eigen::MatrixXd Z(rows.size(), map.output_dim());
    Eigen::VectorXd y(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto z = embed(map, rows[r]->x);
        for (std::size_t k = 0; k < z.size(); ++k) Z(r, k) = z[k];
        y(r) = rows[r]->y;
    }
    return Z.colPivHouseholderQr().solve(y);
}

double distance(const ParameterVector& a, const Eigen::VectorXd& b) {
    double d2 = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) d2 += (a[k] - b(k)) * (a[k] - b(k));
    return std::sqrt(d2);
}

double mean_loss(const RandomFeatureMap& map, const ClientStreams& streams, const ParameterVector& theta) {
    double sum = 0.0;
    std::size_t m = 0;
    for (const auto& c : streams.clients) {
        for (const auto& s : c) {
            sum += squared_loss(predict(theta, embed(map, s.x)), s.y).raw;
            ++m;
        }
    }
    return sum / static_cast<double>(m);
}

}  // namespace

TEST_CASE("least-squares problem reproduces the mean loss and its gradient") {
    const auto map = build_feature_map(3, 2, 4, 0.5);
    const auto streams = small_streams(map, 2, 30, 0.1);
    LeastSquaresProblem eq(map.output_dim());
    for (const auto& c : streams.clients) {
        for (const auto& s : c) eq.add(embed(map, s.x), s.y);
    }
    CHECK(eq.count() == 60);
    const ParameterVector theta({0.3, -0.2, 0.1, 0.5, -0.4, 0.2, 0.0, 0.7});
    CHECK(eq.objective(theta) == doctest::Approx(mean_loss(map, streams, theta)).epsilon(1e-12));
    std::vector<double> grad(map.output_dim(), 0.0);
    for (const auto& c : streams.clients) {
        for (const auto& s : c) {
            const auto g = loss_gradient(theta, embed(map, s.x), s.y);
            for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += g[k] / 60.0;
        }
    }
    const auto eg = eq.gradient(theta);
    for (std::size_t k = 0; k < grad.size(); ++k) CHECK(eg[k] == doctest::Approx(grad[k]).epsilon(1e-10));
}

TEST_CASE("batch solve matches a QR least-squares reference") {
    const auto map = build_feature_map(29, 2, 10, 0.3);
    const auto streams = small_streams(map, 3, 50, 0.1);
    const auto oracle = hindsight_convex(streams, map);
    CHECK(oracle.global.converged);
    CHECK(oracle.global.gradient_norm <= 1e-9);
    CHECK(distance(oracle.global.theta, qr_least_squares(map, streams)) < 1e-6);
    REQUIRE(oracle.personal.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(oracle.personal[i].converged);
        CHECK(distance(oracle.personal[i].theta, qr_least_squares(map, streams, i)) < 1e-6);
    }
}

TEST_CASE("badly conditioned solves still reach the reference objective") {
    const auto map = build_feature_map(17, 2, 10, 1.0);
    const auto streams = small_streams(map, 3, 50, 0.1);
    const auto oracle = hindsight_convex(streams, map);
    CHECK(oracle.global.converged);
    Eigen::VectorXd ref = qr_least_squares(map, streams);
    const ParameterVector ref_theta(std::vector<double>(ref.data(), ref.data() + ref.size()));
    const double best = mean_loss(map, streams, ref_theta);
    CHECK(mean_loss(map, streams, oracle.global.theta) <= best + 1e-9);
}

TEST_CASE("singular designs get the minimum-norm solution") {
    // Columns 2 and 3 are identical, so only their sum is identified.
    LeastSquaresProblem p(4);
    Stream s(12);
    for (int k = 0; k < 40; ++k) {
        const double a = s.normal(), b = s.normal(), c = s.normal();
        p.add(FeatureVector({a, b, c, c}), 0.5 * a - b + 2.0 * c + 0.01 * s.normal());
    }
    const auto sol = solve_batch(p);
    CHECK(sol.converged);
    CHECK(sol.gradient_norm <= 1e-9);
    CHECK(sol.theta[2] == doctest::Approx(sol.theta[3]).epsilon(1e-9));
    CHECK(sol.theta[2] + sol.theta[3] == doctest::Approx(2.0).epsilon(0.05));
    CHECK(solve_batch(LeastSquaresProblem(3)).theta == ParameterVector::zeros(3));
}

TEST_CASE("noiseless realizable streams recover the generating parameter") {
    const auto map = build_feature_map(17, 2, 5, 1.0);
    int checked = 0;
    for (std::uint64_t seed = 1; seed <= 20 && checked < 2; ++seed) {
        const auto streams = small_streams(map, 3, 50, 0.0, 1, seed);
        if (streams.label_norm.lo != 0.0) continue;
        const auto oracle = hindsight_convex(streams, map);
        double d2 = 0.0;
        for (std::size_t k = 0; k < map.output_dim(); ++k) {
            const double v = oracle.global.theta[k] - streams.group_params[0][k] / streams.label_norm.hi;
            d2 += v * v;
        }
        CHECK(std::sqrt(d2) < 1e-6);
        ++checked;
    }
    CHECK(checked == 2);
}

TEST_CASE("with one client the global and personal comparators coincide") {
    const auto map = build_feature_map(3, 2, 5, 0.5);
    const auto streams = small_streams(map, 1, 80, 0.1, 1);
    const auto oracle = hindsight_convex(streams, map);
    CHECK(oracle.global.theta == oracle.personal[0].theta);
}

TEST_CASE("finite-set oracle sums losses exactly and breaks ties low") {
    const auto maps = one_map();
    const auto streams = small_streams(maps[0], 3, 60);
    const auto run = simulate(settings_for(Mode::FedPoe), maps, streams);
    const auto H = hindsight_over_H(run.ledger, run.backfill);
    const std::size_t D = run.backfill.size();
    REQUIRE(H.names.size() == D + 2);
    CHECK(H.names[0] == "h_loc");
    CHECK(H.names[1] == "h_fed");
    CHECK(H.names[2] == "snapshot:0");

    const std::size_t N = 3;
    std::vector<double> total(D + 2, 0.0);
    std::vector<std::vector<double>> per(D + 2, std::vector<double>(N, 0.0));
    for (const auto& row : run.ledger.rows) {
        std::vector<double> l{row.record.loss_local.clipped, row.record.loss_fed.clipped};
        for (std::size_t j = 0; j < D; ++j) {
            l.push_back(row.t <= run.backfill.created_at[j]
                            ? run.backfill.losses[j][(row.t - 1) * N + row.client].clipped
                            : row.record.snapshot_losses[j].clipped);
        }
        for (std::size_t k = 0; k < l.size(); ++k) {
            total[k] += l[k];
            per[k][row.client] += l[k];
        }
    }
    for (std::size_t k = 0; k < D + 2; ++k) CHECK(H.total_clipped[k] == doctest::Approx(total[k]).epsilon(1e-12));
    const auto best = static_cast<std::size_t>(std::min_element(total.begin(), total.end()) - total.begin());
    CHECK(H.best == best);
    for (std::size_t i = 0; i < N; ++i) {
        std::size_t b = 0;
        for (std::size_t k = 1; k < D + 2; ++k) if (per[k][i] < per[b][i]) b = k;
        CHECK(H.best_per_client[i] == b);
    }
    const auto rows = H.candidate_losses(H.best);
    REQUIRE(rows.size() == run.ledger.rows.size());
}

TEST_CASE("ties in the finite set go to the lower index") {
    RegretLedger ledger;
    ledger.num_clients = 1;
    for (std::uint64_t t = 1; t <= 4; ++t) {
        LedgerRow row;
        row.t = t;
        row.record.loss_local = {0.25, 0.25};
        row.record.loss_fed = {0.25, 0.25};
        ledger.rows.push_back(row);
    }
    const auto H = hindsight_over_H(ledger, SnapshotBackfill{});
    CHECK(H.best == 0);
    CHECK(H.best_per_client[0] == 0);
}

TEST_CASE("regret is the loss gap averaged over clients") {
    RegretLedger ledger;
    ledger.num_clients = 2;
    std::vector<LossPair> comp;
    for (std::uint64_t t = 1; t <= 3; ++t) {
        for (std::uint32_t i = 0; i < 2; ++i) {
            LedgerRow row;
            row.t = t;
            row.client = i;
            row.record.loss_final = {0.5 + i, std::min(1.0, 0.5 + i)};
            ledger.rows.push_back(row);
            comp.push_back({0.25, 0.25});
        }
    }
    const auto r = compute_regret(ledger, comp);
    CHECK(r.client_clipped == std::vector<double>{0.75, 2.25});
    CHECK(r.client_raw == std::vector<double>{0.75, 3.75});
    CHECK(r.global_clipped == doctest::Approx(1.5));
    CHECK(r.global_raw == doctest::Approx(2.25));
    const auto trace = regret_trace(ledger, comp);
    REQUIRE(trace.clipped.size() == 3);
    CHECK(trace.clipped[0] == doctest::Approx(0.5));
    CHECK(trace.clipped.back() == doctest::Approx(r.global_clipped));
    CHECK(trace.raw.back() == doctest::Approx(r.global_raw));
}
