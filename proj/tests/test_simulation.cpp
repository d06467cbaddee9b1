#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fedpoe/errors.hpp"
#include "fedpoe/simulation.hpp"
#include "support.hpp"

using namespace fedpoe;
using namespace fedpoe::testing;

namespace {

struct TrajectoryRecorder : StepObserver {
    std::vector<ParameterVector> theta, phi;
    void on_step(std::uint64_t, const ServerState& server, std::span<const ClientState> clients) override {
        theta.push_back(server.lanes[0].theta);
        phi.push_back(clients[0].lanes[0].phi);
    }
};

// Local/federated pair ensemble written out directly from the update rules.
std::vector<double> standalone_pair_ensemble(const RandomFeatureMap& map, const ClientStreams& streams, double eta,
                                             double eta_c) {
    const std::size_t N = streams.num_clients(), dim = map.output_dim();
    std::vector<double> theta(dim, 0.0);
    std::vector<std::vector<double>> phi(N, std::vector<double>(dim, 0.0));
    std::vector<double> cum_fed(N, 0.0), cum_loc(N, 0.0);
    std::vector<double> out;
    for (std::uint64_t t = 1; t <= streams.horizon(); ++t) {
        std::vector<double> next(dim, 0.0);
        for (std::size_t i = 0; i < N; ++i) {
            const auto& s = streams.at(i, t);
            const auto z = embed(map, s.x);
            double f = 0.0, l = 0.0;
            for (std::size_t k = 0; k < dim; ++k) {
                f += theta[k] * z[k];
                l += phi[i][k] * z[k];
            }
            const double wf = std::exp(-eta_c * cum_fed[i]), wl = std::exp(-eta_c * cum_loc[i]);
            out.push_back((wf * f + wl * l) / (wf + wl));
            cum_fed[i] += std::min(1.0, (f - s.y) * (f - s.y));
            cum_loc[i] += std::min(1.0, (l - s.y) * (l - s.y));
            for (std::size_t k = 0; k < dim; ++k) {
                phi[i][k] -= eta * 2.0 * (l - s.y) * z[k];
                next[k] += (theta[k] - eta * 2.0 * (f - s.y) * z[k]) / static_cast<double>(N);
            }
        }
        theta = next;
    }
    return out;
}

double max_abs_diff(const ParameterVector& a, const ParameterVector& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
    return m;
}

}  // namespace

TEST_CASE("runs are deterministic and independent of the thread count") {
    const auto maps = one_map();
    const auto streams = small_streams(maps[0], 4, 80);
    auto s = settings_for(Mode::FedPoe);
    const auto a = simulate(s, maps, streams);
    const auto b = simulate(s, maps, streams);
    CHECK(a.ledger == b.ledger);
    s.threads = 3;
    const auto c = simulate(s, maps, streams);
    CHECK(a.ledger == c.ledger);
}

TEST_CASE("ledger has one row per client and step in order") {
    const auto maps = one_map();
    const auto streams = small_streams(maps[0], 3, 20);
    const auto r = simulate(settings_for(Mode::FedPoe), maps, streams);
    REQUIRE(r.ledger.rows.size() == 60);
    CHECK(r.ledger.num_clients == 3);
    CHECK(r.ledger.horizon() == 20);
    for (std::uint64_t t = 1; t <= 20; ++t) {
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(r.ledger.row(t, i).t == t);
            CHECK(r.ledger.row(t, i).client == i);
            CHECK(r.ledger.row(t, i).y == streams.at(i, t).y);
        }
    }
}

TEST_CASE("empty horizon gives an empty ledger") {
    const auto maps = one_map();
    const auto streams = small_streams(maps[0], 3, 0);
    const auto r = simulate(settings_for(Mode::FedPoe), maps, streams);
    CHECK(r.ledger.empty());
    CHECK(r.store_size.empty());
}

TEST_CASE("with one client the federated trajectory is local OGD") {
    const auto maps = one_map(3, 16);
    const auto streams = small_streams(maps[0], 1, 300, 0.1, 1);
    TrajectoryRecorder rec;
    simulate(settings_for(Mode::FedOgd), maps, streams, &rec);
    REQUIRE(rec.theta.size() == 300);
    double worst = 0.0;
    for (std::size_t t = 0; t < rec.theta.size(); ++t) worst = std::max(worst, max_abs_diff(rec.theta[t], rec.phi[t]));
    CHECK(worst <= 1e-10);
}

TEST_CASE("full ensemble with M = 0 and b = 1 reduces to the pair ensemble") {
    const auto maps = one_map();
    const auto streams = small_streams(maps[0], 3, 500);
    const auto poe = simulate(settings_for(Mode::FedPoe, 0, 1), maps, streams);
    const auto pair = simulate(settings_for(Mode::EnsembleOnly), maps, streams);
    const auto reference = standalone_pair_ensemble(maps[0], streams, 0.2, 0.3);
    REQUIRE(poe.ledger.rows.size() == reference.size());
    double worst_modes = 0.0, worst_ref = 0.0;
    for (std::size_t k = 0; k < reference.size(); ++k) {
        worst_modes = std::max(worst_modes, std::abs(poe.ledger.rows[k].record.pred_final -
                                                     pair.ledger.rows[k].record.pred_final));
        worst_ref = std::max(worst_ref, std::abs(pair.ledger.rows[k].record.pred_final - reference[k]));
        CHECK_FALSE(poe.ledger.rows[k].record.pred_snap.has_value());
    }
    CHECK(worst_modes <= 1e-12);
    CHECK(worst_ref <= 1e-12);
}

TEST_CASE("ensemble-only ignores configured M and b") {
    const auto maps = one_map();
    const auto streams = small_streams(maps[0], 3, 100);
    const auto a = simulate(settings_for(Mode::EnsembleOnly, 0, 1), maps, streams);
    const auto b = simulate(settings_for(Mode::EnsembleOnly, 3, 4), maps, streams);
    for (std::size_t k = 0; k < a.ledger.rows.size(); ++k) {
        CHECK(a.ledger.rows[k].record.pred_final == b.ledger.rows[k].record.pred_final);
    }
}

TEST_CASE("participation 1.0 equals listing every client") {
    const auto maps = one_map();
    const auto streams = small_streams(maps[0], 4, 60);
    auto s = settings_for(Mode::FedPoe);
    const auto a = simulate(s, maps, streams);
    s.participants = {3, 1, 0, 2};
    const auto b = simulate(s, maps, streams);
    CHECK(a.ledger == b.ledger);
}

TEST_CASE("partial participation samples the rounded fraction per step") {
    auto s = settings_for(Mode::FedPoe);
    s.participation = 0.4;
    bool varies = false;
    const auto first = participants_at(s, 10, 1);
    for (std::uint64_t t = 1; t <= 50; ++t) {
        const auto p = participants_at(s, 10, t);
        CHECK(p.size() == 4);
        CHECK(std::is_sorted(p.begin(), p.end()));
        CHECK(std::adjacent_find(p.begin(), p.end()) == p.end());
        CHECK(p == participants_at(s, 10, t));
        varies = varies || p != first;
    }
    CHECK(varies);

    const auto maps = one_map();
    const auto streams = small_streams(maps[0], 10, 30);
    const auto r = simulate(s, maps, streams);
    for (std::uint64_t t = 1; t <= 30; ++t) {
        const auto p = participants_at(s, 10, t);
        for (std::size_t i = 0; i < 10; ++i) {
            const bool in = std::find(p.begin(), p.end(), i) != p.end();
            CHECK(r.ledger.row(t, i).participant == in);
        }
    }
}

TEST_CASE("final prediction lies within its components") {
    const auto maps = one_map();
    const auto streams = small_streams(maps[0], 3, 200);
    const auto r = simulate(settings_for(Mode::FedPoe, 3, 2), maps, streams);
    bool saw_snapshot = false;
    for (const auto& row : r.ledger.rows) {
        const auto& c = row.record;
        const double tol = 1e-12;
        CHECK(c.pred_pair >= std::min(c.pred_fed, c.pred_local) - tol);
        CHECK(c.pred_pair <= std::max(c.pred_fed, c.pred_local) + tol);
        if (c.pred_snap) {
            saw_snapshot = true;
            CHECK(c.pred_final >= std::min(c.pred_pair, *c.pred_snap) - tol);
            CHECK(c.pred_final <= std::max(c.pred_pair, *c.pred_snap) + tol);
            CHECK(!c.selected.empty());
            CHECK(c.selected.size() <= 3);
        } else {
            CHECK(c.pred_final == c.pred_pair);
        }
    }
    CHECK(saw_snapshot);
}

TEST_CASE("snapshot store grows every n steps until U") {
    const auto maps = one_map();
    const auto streams = small_streams(maps[0], 2, 60);
    const auto r = simulate(settings_for(Mode::FedPoe), maps, streams);
    REQUIRE(r.store_size.size() == 60);
    for (std::uint64_t t = 1; t <= 60; ++t) CHECK(r.store_size[t - 1] == std::min<std::size_t>((t - 1) / 5, 6));
    for (std::uint64_t t = 1; t <= 60; ++t) {
        for (std::size_t i = 0; i < 2; ++i) {
            const auto& row = r.ledger.row(t, i);
            CHECK(row.record.snapshot_losses.size() == r.store_size[t - 1]);
            for (std::size_t j : row.record.selected) CHECK(j < r.store_size[t - 1]);
        }
    }
}

TEST_CASE("backfill scores final snapshots on the steps before they existed") {
    const auto maps = one_map();
    const auto streams = small_streams(maps[0], 2, 40);
    const auto r = simulate(settings_for(Mode::FedPoe), maps, streams);
    const auto& store = r.final_server.lanes[0].store;
    REQUIRE(r.backfill.size() == store.size());
    for (std::size_t j = 0; j < store.size(); ++j) {
        CHECK(r.backfill.created_at[j] == 5 * (j + 1));
        REQUIRE(r.backfill.losses[j].size() == r.backfill.created_at[j] * 2);
        const auto& s = streams.at(1, 3);
        const auto expect = squared_loss(predict(store.at(j), embed(maps[0], s.x)), s.y);
        CHECK(r.backfill.losses[j][(3 - 1) * 2 + 1] == expect);
    }
    // Once stored, the ledger's own scores use the same snapshot.
    const auto& row = r.ledger.row(12, 0);
    const auto& s = streams.at(0, 12);
    CHECK(row.record.snapshot_losses[1] == squared_loss(predict(store.at(1), embed(maps[0], s.x)), s.y));
}

TEST_CASE("selection replicates only change the selection draws") {
    const auto maps = one_map();
    const auto streams = small_streams(maps[0], 2, 80);
    auto s = settings_for(Mode::FedPoe);
    const auto a = simulate(s, maps, streams);
    s.selection_replicate = 1;
    const auto b = simulate(s, maps, streams);
    bool differs = false;
    for (std::size_t k = 0; k < a.ledger.rows.size(); ++k) {
        CHECK(a.ledger.rows[k].record.pred_fed == b.ledger.rows[k].record.pred_fed);
        CHECK(a.ledger.rows[k].record.pred_local == b.ledger.rows[k].record.pred_local);
        differs = differs || a.ledger.rows[k].record.selected != b.ledger.rows[k].record.selected;
    }
    CHECK(differs);
}

TEST_CASE("mode picks the reported prediction") {
    const auto maps = one_map();
    const auto streams = small_streams(maps[0], 2, 30);
    for (Mode m : {Mode::FedOgd, Mode::LocalOgd, Mode::EnsembleOnly}) {
        const auto r = simulate(settings_for(m), maps, streams);
        for (const auto& row : r.ledger.rows) {
            const auto& c = row.record;
            const double expect = m == Mode::FedOgd ? c.pred_fed : m == Mode::LocalOgd ? c.pred_local : c.pred_pair;
            CHECK(c.pred_final == expect);
        }
    }
    CHECK(parse_mode("fed-poe") == Mode::FedPoe);
    CHECK(parse_mode("local-ogd") == Mode::LocalOgd);
    CHECK_FALSE(parse_mode("fedavg").has_value());
    CHECK(to_string(Mode::EnsembleOnly) == "ensemble-only");
}

TEST_CASE("several kernels are combined and logged per kernel") {
    std::vector<RandomFeatureMap> maps{build_feature_map(1, 2, 8, 0.5), build_feature_map(2, 2, 8, 2.0)};
    const auto streams = small_streams(maps[0], 2, 40);
    const auto r = simulate(settings_for(Mode::FedPoe), maps, streams);
    for (const auto& row : r.ledger.rows) {
        REQUIRE(row.kernels.size() == 2);
        const double lo = std::min(row.kernels[0].pred_final, row.kernels[1].pred_final);
        const double hi = std::max(row.kernels[0].pred_final, row.kernels[1].pred_final);
        CHECK(row.record.pred_final >= lo - 1e-12);
        CHECK(row.record.pred_final <= hi + 1e-12);
    }
}

TEST_CASE("divergent step sizes raise a numeric error") {
    const auto maps = one_map();
    const auto streams = small_streams(maps[0], 2, 2000);
    auto s = settings_for(Mode::FedOgd);
    s.hp.eta = 100.0;
    CHECK_THROWS_AS(simulate(s, maps, streams), NumericError);
}
