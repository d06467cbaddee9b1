#include "fedpoe/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <stdexcept>
#include <string>
#include <thread>

#include "fedpoe/errors.hpp"
#include "fedpoe/rng.hpp"
#include "fedpoe/selection.hpp"

namespace fedpoe {

std::string_view to_string(Mode mode) {
    switch (mode) {
        case Mode::FedPoe: return "fed-poe";
        case Mode::EnsembleOnly: return "ensemble-only";
        case Mode::FedOgd: return "fed-ogd";
        case Mode::LocalOgd: return "local-ogd";
    }
    return "unknown";
}

std::optional<Mode> parse_mode(std::string_view text) {
    for (Mode m : {Mode::FedPoe, Mode::EnsembleOnly, Mode::FedOgd, Mode::LocalOgd}) {
        if (to_string(m) == text) return m;
    }
    return std::nullopt;
}

namespace {

Hyperparams effective(const SimulationSettings& settings) {
    Hyperparams hp = settings.hp;
    if (settings.mode == Mode::EnsembleOnly) {
        hp.M = 0;
        hp.b = 1;
    }
    return hp;
}

void require_finite(double v, std::uint64_t t, const char* what) {
    if (!std::isfinite(v)) throw NumericError(t, what);
}

double max_gradient_norm(const ParameterVector& theta, const SampleBuffer& buffer) {
    double g = 0.0;
    for (const auto& e : buffer.entries()) {
        double zz = 0.0;
        for (double v : e.z.values()) zz += v * v;
        g = std::max(g, 2.0 * std::abs(predict(theta, e.z) - e.label) * std::sqrt(zz));
    }
    return g;
}

template <class Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
    threads = std::max<std::size_t>(1, std::min(threads, count));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(count);
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < count; i += threads) {
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    // Rethrow the lowest-index failure so the diagnostic does not depend on
    // thread timing.
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

struct ClientOutcome {
    LedgerRow row;
    std::vector<ParameterVector> psi;  // per lane, participants only
    GradientStats gradients;
};

ComponentRecord lane_step(KernelLaneState& lane, const ServerState::Lane& server, const FeatureVector& z, double y,
                          std::uint64_t t, std::size_t client, const SimulationSettings& settings,
                          const Hyperparams& hp) {
    ComponentRecord rec;
    rec.pred_fed = predict(server.theta, z);
    rec.pred_local = predict(lane.phi, z);
    require_finite(rec.pred_fed, t, "federated prediction");
    require_finite(rec.pred_local, t, "local prediction");
    rec.pred_pair = hedge_combine(lane.pair_lf, rec.pred_fed, rec.pred_local);

    rec.loss_fed = squared_loss(rec.pred_fed, y);
    rec.loss_local = squared_loss(rec.pred_local, y);
    rec.loss_pair = squared_loss(rec.pred_pair, y);

    // Every stored snapshot is scored for the ledger; the weights below only
    // ever see the selected ones.
    const auto& store = server.store;
    rec.snapshot_losses.reserve(store.size());
    for (std::size_t j = 0; j < store.size(); ++j) {
        const double p = predict(store.at(j), z);
        require_finite(p, t, "snapshot prediction");
        rec.snapshot_losses.push_back(squared_loss(p, y));
    }

    double ensemble = rec.pred_pair;
    std::optional<SelectionOutcome> selection;
    if (settings.mode == Mode::FedPoe && hp.M >= 1 && !store.empty()) {
        Stream rng = selection_stream(settings.seed, settings.selection_replicate, client, t);
        selection = select_models(lane.snapshot_w, hp.M, rng);
        const auto views = store.fetch(selection->chosen);
        std::vector<double> preds;
        preds.reserve(selection->chosen.size());
        for (std::size_t j : selection->chosen) preds.push_back(predict(*views.at(j), z));
        rec.pred_snap = snapshot_ensemble(lane.snapshot_w, selection->chosen, preds);
        rec.loss_snap = squared_loss(*rec.pred_snap, y);
        rec.selected = selection->chosen;
        ensemble = hedge_combine(lane.pair_top, rec.pred_pair, *rec.pred_snap);
    }

    switch (settings.mode) {
        case Mode::FedPoe: rec.pred_final = ensemble; break;
        case Mode::EnsembleOnly: rec.pred_final = rec.pred_pair; break;
        case Mode::FedOgd: rec.pred_final = rec.pred_fed; break;
        case Mode::LocalOgd: rec.pred_final = rec.pred_local; break;
    }
    rec.loss_final = squared_loss(rec.pred_final, y);

    // Weight updates consume clipped losses.
    lane.pair_lf = hedge_update(lane.pair_lf, rec.loss_fed.clipped, rec.loss_local.clipped);
    if (selection) {
        lane.pair_top = hedge_update(lane.pair_top, rec.loss_pair.clipped, rec.loss_snap->clipped);
        for (std::size_t j : selection->chosen) {
            lane.snapshot_w = importance_weight_update(lane.snapshot_w, j, rec.snapshot_losses[j].clipped,
                                                       selection->inclusion_probs[j], true);
        }
    }
    return rec;
}

ComponentRecord combine_records(const KernelWeights& kw, const std::vector<ComponentRecord>& lanes, double y) {
    std::vector<double> buf(lanes.size());
    auto mix = [&](auto member) {
        for (std::size_t k = 0; k < lanes.size(); ++k) buf[k] = lanes[k].*member;
        return kw.combine(buf);
    };
    ComponentRecord rec;
    rec.pred_final = mix(&ComponentRecord::pred_final);
    rec.pred_pair = mix(&ComponentRecord::pred_pair);
    rec.pred_local = mix(&ComponentRecord::pred_local);
    rec.pred_fed = mix(&ComponentRecord::pred_fed);
    rec.loss_final = squared_loss(rec.pred_final, y);
    rec.loss_pair = squared_loss(rec.pred_pair, y);
    rec.loss_local = squared_loss(rec.pred_local, y);
    rec.loss_fed = squared_loss(rec.pred_fed, y);
    return rec;
}

}  // namespace

ServerState make_server(std::span<const RandomFeatureMap> maps, const Hyperparams& hp) {
    ServerState server;
    for (const auto& map : maps) {
        server.lanes.push_back(ServerState::Lane{ParameterVector::zeros(map.output_dim()), SnapshotStore(hp.n, hp.U)});
    }
    return server;
}

std::vector<ClientState> make_clients(std::size_t num_clients, std::span<const RandomFeatureMap> maps,
                                      const SimulationSettings& settings) {
    const Hyperparams hp = effective(settings);
    const double kernel_rate = settings.kernel_rate.value_or(hp.eta_c);
    std::vector<ClientState> clients;
    clients.reserve(num_clients);
    for (std::size_t i = 0; i < num_clients; ++i) {
        ClientState c{{}, KernelWeights(maps.size(), kernel_rate)};
        for (const auto& map : maps) {
            c.lanes.push_back(KernelLaneState{ParameterVector::zeros(map.output_dim()), HedgePair(hp.eta_c),
                                              HedgePair(hp.eta_c), SnapshotWeights(hp.eta_c), SampleBuffer(hp.b)});
        }
        clients.push_back(std::move(c));
    }
    return clients;
}

std::vector<std::size_t> participants_at(const SimulationSettings& settings, std::size_t num_clients,
                                         std::uint64_t t) {
    if (!settings.participants.empty()) {
        std::vector<std::size_t> fixed = settings.participants;
        std::sort(fixed.begin(), fixed.end());
        fixed.erase(std::unique(fixed.begin(), fixed.end()), fixed.end());
        return fixed;
    }
    std::vector<std::size_t> all(num_clients);
    for (std::size_t i = 0; i < num_clients; ++i) all[i] = i;
    if (settings.participation >= 1.0 || num_clients == 0) return all;
    const auto k = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(settings.participation * static_cast<double>(num_clients))));
    // Partial Fisher-Yates on a per-step substream.
    Stream rng = Stream::derive(settings.seed, StreamPurpose::Participation, {t});
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(num_clients - i));
        std::swap(all[i], all[j]);
    }
    all.resize(k);
    std::sort(all.begin(), all.end());
    return all;
}

std::vector<LedgerRow> run_round(ServerState& server, std::vector<ClientState>& clients,
                                 std::span<const StreamSample* const> samples, std::uint64_t t,
                                 const SimulationSettings& settings, std::span<const RandomFeatureMap> maps,
                                 GradientStats& gradients) {
    if (samples.size() != clients.size()) throw std::invalid_argument("run_round: need one sample per client");
    if (maps.size() != server.lanes.size()) throw std::invalid_argument("run_round: kernel count mismatch");
    const Hyperparams hp = effective(settings);
    const auto participants = participants_at(settings, clients.size(), t);
    std::vector<char> participating(clients.size(), 0);
    for (std::size_t i : participants) {
        if (i >= clients.size()) throw std::invalid_argument("run_round: participant index out of range");
        participating[i] = 1;
    }

    std::vector<ClientOutcome> outcomes(clients.size());
    parallel_for(clients.size(), settings.threads, [&](std::size_t i) {
        const StreamSample& s = *samples[i];
        ClientState& client = clients[i];
        ClientOutcome& out = outcomes[i];
        out.row.t = t;
        out.row.client = static_cast<std::uint32_t>(i);
        out.row.y = s.y;
        out.row.participant = participating[i] != 0;

        std::vector<ComponentRecord> lane_records;
        lane_records.reserve(maps.size());
        std::vector<FeatureVector> zs;
        zs.reserve(maps.size());
        for (std::size_t k = 0; k < maps.size(); ++k) {
            if (s.x.size() != maps[k].input_dim()) {
                throw std::invalid_argument("run_round: client " + std::to_string(i) + " sample at step " +
                                            std::to_string(t) + " has " + std::to_string(s.x.size()) +
                                            " features, expected " + std::to_string(maps[k].input_dim()));
            }
            zs.push_back(maps[k].embed(s.x));
            lane_records.push_back(lane_step(client.lanes[k], server.lanes[k], zs.back(), s.y, t, i, settings, hp));
        }

        if (maps.size() == 1) {
            out.row.record = std::move(lane_records.front());
        } else {
            out.row.record = combine_records(client.kernel_weights, lane_records, s.y);
            std::vector<double> losses(lane_records.size());
            for (std::size_t k = 0; k < losses.size(); ++k) losses[k] = lane_records[k].loss_final.clipped;
            client.kernel_weights.update(losses);
            out.row.kernels = std::move(lane_records);
        }

        for (std::size_t k = 0; k < maps.size(); ++k) {
            KernelLaneState& lane = client.lanes[k];
            const ParameterVector& theta = server.lanes[k].theta;
            lane.buffer.push(std::move(zs[k]), s.y);
            out.gradients.max_local = std::max(out.gradients.max_local, max_gradient_norm(lane.phi, lane.buffer));
            lane.phi = minibatch_step(lane.phi, lane.buffer, hp.eta);
            if (!lane.phi.all_finite()) throw NumericError(t, "local model of client " + std::to_string(i));
            if (out.row.participant) {
                out.gradients.max_fed = std::max(out.gradients.max_fed, max_gradient_norm(theta, lane.buffer));
                out.psi.push_back(minibatch_step(theta, lane.buffer, hp.eta));
            }
        }
    });

    std::vector<LedgerRow> rows;
    rows.reserve(clients.size());
    for (auto& out : outcomes) {
        gradients.max_fed = std::max(gradients.max_fed, out.gradients.max_fed);
        gradients.max_local = std::max(gradients.max_local, out.gradients.max_local);
        rows.push_back(std::move(out.row));
    }

    for (std::size_t k = 0; k < server.lanes.size(); ++k) {
        auto& lane = server.lanes[k];
        if (lane.store.maybe_store(t, lane.theta)) {
            for (auto& c : clients) c.lanes[k].snapshot_w.append();
        }
        std::vector<ParameterVector> psi;
        psi.reserve(participants.size());
        for (std::size_t i : participants) psi.push_back(outcomes[i].psi[k]);
        lane.theta = federated_average(psi);
        if (!lane.theta.all_finite()) throw NumericError(t, "federated model");
    }
    return rows;
}

RunResult simulate(const SimulationSettings& settings, std::span<const RandomFeatureMap> maps,
                   const ClientStreams& streams, StepObserver* observer) {
    if (maps.empty()) throw std::invalid_argument("simulate: need at least one feature map");
    const Hyperparams hp = effective(settings);
    const std::size_t N = streams.num_clients();
    const std::uint64_t T = streams.horizon();

    RunResult result;
    result.ledger.num_clients = N;
    result.ledger.rows.reserve(N * T);
    result.store_size.reserve(T);
    ServerState server = make_server(maps, hp);
    std::vector<ClientState> clients = make_clients(N, maps, settings);

    std::vector<const StreamSample*> samples(N);
    for (std::uint64_t t = 1; t <= T; ++t) {
        if (observer) observer->on_step(t, server, clients);
        for (std::size_t i = 0; i < N; ++i) samples[i] = &streams.at(i, t);
        result.store_size.push_back(server.lanes.front().store.size());
        auto rows = run_round(server, clients, samples, t, settings, maps, result.gradients);
        for (auto& r : rows) result.ledger.rows.push_back(std::move(r));
    }

    if (maps.size() == 1) {
        const auto& store = server.lanes.front().store;
        for (const auto& snap : store.snapshots()) {
            result.backfill.created_at.push_back(snap.created_at);
            std::vector<LossPair> losses;
            losses.reserve(snap.created_at * N);
            for (std::uint64_t t = 1; t <= snap.created_at && t <= T; ++t) {
                for (std::size_t i = 0; i < N; ++i) {
                    const auto& s = streams.at(i, t);
                    losses.push_back(squared_loss(predict(snap.params, maps.front().embed(s.x)), s.y));
                }
            }
            result.backfill.losses.push_back(std::move(losses));
        }
    }
    result.final_server = std::move(server);
    return result;
}

}  // namespace fedpoe
