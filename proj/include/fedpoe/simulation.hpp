#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fedpoe/data_streams.hpp"
#include "fedpoe/hedge.hpp"
#include "fedpoe/ledger.hpp"
#include "fedpoe/model.hpp"
#include "fedpoe/online_opt.hpp"
#include "fedpoe/snapshot_store.hpp"

namespace fedpoe {

/// Which prediction a client reports as its own.
enum class Mode {
    FedPoe,        // pair ensemble + snapshot ensemble
    EnsembleOnly,  // local/federated pair ensemble (M = 0, b = 1)
    FedOgd,        // federated model only
    LocalOgd,      // local model only
};

std::string_view to_string(Mode mode);
std::optional<Mode> parse_mode(std::string_view text);

struct SimulationSettings {
    Mode mode = Mode::FedPoe;
    Hyperparams hp;
    std::uint64_t seed = 0;
    /// Salt for the selection substreams only; every other draw ignores it.
    std::uint64_t selection_replicate = 0;
    double participation = 1.0;
    /// Fixed participant set; when non-empty it replaces `participation`.
    std::vector<std::size_t> participants;
    /// Multi-kernel hedge rate; eta_c when unset.
    std::optional<double> kernel_rate;
    std::size_t threads = 1;
};

/// One client's state for one kernel.
struct KernelLaneState {
    ParameterVector phi;
    HedgePair pair_lf;   // (federated, local) weights
    HedgePair pair_top;  // (pair ensemble, snapshot ensemble) weights
    SnapshotWeights snapshot_w;
    SampleBuffer buffer;
};

struct ClientState {
    std::vector<KernelLaneState> lanes;
    KernelWeights kernel_weights;
};

struct ServerState {
    struct Lane {
        ParameterVector theta;
        SnapshotStore store;
    };
    std::vector<Lane> lanes;
};

struct GradientStats {
    double max_fed = 0.0;    // largest per-sample gradient norm at theta_t
    double max_local = 0.0;  // largest per-sample gradient norm at phi
};

/// Called at the start of every step with theta_t and phi_t, before any
/// prediction is made.
class StepObserver {
public:
    virtual ~StepObserver() = default;
    virtual void on_step(std::uint64_t t, const ServerState& server, std::span<const ClientState> clients) = 0;
};

struct RunResult {
    RegretLedger ledger;
    SnapshotBackfill backfill;          // single-kernel runs only
    std::vector<std::size_t> store_size;  // |D_t| seen by step t, index t - 1
    GradientStats gradients;
    ServerState final_server;
};

ServerState make_server(std::span<const RandomFeatureMap> maps, const Hyperparams& hp);
std::vector<ClientState> make_clients(std::size_t num_clients, std::span<const RandomFeatureMap> maps,
                                      const SimulationSettings& settings);

/// Participants of step t, ascending.
std::vector<std::size_t> participants_at(const SimulationSettings& settings, std::size_t num_clients,
                                         std::uint64_t t);

/// One round of the federated protocol: every client predicts, observes
/// its label, updates its weights and local model, and (if participating)
/// sends its updated copy of theta_t; then the server snapshots theta_t if
/// due and averages. Returns one ledger row per client, in client order.
std::vector<LedgerRow> run_round(ServerState& server, std::vector<ClientState>& clients,
                                 std::span<const StreamSample* const> samples, std::uint64_t t,
                                 const SimulationSettings& settings, std::span<const RandomFeatureMap> maps,
                                 GradientStats& gradients);

/// Drives run_round for t = 1..T over the given streams.
RunResult simulate(const SimulationSettings& settings, std::span<const RandomFeatureMap> maps,
                   const ClientStreams& streams, StepObserver* observer = nullptr);

}  // namespace fedpoe
