#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "fedpoe/model.hpp"

namespace fedpoe {

/// Predictions and losses of every component model for one client at one
/// step. In multi-kernel mode one of these exists per kernel, and the
/// row-level record holds the kernel-weighted combination.
struct ComponentRecord {
    double pred_final = 0.0;
    double pred_pair = 0.0;   // local/federated ensemble
    double pred_local = 0.0;
    double pred_fed = 0.0;
    std::optional<double> pred_snap;  // snapshot ensemble, when formed

    LossPair loss_final;
    LossPair loss_pair;
    LossPair loss_local;
    LossPair loss_fed;
    std::optional<LossPair> loss_snap;

    /// Losses of every snapshot available at this step (selected or not).
    std::vector<LossPair> snapshot_losses;
    std::vector<std::size_t> selected;

    friend bool operator==(const ComponentRecord&, const ComponentRecord&) = default;
};

struct LedgerRow {
    std::uint64_t t = 0;
    std::uint32_t client = 0;
    double y = 0.0;
    bool participant = true;
    ComponentRecord record;
    std::vector<ComponentRecord> kernels;  // multi-kernel mode only

    friend bool operator==(const LedgerRow&, const LedgerRow&) = default;
};

/// Rows ordered by (t, client); exactly one row per pair.
struct RegretLedger {
    std::size_t num_clients = 0;
    std::vector<LedgerRow> rows;

    std::size_t horizon() const { return num_clients == 0 ? 0 : rows.size() / num_clients; }
    const LedgerRow& row(std::uint64_t t, std::size_t client) const { return rows[(t - 1) * num_clients + client]; }
    bool empty() const { return rows.empty(); }

    friend bool operator==(const RegretLedger&, const RegretLedger&) = default;
};

/// Losses of each final snapshot at the steps before it was available
/// (t <= creation step), evaluated in hindsight once the run is over. Entry
/// [j][(t - 1) * N + i] for t in 1..created_at(j).
struct SnapshotBackfill {
    std::vector<std::uint64_t> created_at;
    std::vector<std::vector<LossPair>> losses;

    std::size_t size() const { return created_at.size(); }
};

}  // namespace fedpoe
