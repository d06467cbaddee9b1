#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fedpoe/bounds.hpp"
#include "fedpoe/hindsight.hpp"
#include "fedpoe/ledger.hpp"

namespace fedpoe {

struct ClientSummary {
    std::size_t client = 0;
    double mse = 0.0;
    std::optional<double> accuracy;  // classification only
    double loss_clipped = 0.0;       // cumulative
    double loss_raw = 0.0;
};

struct Aggregate {
    double mean = 0.0;
    double std = 0.0;  // population convention
};

struct SummaryRecord {
    std::vector<ClientSummary> clients;
    Aggregate mse;
    std::optional<Aggregate> accuracy;
    Aggregate loss_clipped;
    Aggregate loss_raw;

    std::optional<Regret> convex_regret;  // vs the best global parameter
    std::optional<Regret> personal_regret;  // vs each client's best parameter
    std::optional<Regret> finite_regret;  // vs h* over the finite set
    std::optional<RegretTrace> convex_trace;
    std::optional<RegretTrace> finite_trace;
    std::vector<BoundReport> bounds;
};

struct SummaryOptions {
    bool classification = false;
    const std::vector<LossPair>* convex_comparator = nullptr;    // theta* losses, row-aligned
    const std::vector<LossPair>* personal_comparator = nullptr;  // phi_i* losses, row-aligned
    const std::vector<LossPair>* finite_comparator = nullptr;    // h* losses, row-aligned
};

Aggregate aggregate(const std::vector<double>& values);

/// Throws std::invalid_argument on an empty ledger.
SummaryRecord summarize(const RegretLedger& ledger, const SummaryOptions& options = {});

/// Bound curves sampled at every t for the trace file; empty entries are
/// written as blank cells.
struct TraceBounds {
    std::vector<std::optional<double>> t1, t2, t3;
};

std::string ledger_to_jsonl(const RegretLedger& ledger);
RegretLedger ledger_from_jsonl(const std::string& text);

std::string trace_to_csv(const RegretTrace& trace, const TraceBounds& bounds);

/// Writes `text` to `path`, creating parent directories; IoError with the
/// path on failure.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace fedpoe
