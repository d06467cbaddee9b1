#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "fedpoe/model.hpp"

namespace fedpoe {

/// Append-only server-side store of federated parameter snapshots, written
/// every n steps up to step U.
class SnapshotStore {
public:
    struct Snapshot {
        ParameterVector params;
        std::uint64_t created_at = 0;
    };

    SnapshotStore(std::size_t n, std::size_t U);

    /// Stores a copy of theta when t <= U and t mod n == 0. Returns whether
    /// a snapshot was appended.
    bool maybe_store(std::uint64_t t, const ParameterVector& theta);

    /// Read-only views of the requested snapshots, keyed by index.
    std::map<std::size_t, const ParameterVector*> fetch(std::span<const std::size_t> indices) const;

    const ParameterVector& at(std::size_t j) const { return snapshots_.at(j).params; }
    const std::vector<Snapshot>& snapshots() const { return snapshots_; }
    std::size_t size() const { return snapshots_.size(); }
    bool empty() const { return snapshots_.empty(); }
    std::size_t n() const { return n_; }
    std::size_t U() const { return U_; }

    /// Binary checkpoint: header line "FPSNAP v1 <dim> <count>\n" followed by
    /// count arrays of dim little-endian float64 values.
    void save(const std::filesystem::path& path) const;
    static SnapshotStore load(const std::filesystem::path& path, std::size_t n, std::size_t U);

private:
    std::size_t n_;
    std::size_t U_;
    std::vector<Snapshot> snapshots_;
};

}  // namespace fedpoe
