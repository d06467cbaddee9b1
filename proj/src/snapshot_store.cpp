#include "fedpoe/snapshot_store.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "fedpoe/errors.hpp"

namespace fedpoe {

namespace {

void put_le(std::ostream& os, double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
    os.write(buf, 8);
}

double get_le(std::istream& is) {
    unsigned char buf[8];
    is.read(reinterpret_cast<char*>(buf), 8);
    if (!is) throw IoError("snapshot checkpoint truncated");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

}  // namespace

SnapshotStore::SnapshotStore(std::size_t n, std::size_t U) : n_(n), U_(U) {
    if (n == 0) throw std::invalid_argument("SnapshotStore: n must be positive");
}

bool SnapshotStore::maybe_store(std::uint64_t t, const ParameterVector& theta) {
    if (t == 0) throw std::invalid_argument("SnapshotStore::maybe_store: steps are 1-based");
    if (t > U_ || t % n_ != 0) return false;
    if (!snapshots_.empty() && snapshots_.front().params.size() != theta.size()) {
        throw std::invalid_argument("SnapshotStore::maybe_store: dimension mismatch");
    }
    snapshots_.push_back(Snapshot{theta, t});
    return true;
}

std::map<std::size_t, const ParameterVector*> SnapshotStore::fetch(std::span<const std::size_t> indices) const {
    std::map<std::size_t, const ParameterVector*> out;
    for (std::size_t j : indices) {
        if (j >= snapshots_.size()) {
            throw std::out_of_range("SnapshotStore::fetch: index " + std::to_string(j) + " >= " +
                                    std::to_string(snapshots_.size()));
        }
        out.emplace(j, &snapshots_[j].params);
    }
    return out;
}

void SnapshotStore::save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    const std::size_t dim = snapshots_.empty() ? 0 : snapshots_.front().params.size();
    os << "FPSNAP v1 " << dim << ' ' << snapshots_.size() << '\n';
    for (const auto& s : snapshots_) {
        for (double v : s.params.values()) put_le(os, v);
    }
    if (!os) throw IoError("failed writing " + path.string());
}

SnapshotStore SnapshotStore::load(const std::filesystem::path& path, std::size_t n, std::size_t U) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    std::string header;
    if (!std::getline(is, header)) throw IoError(path.string() + ": missing header");
    std::istringstream hs(header);
    std::string magic, version;
    std::size_t dim = 0, count = 0;
    if (!(hs >> magic >> version >> dim >> count) || magic != "FPSNAP" || version != "v1") {
        throw IoError(path.string() + ": bad header '" + header + "'");
    }
    SnapshotStore store(n, U);
    for (std::size_t j = 0; j < count; ++j) {
        std::vector<double> values(dim);
        for (double& v : values) v = get_le(is);
        store.snapshots_.push_back(Snapshot{ParameterVector(std::move(values)), (j + 1) * n});
    }
    return store;
}

}  // namespace fedpoe
