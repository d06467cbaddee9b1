#include <doctest.h>

#include <stdexcept>

#include <filesystem>
#include <fstream>
#include <vector>

#include "fedpoe/errors.hpp"
#include "fedpoe/snapshot_store.hpp"

using namespace fedpoe;

TEST_CASE("snapshots are stored every n steps up to U") {
    SnapshotStore store(3, 10);
    std::vector<std::uint64_t> stored;
    for (std::uint64_t t = 1; t <= 20; ++t) {
        if (store.maybe_store(t, ParameterVector({static_cast<double>(t), 0.0}))) stored.push_back(t);
    }
    CHECK(stored == std::vector<std::uint64_t>{3, 6, 9});
    REQUIRE(store.size() == 3);
    CHECK(store.at(1)[0] == 6.0);
    CHECK(store.snapshots()[2].created_at == 9);
}

TEST_CASE("stored snapshots are copies") {
    SnapshotStore store(1, 5);
    ParameterVector theta({1.0});
    store.maybe_store(1, theta);
    theta[0] = 2.0;
    CHECK(store.at(0)[0] == 1.0);
}

TEST_CASE("fetch returns the requested views and rejects unknown indices") {
    SnapshotStore store(1, 3);
    for (std::uint64_t t = 1; t <= 3; ++t) store.maybe_store(t, ParameterVector({static_cast<double>(t)}));
    const std::vector<std::size_t> idx{2, 0};
    const auto views = store.fetch(idx);
    CHECK(views.size() == 2);
    CHECK((*views.at(2))[0] == 3.0);
    CHECK_THROWS_AS(store.fetch(std::vector<std::size_t>{3}), std::out_of_range);
}

TEST_CASE("invalid use is rejected") {
    CHECK_THROWS_AS(SnapshotStore(0, 5), std::invalid_argument);
    SnapshotStore store(1, 5);
    CHECK_THROWS_AS(store.maybe_store(0, ParameterVector({1.0})), std::invalid_argument);
    store.maybe_store(1, ParameterVector({1.0}));
    CHECK_THROWS_AS(store.maybe_store(2, ParameterVector({1.0, 2.0})), std::invalid_argument);
}

TEST_CASE("checkpoint round-trip is exact") {
    SnapshotStore store(2, 8);
    for (std::uint64_t t = 1; t <= 8; ++t) {
        store.maybe_store(t, ParameterVector({0.1 * static_cast<double>(t), -1.0 / 3.0, 1e-300}));
    }
    const auto path = std::filesystem::temp_directory_path() / "fedpoe_test_snapshots.bin";
    store.save(path);
    const auto loaded = SnapshotStore::load(path, 2, 8);
    REQUIRE(loaded.size() == store.size());
    for (std::size_t j = 0; j < store.size(); ++j) {
        CHECK(loaded.at(j) == store.at(j));
        CHECK(loaded.snapshots()[j].created_at == store.snapshots()[j].created_at);
    }
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << "FPSNAP v1 3 4\n";
    }
    CHECK_THROWS_AS(SnapshotStore::load(path, 2, 8), IoError);
    std::filesystem::remove(path);
}
