#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fedpoe/data_streams.hpp"
#include "fedpoe/model.hpp"

using namespace fedpoe;

namespace {

std::filesystem::path write_file(const std::string& name, const std::string& text) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream(path, std::ios::binary | std::ios::trunc) << text;
    return path;
}

SynthParams params(std::size_t N, std::size_t T, std::size_t groups, double bias, double noise) {
    SynthParams p;
    p.num_clients = N;
    p.horizon = T;
    p.input_dim = 2;
    p.num_groups = groups;
    p.bias = bias;
    p.noise_sd = noise;
    p.seed = 31;
    return p;
}

}  // namespace

TEST_CASE("csv splitting handles quotes, doubled quotes and embedded newlines") {
    const auto rows = parse_csv("a,b,c\r\n1,\"x,y\",\"say \"\"hi\"\"\"\n2,\"line1\nline2\",\n");
    REQUIRE(rows.size() == 3);
    CHECK(rows[0] == std::vector<std::string>{"a", "b", "c"});
    CHECK(rows[1] == std::vector<std::string>{"1", "x,y", "say \"hi\""});
    CHECK(rows[2] == std::vector<std::string>{"2", "line1\nline2", ""});
    CHECK(parse_csv("h\n5").size() == 2);
}

TEST_CASE("group-bias manifest puts bias on the own group") {
    const auto m = PartitionManifest::group_bias(5, 4, 0.7);
    CHECK(m.groups == std::vector<std::size_t>{0, 1, 2, 3, 0});
    for (std::size_t g = 0; g < 4; ++g) {
        double sum = 0.0;
        for (std::size_t s = 0; s < 4; ++s) {
            sum += m.mixtures[g][s];
            CHECK(m.mixtures[g][s] == doctest::Approx(s == g ? 0.7 : 0.1));
        }
        CHECK(sum == doctest::Approx(1.0));
    }
    CHECK_NOTHROW(m.validate());
    CHECK_THROWS_AS(PartitionManifest::group_bias(3, 2, 0.0), std::invalid_argument);
}

TEST_CASE("manifest validation catches bad mixtures") {
    auto m = PartitionManifest::group_bias(2, 2, 0.6);
    m.mixtures[1] = {0.5, 0.6};
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
    m = PartitionManifest::group_bias(2, 2, 0.6);
    m.groups[1] = 5;
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
}

TEST_CASE("source frequencies follow the group mixtures") {
    const auto map = build_feature_map(4, 2, 8, 1.0);
    const auto streams = synth_group_bias(params(4, 20000, 2, 0.7, 0.0), map);
    for (std::size_t i = 0; i < 4; ++i) {
        std::size_t own = 0;
        for (const auto& s : streams.clients[i]) own += s.source == i % 2;
        CHECK(std::abs(static_cast<double>(own) / 20000.0 - 0.7) < 0.02);
    }
}

TEST_CASE("synthetic labels are normalized and noiseless labels are exact") {
    const auto map = build_feature_map(4, 2, 8, 1.0);
    const auto streams = synth_group_bias(params(3, 200, 3, 0.5, 0.0), map);
    REQUIRE(streams.num_clients() == 3);
    REQUIRE(streams.horizon() == 200);
    REQUIRE(streams.group_params.size() == 3);
    const auto& norm = streams.label_norm;
    CHECK(norm.lo <= 0.0);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::uint64_t t = 1; t <= 200; ++t) {
            const auto& s = streams.at(i, t);
            CHECK(s.t == t);
            CHECK(s.client == i);
            CHECK(s.y >= 0.0);
            CHECK(s.y <= 1.0);
            const double raw = predict(streams.group_params[s.source], embed(map, s.x));
            CHECK(std::abs(s.y * (norm.hi - norm.lo) + norm.lo - raw) < 1e-12);
        }
    }
}

TEST_CASE("synthetic streams are a pure function of the seed") {
    const auto map = build_feature_map(4, 2, 8, 1.0);
    const auto a = synth_group_bias(params(3, 50, 2, 0.8, 0.1), map);
    const auto b = synth_group_bias(params(3, 50, 2, 0.8, 0.1), map);
    CHECK(a.clients == b.clients);
    auto p = params(3, 50, 2, 0.8, 0.1);
    p.seed = 32;
    CHECK(synth_group_bias(p, map).clients != a.clients);
}

TEST_CASE("the first clients' streams do not depend on how many clients exist") {
    const auto map = build_feature_map(4, 2, 8, 1.0);
    const auto small = synth_group_bias(params(2, 40, 2, 0.8, 0.1), map);
    const auto large = synth_group_bias(params(4, 40, 2, 0.8, 0.1), map);
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::uint64_t t = 1; t <= 40; ++t) {
            CHECK(small.at(i, t).x == large.at(i, t).x);
            CHECK(small.at(i, t).source == large.at(i, t).source);
        }
    }
}

TEST_CASE("drift switches the mixtures at the given step") {
    const auto map = build_feature_map(4, 2, 8, 1.0);
    const std::vector<std::vector<double>> pre{{1.0, 0.0}, {0.0, 1.0}};
    const std::vector<std::vector<double>> post{{0.0, 1.0}, {1.0, 0.0}};
    const auto streams = synth_drift(params(2, 100, 2, 1.0, 0.0), 60, pre, post, map);
    for (std::uint64_t t = 1; t <= 100; ++t) {
        CHECK(streams.at(0, t).source == (t < 60 ? 0u : 1u));
        CHECK(streams.at(1, t).source == (t < 60 ? 1u : 0u));
    }
    const auto reversed = synth_drift(params(2, 100, 2, 1.0, 0.0), 60, pre, {}, map);
    CHECK(reversed.at(0, 80).source == 1u);
    CHECK_THROWS_AS(synth_drift(params(2, 100, 2, 1.0, 0.0), 101, pre, post, map), std::invalid_argument);
}

TEST_CASE("csv rows are normalized and dealt to clients in file order") {
    const auto path = write_file("fedpoe_plain.csv", "x1,y,x2\n0,10,5\n1,20,5\n2,30,15\n3,40,25\n");
    CsvOptions opt;
    opt.label_column = "y";
    opt.horizon = 2;
    const auto streams = load_csv(path, opt, PartitionManifest::group_bias(2, 1, 1.0));
    CHECK(streams.feature_names == std::vector<std::string>{"x1", "x2"});
    REQUIRE(streams.num_clients() == 2);
    CHECK(streams.at(0, 1).x == std::vector<double>{0.0, 0.0});
    CHECK(streams.at(1, 1).x[0] == doctest::Approx(1.0 / 3.0));
    CHECK(streams.at(0, 2).y == doctest::Approx(2.0 / 3.0));
    CHECK(streams.at(1, 2).x == std::vector<double>{1.0, 1.0});
    CHECK(streams.at(1, 2).y == 1.0);
    opt.horizon = 3;
    CHECK_THROWS_AS(load_csv(path, opt, PartitionManifest::group_bias(2, 1, 1.0)), std::invalid_argument);
    std::filesystem::remove(path);
}

TEST_CASE("csv groups come from the group column") {
    const auto path = write_file("fedpoe_groups.csv", "site,x,y\nb,1,1\na,2,2\nb,3,3\na,4,4\nb,5,5\na,6,6\n");
    CsvOptions opt;
    opt.label_column = "y";
    opt.group_column = "site";
    opt.horizon = 3;
    const auto streams = load_csv(path, opt, PartitionManifest::group_bias(2, 2, 1.0));
    for (std::uint64_t t = 1; t <= 3; ++t) {
        CHECK(streams.at(0, t).source == 0u);  // "a"
        CHECK(streams.at(1, t).source == 1u);  // "b"
    }
    CHECK(streams.at(0, 1).x[0] == doctest::Approx(0.2));
    CHECK_THROWS_AS(load_csv(path, opt, PartitionManifest::group_bias(2, 3, 0.5)), std::invalid_argument);
    std::filesystem::remove(path);
}

TEST_CASE("malformed csv input is reported") {
    CsvOptions opt;
    opt.label_column = "y";
    opt.horizon = 1;
    const auto m = PartitionManifest::group_bias(1, 1, 1.0);
    auto path = write_file("fedpoe_bad1.csv", "x,y\n1\n");
    CHECK_THROWS_AS(load_csv(path, opt, m), std::invalid_argument);
    path = write_file("fedpoe_bad2.csv", "x,y\nabc,1\n");
    CHECK_THROWS_AS(load_csv(path, opt, m), std::invalid_argument);
    path = write_file("fedpoe_bad3.csv", "x,z\n1,1\n");
    CHECK_THROWS_AS(load_csv(path, opt, m), std::invalid_argument);
    CHECK_THROWS(load_csv(std::filesystem::temp_directory_path() / "fedpoe_missing.csv", opt, m));
}

TEST_CASE("stream cache round-trip") {
    const auto map = build_feature_map(4, 2, 8, 1.0);
    const auto streams = synth_group_bias(params(3, 25, 2, 0.8, 0.1), map);
    const auto path = std::filesystem::temp_directory_path() / "fedpoe_cache.jsonl";
    write_stream_cache(streams, path);
    const auto back = read_stream_cache(path);
    CHECK(back.clients == streams.clients);
    std::filesystem::remove(path);
}
