#include <doctest.h>

#include <algorithm>
#include <string>

#include <json.hpp>

#include "fedpoe/config.hpp"
#include "fedpoe/errors.hpp"
#include "fedpoe/experiment.hpp"

using namespace fedpoe;

namespace {

std::string small_config(const std::string& mode, const std::string& extra_data = "",
                         const std::string& federation = "  clients: 3\n  horizon: 80\n",
                         const std::string& model = "  features: 12\n") {
    return "schema: 1\nexperiment: small\nseed: 4\nmode: " + mode +
           "\ndata:\n  source: synthetic-bias\n  input_dim: 2\n  num_groups: 2\n  bias: 0.8\n  noise_sd: 0.05\n" +
           extra_data + "federation:\n" + federation +
           "hyperparams:\n  eta: 1/sqrt(T)\n  eta_c: 1/sqrt(T)\n  b: 2\n  M: 2\n  n: 10\n  U: 60\nmodel:\n" + model +
           "verify:\n  selection_replicates: 3\n";
}

bool has_note(const ExperimentResult& r, const std::string& fragment) {
    return std::any_of(r.notes.begin(), r.notes.end(),
                       [&](const std::string& n) { return n.find(fragment) != std::string::npos; });
}

std::size_t count_bounds(const ExperimentResult& r, BoundId id) {
    return static_cast<std::size_t>(std::count_if(r.summary->bounds.begin(), r.summary->bounds.end(),
                                                  [&](const BoundReport& b) { return b.id == id; }));
}

}  // namespace

TEST_CASE("fed-poe reports expected regret and the snapshot bounds") {
    const auto r = run_experiment(parse_config(small_config("fed-poe")));
    REQUIRE(r.summary);
    REQUIRE(r.oracle);
    CHECK(r.oracle->convex.global.converged);
    REQUIRE(r.expected);
    CHECK(r.expected->replicates == 3);
    CHECK(count_bounds(r, BoundId::T3Global) == 1);
    CHECK(count_bounds(r, BoundId::T3Personal) == 3);
    CHECK(count_bounds(r, BoundId::T1) == 0);
    CHECK(r.violated_bounds() == 0);
    CHECK(r.G_measured);
    CHECK(r.G_fed > 0.0);
}

TEST_CASE("bound families follow the mode") {
    auto r = run_experiment(parse_config(small_config("fed-ogd")));
    CHECK(count_bounds(r, BoundId::T1) == 1);
    CHECK(r.summary->bounds.size() == 1);
    r = run_experiment(parse_config(small_config("ensemble-only")));
    CHECK(count_bounds(r, BoundId::T2Global) == 1);
    CHECK(count_bounds(r, BoundId::T2Personal) == 3);
    r = run_experiment(parse_config(small_config("local-ogd")));
    CHECK(count_bounds(r, BoundId::LPersonal) == 3);
    CHECK(r.summary->bounds.size() == 3);
}

TEST_CASE("partial participation drops the global convex bounds with a note") {
    const auto r = run_experiment(
        parse_config(small_config("fed-ogd", "", "  clients: 4\n  horizon: 60\n  participation: 0.5\n")));
    CHECK(r.summary->bounds.empty());
    CHECK(has_note(r, "partial participation"));
}

TEST_CASE("several kernels run without bounds or the finite-set comparator") {
    const auto r = run_experiment(parse_config(small_config("fed-poe", "", "  clients: 3\n  horizon: 80\n",
                                                            "  features: 12\n  bandwidths: [0.5, 2]\n")));
    REQUIRE(r.summary);
    CHECK(r.summary->bounds.empty());
    REQUIRE(r.oracle);
    CHECK_FALSE(r.oracle->finite);
    CHECK(has_note(r, "several kernels"));
    CHECK(r.run.ledger.rows.front().kernels.size() == 2);
}

TEST_CASE("a configured G below the observed gradients is flagged") {
    auto text = small_config("fed-ogd");
    text.replace(text.find("  b: 2"), 6, "  G: 0.001\n  b: 2");
    const auto r = run_experiment(parse_config(text));
    CHECK_FALSE(r.G_measured);
    CHECK(r.G_fed == 0.001);
    CHECK(has_note(r, "configured G"));
}

TEST_CASE("a zero horizon yields an empty run") {
    const auto r = run_experiment(parse_config(small_config("fed-poe", "", "  clients: 3\n  horizon: 0\n")));
    CHECK(r.run.ledger.empty());
    CHECK_FALSE(r.summary);
    const auto j = nlohmann::json::parse(summary_json(r));
    CHECK(j["horizon"] == 0);
}

TEST_CASE("a single client's global and personal comparators coincide") {
    const auto r = run_experiment(parse_config(small_config("fed-ogd", "", "  clients: 1\n  horizon: 80\n")));
    REQUIRE(r.oracle);
    const auto& g = r.oracle->convex.global.theta.values();
    const auto& p = r.oracle->convex.personal.at(0).theta.values();
    for (std::size_t k = 0; k < g.size(); ++k) CHECK(g[k] == doctest::Approx(p[k]).epsilon(1e-9));
}

TEST_CASE("noiseless single-source streams report the recovery distance") {
    const auto text = "schema: 1\nexperiment: exact\nseed: 8\nmode: fed-ogd\n"
                      "data:\n  source: synthetic-bias\n  input_dim: 2\n  num_groups: 1\n  noise_sd: 0\n"
                      "federation:\n  clients: 2\n  horizon: 100\n"
                      "hyperparams:\n  eta: 0.5\nmodel:\n  features: 6\n";
    const auto r = run_experiment(parse_config(text));
    REQUIRE(r.oracle);
    if (r.streams.label_norm.lo == 0.0) {
        REQUIRE(r.oracle->theta_true_distance);
        CHECK(*r.oracle->theta_true_distance < 1e-6);
    } else {
        CHECK_FALSE(r.oracle->theta_true_distance);
    }
}

TEST_CASE("summary JSON carries the documented keys") {
    const auto r = run_experiment(parse_config(small_config("fed-poe")));
    const auto j = nlohmann::json::parse(summary_json(r));
    for (const char* key : {"schema", "experiment", "mode", "seed", "clients", "horizon", "features", "bandwidths",
                            "hyperparams", "gradient_bound", "aggregate", "regret", "bounds", "expected_regret"}) {
        CHECK_MESSAGE(j.contains(key), key);
    }
    CHECK(j["aggregate"]["std_convention"] == "population");
    CHECK(j["clients"].size() == 3);
    const auto o = nlohmann::json::parse(oracle_json(r));
    CHECK(o["theta_star"]["converged"] == true);
    CHECK(o["phi_star"].size() == 3);
    const auto digest = report_from_summary(summary_json(r));
    CHECK(digest.find("MSE") != std::string::npos);
}

TEST_CASE("trace CSV has one row per step") {
    const auto r = run_experiment(parse_config(small_config("fed-ogd")));
    const auto csv = trace_csv(r);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 81);
}

TEST_CASE("a diverging step size raises a numeric error") {
    auto text = small_config("fed-ogd", "", "  clients: 2\n  horizon: 2000\n");
    text.replace(text.find("eta: 1/sqrt(T)"), 14, "eta: 100");
    CHECK_THROWS_AS(run_experiment(parse_config(text)), NumericError);
}
