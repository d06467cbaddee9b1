#include "fedpoe/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "fedpoe/errors.hpp"
#include "fedpoe/rng.hpp"
#include "json_util.hpp"

namespace fedpoe {

using detail::Json;

std::vector<RandomFeatureMap> build_maps(const RunConfig& config, std::size_t input_dim) {
    std::vector<RandomFeatureMap> maps;
    for (std::size_t k = 0; k < config.model.bandwidths.size(); ++k) {
        const std::uint64_t seed =
            k == 0 ? config.seed : Stream::derive(config.seed, StreamPurpose::FeatureMap, {k}).key();
        maps.push_back(RandomFeatureMap::build(seed, input_dim, config.model.features, config.model.bandwidths[k]));
    }
    return maps;
}

ClientStreams build_streams(const RunConfig& config, const RandomFeatureMap* generator) {
    const auto& d = config.data;
    const std::size_t N = config.federation.clients;
    const std::size_t T = config.federation.horizon;
    if (d.source == DataSource::Csv) {
        std::filesystem::path path = d.path;
        if (path.is_relative() && !config.base_dir.empty()) path = config.base_dir / path;
        PartitionManifest manifest = PartitionManifest::group_bias(N, d.num_groups, d.bias);
        if (!d.mixtures.empty()) manifest.mixtures = d.mixtures;
        ClientStreams streams;
        try {
            streams = load_csv(path, CsvOptions{d.label_column, d.group_column, T, config.seed}, manifest);
        } catch (const std::invalid_argument& e) {
            throw ConfigError({"data.path: " + std::string(e.what())});
        }
        if (d.classification) {
            for (const auto& client : streams.clients) {
                for (const auto& s : client) {
                    if (s.y != 0.0 && s.y != 1.0) {
                        throw ConfigError({"data.task: classification needs binary labels in column '" +
                                           d.label_column + "'"});
                    }
                }
            }
        }
        return streams;
    }
    if (!generator) throw std::invalid_argument("build_streams: synthetic data needs a generator map");
    SynthParams p;
    p.num_clients = N;
    p.horizon = T;
    p.input_dim = d.input_dim;
    p.num_groups = d.num_groups;
    p.bias = d.bias;
    p.noise_sd = d.noise_sd;
    p.seed = config.seed;
    p.group_noise_sd = d.group_noise_sd;
    p.group_heterogeneity = d.group_heterogeneity;
    p.centers_per_group = d.centers_per_group;
    if (d.source == DataSource::SyntheticDrift) {
        auto pre = d.pre.empty() ? PartitionManifest::group_bias(N, d.num_groups, d.bias).mixtures : d.pre;
        return synth_drift(p, d.switch_at, pre, d.post, *generator);
    }
    return synth_group_bias(p, *generator);
}

std::size_t ExperimentResult::violated_bounds() const {
    if (!summary) return 0;
    return static_cast<std::size_t>(
        std::count_if(summary->bounds.begin(), summary->bounds.end(), [](const auto& b) { return !b.satisfied; }));
}

namespace {

double total_raw(const std::vector<LossPair>& losses) {
    double s = 0.0;
    for (const auto& l : losses) s += l.raw;
    return s;
}

double distance(const ParameterVector& a, const ParameterVector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

OracleArtifacts compute_oracles(const ExperimentResult& r) {
    const auto& streams = r.streams;
    const std::size_t N = streams.num_clients();
    const std::size_t T = streams.horizon();
    const double tol = r.config.verify.oracle_tolerance;
    OracleArtifacts o;

    // One convex solve per kernel; the best kernel supplies the comparator.
    std::vector<ConvexOracle> per_kernel;
    std::vector<std::vector<LossPair>> global_losses, personal_losses;
    for (const auto& map : r.maps) {
        per_kernel.push_back(hindsight_convex(streams, map, tol));
        global_losses.push_back(comparator_losses(streams, map, per_kernel.back().global.theta));
        personal_losses.push_back(personal_comparator_losses(streams, map, per_kernel.back().personal));
    }
    for (std::size_t k = 1; k < r.maps.size(); ++k) {
        if (total_raw(global_losses[k]) < total_raw(global_losses[o.kernel])) o.kernel = k;
    }
    o.convex.global = per_kernel[o.kernel].global;
    o.global_losses = global_losses[o.kernel];
    o.personal_kernel.assign(N, 0);
    o.personal_losses.resize(N * T);
    for (std::size_t i = 0; i < N; ++i) {
        auto client_total = [&](std::size_t k) {
            double s = 0.0;
            for (std::size_t t = 0; t < T; ++t) s += personal_losses[k][t * N + i].raw;
            return s;
        };
        for (std::size_t k = 1; k < r.maps.size(); ++k) {
            if (client_total(k) < client_total(o.personal_kernel[i])) o.personal_kernel[i] = k;
        }
        const std::size_t k = o.personal_kernel[i];
        o.convex.personal.push_back(per_kernel[k].personal[i]);
        for (std::size_t t = 0; t < T; ++t) o.personal_losses[t * N + i] = personal_losses[k][t * N + i];
    }

    if (r.maps.size() == 1) {
        o.finite = hindsight_over_H(r.run.ledger, r.run.backfill);
        o.finite_losses = o.finite->candidate_losses(o.finite->best);
        o.finite_personal_losses.resize(N * T);
        std::vector<std::vector<LossPair>> cache(o.finite->names.size());
        for (std::size_t i = 0; i < N; ++i) {
            const std::size_t k = o.finite->best_per_client[i];
            if (cache[k].empty()) cache[k] = o.finite->candidate_losses(k);
            for (std::size_t t = 0; t < T; ++t) o.finite_personal_losses[t * N + i] = cache[k][t * N + i];
        }

        // Exact recovery targets exist when the labels are a pure rescaling
        // of a noiseless group function.
        const auto& d = r.config.data;
        bool noiseless = d.source != DataSource::Csv;
        if (d.group_noise_sd.empty()) noiseless = noiseless && d.noise_sd == 0.0;
        for (double sd : d.group_noise_sd) noiseless = noiseless && sd == 0.0;
        const MinMax& norm = streams.label_norm;
        if (noiseless && norm.lo == 0.0 && norm.hi > 0.0 && !streams.group_params.empty()) {
            auto scaled = [&](std::size_t g) {
                std::vector<double> v(streams.group_params[g].values().begin(), streams.group_params[g].values().end());
                for (double& x : v) x /= norm.hi;
                return ParameterVector(std::move(v));
            };
            auto single_source = [&](auto&& rows) -> std::optional<std::uint32_t> {
                std::optional<std::uint32_t> src;
                for (const StreamSample* s : rows) {
                    if (src && *src != s->source) return std::nullopt;
                    src = s->source;
                }
                return src;
            };
            std::vector<const StreamSample*> all;
            o.phi_true_distance.assign(N, std::nullopt);
            for (std::size_t i = 0; i < N; ++i) {
                std::vector<const StreamSample*> mine;
                for (const auto& s : streams.clients[i]) {
                    mine.push_back(&s);
                    all.push_back(&s);
                }
                if (auto g = single_source(mine)) {
                    o.phi_true_distance[i] = distance(o.convex.personal[i].theta, scaled(*g));
                }
            }
            if (auto g = single_source(all)) o.theta_true_distance = distance(o.convex.global.theta, scaled(*g));
        }
    }
    return o;
}

BoundParams base_params(const ExperimentResult& r) {
    BoundParams p;
    p.eta = r.hp.eta;
    p.eta_c = r.hp.eta_c;
    p.T = static_cast<double>(r.streams.horizon());
    p.n = static_cast<double>(r.hp.n);
    p.U = static_cast<double>(r.hp.U);
    p.D = static_cast<double>(r.run.final_server.lanes.front().store.size());
    return p;
}

ExpectedRegret expected_regret(const ExperimentResult& r) {
    const OracleArtifacts& o = *r.oracle;
    ExpectedRegret e;
    e.replicates = r.config.verify.selection_replicates;
    const std::size_t N = r.streams.num_clients();
    auto accumulate = [&](const RegretLedger& ledger) {
        const Regret g = compute_regret(ledger, o.finite_losses);
        const Regret p = compute_regret(ledger, o.finite_personal_losses);
        e.finite.global_clipped += g.global_clipped;
        e.finite.global_raw += g.global_raw;
        for (std::size_t i = 0; i < N; ++i) {
            e.finite.client_clipped[i] += p.client_clipped[i];
            e.finite.client_raw[i] += p.client_raw[i];
        }
    };
    e.finite.client_clipped.assign(N, 0.0);
    e.finite.client_raw.assign(N, 0.0);
    accumulate(r.run.ledger);
    for (std::size_t rep = 1; rep < e.replicates; ++rep) {
        const RunResult run = simulate(r.config.settings(rep), r.maps, r.streams);
        accumulate(run.ledger);
    }
    const double inv = 1.0 / static_cast<double>(e.replicates);
    e.finite.global_clipped *= inv;
    e.finite.global_raw *= inv;
    for (std::size_t i = 0; i < N; ++i) {
        e.finite.client_clipped[i] *= inv;
        e.finite.client_raw[i] *= inv;
    }
    return e;
}

std::vector<BoundReport> compute_bounds(ExperimentResult& r) {
    std::vector<BoundReport> out;
    if (r.maps.size() != 1) {
        r.notes.push_back("bounds not applicable with several kernels");
        return out;
    }
    const OracleArtifacts& o = *r.oracle;
    const SummaryRecord& s = *r.summary;
    const std::size_t N = r.streams.num_clients();
    const bool full = participants_at(r.config.settings(), N, 1).size() == N;
    const BoundParams base = base_params(r);

    auto global_params = [&]() {
        BoundParams p = base;
        p.G = r.G_fed;
        p.comparator_norm = o.convex.global.theta.norm();
        return p;
    };
    auto personal_params = [&](std::size_t i) {
        BoundParams p = base;
        p.G = r.G_local;
        p.comparator_norm = o.convex.personal[i].theta.norm();
        return p;
    };

    switch (r.config.mode) {
        case Mode::FedOgd:
            if (full) {
                out.push_back(make_report(BoundId::T1, std::nullopt, global_params(), s.convex_regret->global_clipped,
                                          s.convex_regret->global_raw));
            } else {
                r.notes.push_back("T1 not applicable under partial participation");
            }
            break;
        case Mode::EnsembleOnly:
            if (full) {
                out.push_back(make_report(BoundId::T2Global, std::nullopt, global_params(),
                                          s.convex_regret->global_clipped, s.convex_regret->global_raw));
            } else {
                r.notes.push_back("T2-global not applicable under partial participation");
            }
            for (std::size_t i = 0; i < N; ++i) {
                out.push_back(make_report(BoundId::T2Personal, i, personal_params(i),
                                          s.personal_regret->client_clipped[i], s.personal_regret->client_raw[i]));
            }
            break;
        case Mode::LocalOgd:
            for (std::size_t i = 0; i < N; ++i) {
                out.push_back(make_report(BoundId::LPersonal, i, personal_params(i),
                                          s.personal_regret->client_clipped[i], s.personal_regret->client_raw[i]));
            }
            break;
        case Mode::FedPoe: {
            if (r.hp.M == 0 || !base.D || *base.D < 2.0) {
                r.notes.push_back("T3 not applicable: needs M >= 1 and at least two stored snapshots");
                break;
            }
            r.expected = expected_regret(r);
            BoundParams p = base;
            p.G.reset();
            out.push_back(make_report(BoundId::T3Global, std::nullopt, p, r.expected->finite.global_clipped,
                                      r.expected->finite.global_raw));
            for (std::size_t i = 0; i < N; ++i) {
                out.push_back(make_report(BoundId::T3Personal, i, p, r.expected->finite.client_clipped[i],
                                          r.expected->finite.client_raw[i]));
            }
            break;
        }
    }
    return out;
}

}  // namespace

ExperimentResult run_experiment(const RunConfig& config, const ExperimentOptions& options) {
    validate(config);
    ExperimentResult r;
    r.config = config;
    r.hp = config.resolved_hyperparams();
    if (config.data.source == DataSource::Csv) {
        r.streams = build_streams(config, nullptr);
        r.maps = build_maps(config, r.streams.input_dim);
    } else {
        r.maps = build_maps(config, config.data.input_dim);
        r.streams = build_streams(config, &r.maps.front());
    }

    r.run = simulate(config.settings(0), r.maps, r.streams);
    if (r.hp.G) {
        r.G_fed = r.G_local = *r.hp.G;
        r.G_measured = false;
        const double seen = std::max(r.run.gradients.max_fed, r.run.gradients.max_local);
        if (seen > *r.hp.G) {
            std::ostringstream os;
            os << "configured G = " << *r.hp.G << " is below the largest observed gradient norm " << seen
               << "; bounds computed with it carry no guarantee";
            r.notes.push_back(os.str());
        }
    } else {
        r.G_fed = r.run.gradients.max_fed;
        r.G_local = r.run.gradients.max_local;
    }
    if (r.streams.horizon() == 0) return r;

    SummaryOptions so;
    so.classification = config.data.classification;
    if (options.oracles) {
        r.oracle = compute_oracles(r);
        const auto& o = *r.oracle;
        if (!o.convex.global.converged) {
            std::ostringstream os;
            os << "best global parameter: solver stopped at gradient norm " << o.convex.global.gradient_norm
               << " after " << o.convex.global.iterations << " refinement passes";
            r.notes.push_back(os.str());
        }
        for (std::size_t i = 0; i < o.convex.personal.size(); ++i) {
            if (!o.convex.personal[i].converged) {
                std::ostringstream os;
                os << "best parameter of client " << i << ": solver stopped at gradient norm "
                   << o.convex.personal[i].gradient_norm << " after " << o.convex.personal[i].iterations
                   << " refinement passes";
                r.notes.push_back(os.str());
            }
        }
        so.convex_comparator = &o.global_losses;
        so.personal_comparator = &o.personal_losses;
        if (o.finite) so.finite_comparator = &o.finite_losses;
    }
    r.summary = summarize(r.run.ledger, so);
    if (options.oracles && options.bounds) r.summary->bounds = compute_bounds(r);
    return r;
}

TraceBounds trace_bounds(const ExperimentResult& r) {
    TraceBounds tb;
    const std::size_t T = r.streams.horizon();
    if (!r.oracle || r.maps.size() != 1) return tb;
    BoundParams p = base_params(r);
    p.G = r.G_fed;
    p.comparator_norm = r.oracle->convex.global.theta.norm();
    const bool t3 = p.D && *p.D >= 2.0;
    tb.t1.resize(T);
    tb.t2.resize(T);
    tb.t3.resize(T);
    for (std::size_t t = 1; t <= T; ++t) {
        p.T = static_cast<double>(t);
        tb.t1[t - 1] = regret_bound(BoundId::T1, p).primary;
        tb.t2[t - 1] = regret_bound(BoundId::T2Global, p).primary;
        if (t3) tb.t3[t - 1] = regret_bound(BoundId::T3Global, p).primary;
    }
    return tb;
}

namespace {

Json solution_json(const BatchSolution& s, bool with_values) {
    Json j = Json::object();
    j["norm"] = s.theta.norm();
    j["gradient_norm"] = s.gradient_norm;
    j["iterations"] = s.iterations;
    j["converged"] = s.converged;
    if (with_values) j["values"] = std::vector<double>(s.theta.values().begin(), s.theta.values().end());
    return j;
}

}  // namespace

std::string summary_json(const ExperimentResult& r) {
    const auto& c = r.config;
    Json j = Json::object();
    j["schema"] = 1;
    j["experiment"] = c.experiment;
    j["mode"] = std::string(to_string(c.mode));
    j["seed"] = c.seed;
    j["clients"] = r.streams.num_clients();
    j["horizon"] = r.streams.horizon();
    j["features"] = c.model.features;
    j["bandwidths"] = c.model.bandwidths;
    Json hp = Json::object();
    hp["eta"] = r.hp.eta;
    hp["eta_c"] = r.hp.eta_c;
    if (r.hp.G) hp["G"] = *r.hp.G;
    hp["b"] = r.hp.b;
    hp["M"] = r.hp.M;
    hp["n"] = r.hp.n;
    hp["U"] = r.hp.U;
    j["hyperparams"] = std::move(hp);
    j["gradient_bound"] = Json{{"fed", r.G_fed}, {"local", r.G_local}, {"measured", r.G_measured}};
    if (!r.run.final_server.lanes.empty()) j["store_size"] = r.run.final_server.lanes.front().store.size();
    j["label_range"] = Json{{"lo", r.streams.label_norm.lo}, {"hi", r.streams.label_norm.hi}};

    if (r.summary) {
        Json s = detail::to_json(*r.summary);
        for (auto& [k, v] : s.items()) j[k] = v;
    } else {
        j["regret"] = Json{{"global_clipped", 0.0}, {"global_raw", 0.0}};
    }
    if (r.expected) {
        Json e = detail::to_json(r.expected->finite);
        e["replicates"] = r.expected->replicates;
        j["expected_regret"] = std::move(e);
    }
    if (r.oracle) {
        const auto& o = *r.oracle;
        Json oj = Json::object();
        if (r.maps.size() > 1) oj["kernel"] = o.kernel;
        oj["global"] = solution_json(o.convex.global, false);
        if (o.finite) {
            oj["best"] = o.finite->names[o.finite->best];
            std::vector<std::string> per;
            for (std::size_t k : o.finite->best_per_client) per.push_back(o.finite->names[k]);
            oj["best_per_client"] = per;
        }
        j["oracle"] = std::move(oj);
    }
    if (!r.notes.empty()) j["notes"] = r.notes;
    return j.dump(2) + "\n";
}

std::string oracle_json(const ExperimentResult& r) {
    Json j = Json::object();
    j["schema"] = 1;
    j["experiment"] = r.config.experiment;
    j["seed"] = r.config.seed;
    if (!r.oracle) {
        j["empty"] = true;
        return j.dump(2) + "\n";
    }
    const auto& o = *r.oracle;
    if (r.maps.size() > 1) {
        j["kernel"] = o.kernel;
        j["personal_kernel"] = o.personal_kernel;
    }
    j["theta_star"] = solution_json(o.convex.global, true);
    Json phi = Json::array();
    for (std::size_t i = 0; i < o.convex.personal.size(); ++i) {
        Json p = solution_json(o.convex.personal[i], true);
        p["client"] = i;
        phi.push_back(std::move(p));
    }
    j["phi_star"] = std::move(phi);
    if (o.finite) {
        const auto& f = *o.finite;
        Json fj = Json::object();
        fj["candidates"] = f.names;
        fj["total_clipped"] = f.total_clipped;
        fj["total_raw"] = f.total_raw;
        fj["best"] = f.names[f.best];
        std::vector<std::string> per;
        for (std::size_t k : f.best_per_client) per.push_back(f.names[k]);
        fj["best_per_client"] = per;
        j["finite_set"] = std::move(fj);
    }
    if (o.theta_true_distance) j["theta_true_distance"] = *o.theta_true_distance;
    Json dist = Json::array();
    bool any = false;
    for (std::size_t i = 0; i < o.phi_true_distance.size(); ++i) {
        if (o.phi_true_distance[i]) {
            dist.push_back(Json{{"client", i}, {"distance", *o.phi_true_distance[i]}});
            any = true;
        }
    }
    if (any) j["phi_true_distance"] = std::move(dist);
    if (!r.notes.empty()) j["notes"] = r.notes;
    return j.dump(2) + "\n";
}

std::string trace_csv(const ExperimentResult& r) {
    if (r.summary && r.summary->convex_trace) return trace_to_csv(*r.summary->convex_trace, trace_bounds(r));
    return trace_to_csv(RegretTrace{}, TraceBounds{});
}

std::string bound_table(const std::vector<BoundReport>& reports) {
    std::ostringstream os;
    os << std::left << std::setw(13) << "bound" << std::setw(8) << "client" << std::right << std::setw(14)
       << "measured" << std::setw(14) << "limit" << std::setw(14) << "limit(U/n)" << "  status\n";
    os << std::setprecision(6);
    for (const auto& r : reports) {
        os << std::left << std::setw(13) << to_string(r.id) << std::setw(8)
           << (r.client ? std::to_string(*r.client) : std::string("all")) << std::right << std::setw(14)
           << r.measured_clipped << std::setw(14) << r.bound << std::setw(14);
        if (r.bound_alt) os << *r.bound_alt;
        else os << "-";
        os << "  " << (r.satisfied ? "ok" : "VIOLATED") << "\n";
    }
    return os.str();
}

void write_run_artifacts(const ExperimentResult& r, const std::filesystem::path& dir) {
    write_text(dir / "summary.json", summary_json(r));
    write_text(dir / "ledger.jsonl", ledger_to_jsonl(r.run.ledger));
    write_text(dir / "trace.csv", trace_csv(r));
}

namespace {

std::string digest(const Json& j) {
    std::ostringstream os;
    os << std::setprecision(6);
    os << "experiment " << j.value("experiment", std::string("?")) << "  mode " << j.value("mode", std::string("?"))
       << "  seed " << j.value("seed", 0ULL) << "\n";
    const std::size_t clients = j.contains("clients") && j["clients"].is_array() ? j["clients"].size() : 0;
    os << "clients " << clients << "  horizon " << j.value("horizon", 0ULL) << "\n";
    if (j.contains("aggregate")) {
        const auto& a = j["aggregate"];
        os << "MSE " << a["mse"]["mean"].get<double>() << " +/- " << a["mse"]["std"].get<double>()
           << " (population std)\n";
        if (a.contains("accuracy")) {
            os << "accuracy " << a["accuracy"]["mean"].get<double>() << " +/- " << a["accuracy"]["std"].get<double>()
               << "\n";
        }
    }
    if (j.contains("regret")) {
        const auto& rg = j["regret"];
        auto line = [&](const char* key, const char* label) {
            if (rg.contains(key)) {
                os << label << " clipped " << rg[key]["global_clipped"].get<double>() << "  raw "
                   << rg[key]["global_raw"].get<double>() << "\n";
            }
        };
        line("global_parameter", "regret vs best global parameter:");
        line("personal_parameter", "regret vs best personal parameters:");
        line("finite_set", "regret vs best model in the finite set:");
    }
    if (j.contains("expected_regret")) {
        os << "expected regret vs finite set over " << j["expected_regret"]["replicates"].get<std::size_t>()
           << " selection replicates: " << j["expected_regret"]["global_clipped"].get<double>() << "\n";
    }
    if (j.contains("bounds")) {
        std::vector<BoundReport> reports;
        for (const auto& b : j["bounds"]) {
            BoundReport r;
            r.id = parse_bound_id(b["id"].get<std::string>()).value_or(BoundId::T1);
            if (b.contains("client")) r.client = b["client"].get<std::size_t>();
            r.bound = b["bound"].get<double>();
            if (b.contains("bound_alt")) r.bound_alt = b["bound_alt"].get<double>();
            r.measured_clipped = b["measured_clipped"].get<double>();
            r.measured_raw = b["measured_raw"].get<double>();
            r.satisfied = b["satisfied"].get<bool>();
            reports.push_back(r);
        }
        os << bound_table(reports);
    }
    if (j.contains("notes")) {
        for (const auto& n : j["notes"]) os << "note: " << n.get<std::string>() << "\n";
    }
    return os.str();
}

}  // namespace

std::string report_from_summary(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const std::exception& e) {
        throw std::invalid_argument(std::string("summary is not valid JSON: ") + e.what());
    }
    try {
        return digest(j);
    } catch (const Json::exception& e) {
        throw std::invalid_argument(std::string("summary has an unexpected layout: ") + e.what());
    }
}

}  // namespace fedpoe
