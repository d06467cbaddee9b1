#include "fedpoe/config.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "fedpoe/errors.hpp"

namespace fedpoe {

std::string_view to_string(DataSource source) {
    switch (source) {
        case DataSource::SyntheticBias: return "synthetic-bias";
        case DataSource::SyntheticDrift: return "synthetic-drift";
        case DataSource::Csv: return "csv";
    }
    return "unknown";
}

double RateSpec::resolve(std::size_t T) const {
    if (!scaled_by_horizon) return value;
    return value / std::sqrt(static_cast<double>(std::max<std::size_t>(T, 1)));
}

std::string RateSpec::text() const {
    std::ostringstream os;
    os.precision(17);
    if (scaled_by_horizon) {
        if (value != 1.0) os << value;
        else os << 1;
        os << "/sqrt(T)";
    } else {
        os << value;
    }
    return os.str();
}

Hyperparams RunConfig::resolved_hyperparams() const {
    const std::size_t T = federation.horizon;
    Hyperparams hp;
    hp.eta = hyperparams.eta ? hyperparams.eta->resolve(T) : 0.0;
    hp.eta_c = hyperparams.eta_c ? hyperparams.eta_c->resolve(T) : hp.eta;
    hp.G = hyperparams.G;
    hp.b = hyperparams.b;
    hp.M = hyperparams.M.value_or(0);
    hp.n = hyperparams.n.value_or(1);
    hp.U = hyperparams.U.value_or(0);
    return hp;
}

SimulationSettings RunConfig::settings(std::uint64_t selection_replicate) const {
    SimulationSettings s;
    s.mode = mode;
    s.hp = resolved_hyperparams();
    s.seed = seed;
    s.selection_replicate = selection_replicate;
    s.participation = federation.participation;
    s.participants = federation.participants;
    s.kernel_rate = model.kernel_rate;
    s.threads = threads;
    return s;
}

namespace {

class Reader {
public:
    std::vector<std::string> issues;

    void issue(const std::string& path, const std::string& what) { issues.push_back(path + ": " + what); }

    void allow(const YAML::Node& map, const std::string& prefix, std::initializer_list<const char*> keys) {
        std::set<std::string> known(keys.begin(), keys.end());
        for (const auto& kv : map) {
            const std::string key = kv.first.Scalar();
            if (!known.count(key)) issue(join(prefix, key), "unknown field");
        }
    }

    static std::string join(const std::string& prefix, const std::string& key) {
        return prefix.empty() ? key : prefix + "." + key;
    }

    std::optional<double> number(const YAML::Node& node, const std::string& path) {
        if (!node.IsScalar()) {
            issue(path, "expected a number");
            return std::nullopt;
        }
        const std::string& s = node.Scalar();
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
            issue(path, "expected a number, got '" + s + "'");
            return std::nullopt;
        }
        return v;
    }

    std::optional<std::uint64_t> integer(const YAML::Node& node, const std::string& path) {
        if (!node.IsScalar()) {
            issue(path, "expected a nonnegative integer");
            return std::nullopt;
        }
        const std::string& s = node.Scalar();
        std::uint64_t v = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size()) {
            issue(path, "expected a nonnegative integer, got '" + s + "'");
            return std::nullopt;
        }
        return v;
    }

    std::optional<std::string> text(const YAML::Node& node, const std::string& path) {
        if (!node.IsScalar()) {
            issue(path, "expected a string");
            return std::nullopt;
        }
        return node.Scalar();
    }

    std::optional<bool> boolean(const YAML::Node& node, const std::string& path) {
        if (node.IsScalar()) {
            const std::string& s = node.Scalar();
            if (s == "true") return true;
            if (s == "false") return false;
        }
        issue(path, "expected true or false");
        return std::nullopt;
    }

    std::optional<std::vector<double>> numbers(const YAML::Node& node, const std::string& path) {
        if (!node.IsSequence()) {
            issue(path, "expected a list of numbers");
            return std::nullopt;
        }
        std::vector<double> out;
        bool ok = true;
        for (std::size_t k = 0; k < node.size(); ++k) {
            auto v = number(node[k], path + "[" + std::to_string(k) + "]");
            if (v) out.push_back(*v);
            else ok = false;
        }
        if (!ok) return std::nullopt;
        return out;
    }

    std::optional<std::vector<std::vector<double>>> matrix(const YAML::Node& node, const std::string& path) {
        if (!node.IsSequence()) {
            issue(path, "expected a list of lists of numbers");
            return std::nullopt;
        }
        std::vector<std::vector<double>> out;
        bool ok = true;
        for (std::size_t k = 0; k < node.size(); ++k) {
            auto row = numbers(node[k], path + "[" + std::to_string(k) + "]");
            if (row) out.push_back(std::move(*row));
            else ok = false;
        }
        if (!ok) return std::nullopt;
        return out;
    }

    std::optional<RateSpec> rate(const YAML::Node& node, const std::string& path) {
        if (!node.IsScalar()) {
            issue(path, "expected a number or 'c/sqrt(T)'");
            return std::nullopt;
        }
        static const std::regex scaled(R"(^\s*([0-9.eE+-]*)\s*/\s*sqrt\(\s*T\s*\)\s*$)");
        std::smatch m;
        const std::string s = node.Scalar();
        if (std::regex_match(s, m, scaled)) {
            double c = 1.0;
            const std::string lead = m[1].str();
            if (!lead.empty()) {
                auto [ptr, ec] = std::from_chars(lead.data(), lead.data() + lead.size(), c);
                if (ec != std::errc() || ptr != lead.data() + lead.size() || !std::isfinite(c)) {
                    issue(path, "bad coefficient in '" + s + "'");
                    return std::nullopt;
                }
            }
            return RateSpec{c, true};
        }
        auto v = number(node, path);
        if (!v) return std::nullopt;
        return RateSpec{*v, false};
    }

    template <class T, class Fn>
    void read(const YAML::Node& map, const std::string& prefix, const char* key, T& target, Fn&& parse) {
        const YAML::Node node = map[key];
        if (!node) return;
        auto v = parse(node, join(prefix, key));
        if (v) target = std::move(*v);
    }
};

void parse_data(Reader& rd, const YAML::Node& node, DataConfig& d) {
    const std::string p = "data";
    rd.allow(node, p,
             {"source", "task", "input_dim", "num_groups", "bias", "noise_sd", "group_noise_sd",
              "group_heterogeneity", "centers_per_group", "switch_at", "pre", "post", "path", "label_column",
              "group_column", "mixtures"});
    if (const auto src = node["source"]) {
        auto s = rd.text(src, "data.source");
        if (s) {
            if (*s == "synthetic-bias") d.source = DataSource::SyntheticBias;
            else if (*s == "synthetic-drift") d.source = DataSource::SyntheticDrift;
            else if (*s == "csv") d.source = DataSource::Csv;
            else rd.issue("data.source", "expected synthetic-bias, synthetic-drift or csv, got '" + *s + "'");
        }
    } else {
        rd.issue("data.source", "required");
    }
    if (const auto task = node["task"]) {
        auto s = rd.text(task, "data.task");
        if (s) {
            if (*s == "classification") d.classification = true;
            else if (*s != "regression") rd.issue("data.task", "expected regression or classification");
        }
    }
    auto as_size = [&](const YAML::Node& n, const std::string& path) -> std::optional<std::size_t> {
        auto v = rd.integer(n, path);
        if (!v) return std::nullopt;
        return static_cast<std::size_t>(*v);
    };
    auto num = [&](const YAML::Node& n, const std::string& path) { return rd.number(n, path); };
    auto list = [&](const YAML::Node& n, const std::string& path) { return rd.numbers(n, path); };
    auto mat = [&](const YAML::Node& n, const std::string& path) { return rd.matrix(n, path); };
    rd.read(node, p, "input_dim", d.input_dim, as_size);
    rd.read(node, p, "num_groups", d.num_groups, as_size);
    rd.read(node, p, "bias", d.bias, num);
    rd.read(node, p, "noise_sd", d.noise_sd, num);
    rd.read(node, p, "group_noise_sd", d.group_noise_sd, list);
    rd.read(node, p, "group_heterogeneity", d.group_heterogeneity, list);
    rd.read(node, p, "centers_per_group", d.centers_per_group, as_size);
    rd.read(node, p, "switch_at", d.switch_at, [&](const YAML::Node& n, const std::string& path) {
        return rd.integer(n, path);
    });
    rd.read(node, p, "pre", d.pre, mat);
    rd.read(node, p, "post", d.post, mat);
    rd.read(node, p, "mixtures", d.mixtures, mat);
    rd.read(node, p, "path", d.path, [&](const YAML::Node& n, const std::string& path) {
        auto s = rd.text(n, path);
        return s ? std::optional<std::filesystem::path>(*s) : std::nullopt;
    });
    rd.read(node, p, "label_column", d.label_column,
            [&](const YAML::Node& n, const std::string& path) { return rd.text(n, path); });
    if (const auto g = node["group_column"]) {
        auto s = rd.text(g, "data.group_column");
        if (s) d.group_column = *s;
    }
}

}  // namespace

void validate(const RunConfig& c) {
    std::vector<std::string> issues;
    auto bad = [&](const std::string& path, const std::string& what) { issues.push_back(path + ": " + what); };

    if (c.schema != 1) bad("schema", "unsupported version " + std::to_string(c.schema) + " (expected 1)");
    if (c.threads == 0) bad("threads", "must be at least 1");

    const auto& f = c.federation;
    if (f.clients == 0) bad("federation.clients", "must be at least 1");
    if (!(f.participation > 0.0 && f.participation <= 1.0)) bad("federation.participation", "must lie in (0, 1]");
    for (std::size_t k = 0; k < f.participants.size(); ++k) {
        if (f.participants[k] >= f.clients) {
            bad("federation.participants[" + std::to_string(k) + "]",
                "client " + std::to_string(f.participants[k]) + " out of range");
        }
    }

    const auto& h = c.hyperparams;
    const bool ensemble = c.mode == Mode::FedPoe || c.mode == Mode::EnsembleOnly;
    if (!h.eta) bad("hyperparams.eta", "required");
    else if (!(h.eta->value > 0.0)) bad("hyperparams.eta", "must be positive");
    if (!h.eta_c) {
        if (ensemble) bad("hyperparams.eta_c", std::string("required in mode ") + std::string(to_string(c.mode)));
    } else if (!(h.eta_c->value > 0.0)) {
        bad("hyperparams.eta_c", "must be positive");
    }
    if (h.G && !(*h.G > 0.0)) bad("hyperparams.G", "must be positive");
    if (h.b == 0) bad("hyperparams.b", "must be at least 1");
    if (c.mode == Mode::FedPoe) {
        if (!h.n) bad("hyperparams.n", "required in mode fed-poe");
        if (!h.U) bad("hyperparams.U", "required in mode fed-poe");
        if (!h.M) bad("hyperparams.M", "required in mode fed-poe");
    }
    if (h.n && *h.n == 0) bad("hyperparams.n", "must be at least 1");

    const auto& m = c.model;
    if (m.features == 0) bad("model.features", "must be at least 1");
    if (m.bandwidths.empty()) bad("model.bandwidths", "needs at least one entry");
    for (std::size_t k = 0; k < m.bandwidths.size(); ++k) {
        if (!(m.bandwidths[k] > 0.0)) bad("model.bandwidths[" + std::to_string(k) + "]", "must be positive");
    }
    if (m.kernel_rate && !(*m.kernel_rate > 0.0)) bad("model.kernel_rate", "must be positive");

    const auto& d = c.data;
    if (d.num_groups == 0) bad("data.num_groups", "must be at least 1");
    if (!(d.bias > 0.0 && d.bias <= 1.0)) bad("data.bias", "must lie in (0, 1]");
    if (d.num_groups == 1 && d.bias != 1.0) bad("data.bias", "must be 1 with a single group");
    if (d.source != DataSource::Csv) {
        if (d.input_dim == 0) bad("data.input_dim", "must be at least 1");
        if (!(d.noise_sd >= 0.0)) bad("data.noise_sd", "must be nonnegative");
        if (!d.group_noise_sd.empty() && d.group_noise_sd.size() != d.num_groups) {
            bad("data.group_noise_sd", "needs one entry per group");
        }
        for (double v : d.group_noise_sd) {
            if (!(v >= 0.0)) bad("data.group_noise_sd", "entries must be nonnegative");
        }
        if (!d.group_heterogeneity.empty() && d.group_heterogeneity.size() != d.num_groups) {
            bad("data.group_heterogeneity", "needs one entry per group");
        }
        for (double v : d.group_heterogeneity) {
            if (!(v >= 0.0 && v <= 1.0)) bad("data.group_heterogeneity", "entries must lie in [0, 1]");
        }
        if (d.centers_per_group == 0) bad("data.centers_per_group", "must be at least 1");
    }
    auto check_mixtures = [&](const std::vector<std::vector<double>>& mix, const std::string& path) {
        if (mix.empty()) return;
        if (mix.size() != d.num_groups) bad(path, "needs one row per group");
        for (std::size_t g = 0; g < mix.size(); ++g) {
            double sum = 0.0;
            bool neg = false;
            for (double v : mix[g]) {
                sum += v;
                neg = neg || v < 0.0;
            }
            const std::string row = path + "[" + std::to_string(g) + "]";
            if (mix[g].size() != d.num_groups) bad(row, "needs one proportion per group");
            else if (neg || std::abs(sum - 1.0) > 1e-9) bad(row, "proportions must be nonnegative and sum to 1");
        }
    };
    if (d.source == DataSource::SyntheticDrift) {
        if (d.switch_at == 0) bad("data.switch_at", "required, at least 1");
        else if (f.horizon > 0 && d.switch_at > f.horizon) bad("data.switch_at", "must not exceed federation.horizon");
        check_mixtures(d.pre, "data.pre");
        check_mixtures(d.post, "data.post");
    }
    if (d.source == DataSource::Csv) {
        if (d.path.empty()) bad("data.path", "required for csv data");
        if (d.label_column.empty()) bad("data.label_column", "required for csv data");
        if (d.num_groups > 1 && !d.group_column) bad("data.group_column", "required when data.num_groups > 1");
        check_mixtures(d.mixtures, "data.mixtures");
    }

    if (c.verify.selection_replicates == 0) bad("verify.selection_replicates", "must be at least 1");
    if (!(c.verify.oracle_tolerance > 0.0)) bad("verify.oracle_tolerance", "must be positive");

    if (!issues.empty()) throw ConfigError(std::move(issues));
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ConfigError({"<document>: " + std::string(e.what())});
    }
    if (!root.IsMap()) throw ConfigError({"<document>: expected a mapping of sections"});

    RunConfig c;
    c.base_dir = base_dir;
    Reader rd;
    try {
        rd.allow(root, "",
                 {"schema", "experiment", "seed", "mode", "output", "threads", "data", "federation", "hyperparams",
                  "model", "verify"});
        if (const auto n = root["schema"]) {
            auto v = rd.integer(n, "schema");
            if (v) c.schema = static_cast<int>(std::min<std::uint64_t>(*v, 1000000));
        } else {
            rd.issue("schema", "required");
        }
        rd.read(root, "", "experiment", c.experiment,
                [&](const YAML::Node& n, const std::string& p) { return rd.text(n, p); });
        rd.read(root, "", "seed", c.seed, [&](const YAML::Node& n, const std::string& p) { return rd.integer(n, p); });
        if (const auto n = root["mode"]) {
            auto s = rd.text(n, "mode");
            if (s) {
                auto m = parse_mode(*s);
                if (m) c.mode = *m;
                else rd.issue("mode", "expected fed-poe, ensemble-only, fed-ogd or local-ogd, got '" + *s + "'");
            }
        }
        if (const auto n = root["output"]) {
            auto s = rd.text(n, "output");
            if (s) c.output = std::filesystem::path(*s);
        }
        auto as_size = [&](const YAML::Node& n, const std::string& p) -> std::optional<std::size_t> {
            auto v = rd.integer(n, p);
            if (!v) return std::nullopt;
            return static_cast<std::size_t>(*v);
        };
        rd.read(root, "", "threads", c.threads, as_size);

        auto section = [&](const char* name, bool required) -> YAML::Node {
            const YAML::Node n = root[name];
            if (!n) {
                if (required) rd.issue(name, "required section");
                return YAML::Node();
            }
            if (!n.IsMap()) {
                rd.issue(name, "expected a section");
                return YAML::Node();
            }
            return n;
        };

        if (auto d = section("data", true)) parse_data(rd, d, c.data);

        if (auto f = section("federation", true)) {
            rd.allow(f, "federation", {"clients", "horizon", "participation", "participants"});
            if (f["clients"]) rd.read(f, "federation", "clients", c.federation.clients, as_size);
            else rd.issue("federation.clients", "required");
            if (f["horizon"]) rd.read(f, "federation", "horizon", c.federation.horizon, as_size);
            else rd.issue("federation.horizon", "required");
            rd.read(f, "federation", "participation", c.federation.participation,
                    [&](const YAML::Node& n, const std::string& p) { return rd.number(n, p); });
            if (const auto list = f["participants"]) {
                if (!list.IsSequence()) {
                    rd.issue("federation.participants", "expected a list of client indices");
                } else {
                    for (std::size_t k = 0; k < list.size(); ++k) {
                        auto v = as_size(list[k], "federation.participants[" + std::to_string(k) + "]");
                        if (v) c.federation.participants.push_back(*v);
                    }
                }
            }
        }

        if (auto h = section("hyperparams", true)) {
            auto& hp = c.hyperparams;
            rd.allow(h, "hyperparams", {"eta", "eta_c", "G", "b", "M", "n", "U"});
            if (const auto n = h["eta"]) hp.eta = rd.rate(n, "hyperparams.eta");
            if (const auto n = h["eta_c"]) hp.eta_c = rd.rate(n, "hyperparams.eta_c");
            if (const auto n = h["G"]) {
                if (!(n.IsScalar() && n.Scalar() == "auto")) hp.G = rd.number(n, "hyperparams.G");
            }
            rd.read(h, "hyperparams", "b", hp.b, as_size);
            if (const auto n = h["M"]) hp.M = as_size(n, "hyperparams.M");
            if (const auto n = h["n"]) hp.n = as_size(n, "hyperparams.n");
            if (const auto n = h["U"]) hp.U = as_size(n, "hyperparams.U");
        }

        if (auto m = section("model", false)) {
            rd.allow(m, "model", {"features", "bandwidths", "kernel_rate"});
            rd.read(m, "model", "features", c.model.features, as_size);
            rd.read(m, "model", "bandwidths", c.model.bandwidths,
                    [&](const YAML::Node& n, const std::string& p) { return rd.numbers(n, p); });
            if (const auto n = m["kernel_rate"]) c.model.kernel_rate = rd.number(n, "model.kernel_rate");
        }

        if (auto v = section("verify", false)) {
            rd.allow(v, "verify", {"selection_replicates", "oracle_tolerance"});
            rd.read(v, "verify", "selection_replicates", c.verify.selection_replicates, as_size);
            rd.read(v, "verify", "oracle_tolerance", c.verify.oracle_tolerance,
                    [&](const YAML::Node& n, const std::string& p) { return rd.number(n, p); });
        }
    } catch (const YAML::Exception& e) {
        rd.issue("<document>", e.what());
    }

    if (!rd.issues.empty()) throw ConfigError(std::move(rd.issues));
    validate(c);
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError({"<file>: cannot read " + path.string()});
    std::stringstream buf;
    buf << is.rdbuf();
    return parse_config(buf.str(), path.parent_path());
}

std::filesystem::path output_directory(const RunConfig& config) {
    if (config.output) return *config.output;
    if (const char* root = std::getenv("FEDPOE_OUTPUT_ROOT"); root && *root) {
        return std::filesystem::path(root) / config.experiment;
    }
    return std::filesystem::path("runs") / config.experiment;
}

}  // namespace fedpoe
