#include "fedpoe/data_streams.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "fedpoe/errors.hpp"
#include "fedpoe/rng.hpp"

namespace fedpoe {

using nlohmann::json;

const std::vector<double>& PartitionManifest::mixture_at(std::size_t group, std::uint64_t t) const {
    const std::vector<std::vector<double>>* active = &mixtures;
    for (const auto& sw : drift) {
        if (t >= sw.step) active = &sw.mixtures;
    }
    return (*active).at(group);
}

void PartitionManifest::validate() const {
    auto check_mixtures = [&](const std::vector<std::vector<double>>& mix, const std::string& where) {
        if (mix.size() != mixtures.size()) {
            throw std::invalid_argument(where + ": expected " + std::to_string(mixtures.size()) + " groups");
        }
        for (std::size_t g = 0; g < mix.size(); ++g) {
            if (mix[g].size() != mixtures.size()) {
                throw std::invalid_argument(where + "[" + std::to_string(g) + "]: expected " +
                                            std::to_string(mixtures.size()) + " proportions");
            }
            double total = 0.0;
            for (double p : mix[g]) {
                if (!(p >= 0.0) || !std::isfinite(p)) {
                    throw std::invalid_argument(where + "[" + std::to_string(g) + "]: negative proportion");
                }
                total += p;
            }
            if (std::abs(total - 1.0) > 1e-9) {
                throw std::invalid_argument(where + "[" + std::to_string(g) + "]: proportions sum to " +
                                            std::to_string(total));
            }
        }
    };
    if (mixtures.empty()) throw std::invalid_argument("manifest: no groups");
    if (groups.size() != num_clients) throw std::invalid_argument("manifest: group list does not cover all clients");
    for (std::size_t g : groups) {
        if (g >= mixtures.size()) throw std::invalid_argument("manifest: client assigned to unknown group");
    }
    check_mixtures(mixtures, "mixtures");
    std::uint64_t prev = 0;
    for (std::size_t k = 0; k < drift.size(); ++k) {
        if (drift[k].step <= prev) throw std::invalid_argument("manifest: switch steps must be strictly increasing");
        prev = drift[k].step;
        check_mixtures(drift[k].mixtures, "drift[" + std::to_string(k) + "].mixtures");
    }
}

PartitionManifest PartitionManifest::group_bias(std::size_t num_clients, std::size_t num_groups, double bias) {
    if (num_groups == 0) throw std::invalid_argument("group_bias: num_groups must be positive");
    if (num_groups > 1 && !(bias > 0.0 && bias <= 1.0)) {
        throw std::invalid_argument("group_bias: bias must lie in (0, 1]");
    }
    PartitionManifest m;
    m.num_clients = num_clients;
    m.groups.resize(num_clients);
    for (std::size_t i = 0; i < num_clients; ++i) m.groups[i] = i % num_groups;
    m.mixtures.assign(num_groups, std::vector<double>(num_groups, 0.0));
    for (std::size_t g = 0; g < num_groups; ++g) {
        if (num_groups == 1) {
            m.mixtures[g][g] = 1.0;
            continue;
        }
        const double other = (1.0 - bias) / static_cast<double>(num_groups - 1);
        for (std::size_t s = 0; s < num_groups; ++s) m.mixtures[g][s] = (s == g) ? bias : other;
    }
    return m;
}

namespace {

std::size_t draw_categorical(const std::vector<double>& probs, double u) {
    double cdf = 0.0;
    std::size_t last = 0;
    for (std::size_t s = 0; s < probs.size(); ++s) {
        if (probs[s] <= 0.0) continue;
        last = s;
        cdf += probs[s];
        if (u < cdf) return s;
    }
    return last;
}

// Positive combination of kernel sections z(c_k): the label function is a
// smooth bump mixture that is nonnegative up to feature-approximation error.
ParameterVector bump_mixture(Stream& rng, const RandomFeatureMap& map, std::size_t centers) {
    std::vector<double> theta(map.output_dim(), 0.0);
    std::vector<double> c(map.input_dim());
    for (std::size_t k = 0; k < centers; ++k) {
        for (double& v : c) v = rng.uniform();
        const double a = 0.5 + rng.uniform();
        const FeatureVector z = map.embed(c);
        for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += a * z[i] / static_cast<double>(centers);
    }
    return ParameterVector(std::move(theta));
}

}  // namespace

ClientStreams synth_from_manifest(const SynthParams& params, const PartitionManifest& manifest,
                                  const RandomFeatureMap& map) {
    manifest.validate();
    if (manifest.num_clients != params.num_clients) {
        throw std::invalid_argument("synthetic stream: manifest client count differs from params");
    }
    if (map.input_dim() != params.input_dim) {
        throw std::invalid_argument("synthetic stream: feature map input dimension differs from input_dim");
    }
    const std::size_t groups = manifest.num_groups();
    if (!params.group_noise_sd.empty() && params.group_noise_sd.size() != groups) {
        throw std::invalid_argument("synthetic stream: group_noise_sd needs one entry per group");
    }
    if (!params.group_heterogeneity.empty() && params.group_heterogeneity.size() != groups) {
        throw std::invalid_argument("synthetic stream: group_heterogeneity needs one entry per group");
    }
    if (params.centers_per_group == 0) throw std::invalid_argument("synthetic stream: centers_per_group must be positive");

    ClientStreams out;
    out.input_dim = params.input_dim;

    Stream truth = Stream::derive(params.seed, StreamPurpose::Data, {0});
    const ParameterVector shared = bump_mixture(truth, map, params.centers_per_group);
    for (std::size_t g = 0; g < groups; ++g) {
        const ParameterVector own = bump_mixture(truth, map, params.centers_per_group);
        const double h = params.group_heterogeneity.empty() ? 1.0 : params.group_heterogeneity[g];
        std::vector<double> theta(own.size());
        for (std::size_t i = 0; i < theta.size(); ++i) theta[i] = (1.0 - h) * shared[i] + h * own[i];
        out.group_params.emplace_back(std::move(theta));
    }

    out.clients.assign(params.num_clients, {});
    double lo = 0.0;
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < params.num_clients; ++i) {
        Stream rng = Stream::derive(params.seed, StreamPurpose::Data, {1, i});
        auto& samples = out.clients[i];
        samples.reserve(params.horizon);
        for (std::uint64_t t = 1; t <= params.horizon; ++t) {
            const auto& mix = manifest.mixture_at(manifest.groups[i], t);
            const std::size_t source = draw_categorical(mix, rng.uniform());
            StreamSample s;
            s.t = t;
            s.client = static_cast<std::uint32_t>(i);
            s.source = static_cast<std::uint32_t>(source);
            s.x.resize(params.input_dim);
            for (double& v : s.x) v = rng.uniform();
            const double sd = params.group_noise_sd.empty() ? params.noise_sd : params.group_noise_sd[source];
            const double noise = rng.normal();
            s.y = predict(out.group_params[source], map.embed(s.x)) + sd * noise;
            lo = std::min(lo, s.y);
            hi = std::max(hi, s.y);
            samples.push_back(std::move(s));
        }
    }
    out.label_norm = MinMax{lo, std::isfinite(hi) ? hi : lo};
    for (auto& samples : out.clients) {
        for (auto& s : samples) s.y = out.label_norm.apply(s.y);
    }
    return out;
}

ClientStreams synth_group_bias(const SynthParams& params, const RandomFeatureMap& map) {
    if (params.num_groups == 0) throw std::invalid_argument("synth_group_bias: num_groups must be positive");
    if (params.num_groups > 1 && !(params.bias > 0.0 && params.bias <= 1.0)) {
        throw std::invalid_argument("synth_group_bias: bias must lie in (0, 1]");
    }
    return synth_from_manifest(params, PartitionManifest::group_bias(params.num_clients, params.num_groups, params.bias),
                               map);
}

ClientStreams synth_drift(const SynthParams& params, std::uint64_t switch_at,
                          const std::vector<std::vector<double>>& pre,
                          const std::vector<std::vector<double>>& post, const RandomFeatureMap& map) {
    if (switch_at < 1 || switch_at > params.horizon) {
        throw std::invalid_argument("synth_drift: switch_at " + std::to_string(switch_at) + " outside [1, " +
                                    std::to_string(params.horizon) + "]");
    }
    PartitionManifest m;
    m.num_clients = params.num_clients;
    m.mixtures = pre;
    m.groups.resize(params.num_clients);
    if (pre.empty()) throw std::invalid_argument("synth_drift: no pre-switch mixtures");
    for (std::size_t i = 0; i < params.num_clients; ++i) m.groups[i] = i % pre.size();
    PartitionManifest::Switch sw;
    sw.step = switch_at;
    if (post.empty()) {
        for (auto mix : pre) {
            std::reverse(mix.begin(), mix.end());
            sw.mixtures.push_back(std::move(mix));
        }
    } else {
        sw.mixtures = post;
    }
    m.drift.push_back(std::move(sw));
    return synth_from_manifest(params, m, map);
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"') {
            in_quotes = true;
            any = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
            any = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            if (any || !field.empty()) {
                row.push_back(std::move(field));
                rows.push_back(std::move(row));
            }
            row.clear();
            field.clear();
            any = false;
        } else {
            field += c;
            any = true;
        }
    }
    if (in_quotes) throw std::invalid_argument("csv: unterminated quoted field");
    if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

double parse_number(const std::string& cell, std::size_t row, const std::string& column) {
    std::size_t begin = cell.find_first_not_of(" \t");
    std::size_t end = cell.find_last_not_of(" \t");
    double v = 0.0;
    if (begin != std::string::npos) {
        const char* first = cell.data() + begin;
        const char* last = cell.data() + end + 1;
        auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec == std::errc() && ptr == last && std::isfinite(v)) return v;
    }
    throw std::invalid_argument("csv row " + std::to_string(row) + ", column '" + column + "': non-numeric cell '" +
                                cell + "'");
}

}  // namespace

ClientStreams load_csv(const std::filesystem::path& path, const CsvOptions& options,
                       const PartitionManifest& manifest) {
    manifest.validate();
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    std::stringstream buf;
    buf << is.rdbuf();
    const auto rows = parse_csv(buf.str());
    if (rows.empty()) throw std::invalid_argument(path.string() + ": missing header");

    const auto& header = rows.front();
    auto find_column = [&](const std::string& name) -> std::size_t {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw std::invalid_argument(path.string() + ": missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t label_col = find_column(options.label_column);
    std::optional<std::size_t> group_col;
    if (options.group_column) group_col = find_column(*options.group_column);

    std::vector<std::size_t> feature_cols;
    ClientStreams out;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c == label_col || (group_col && c == *group_col)) continue;
        feature_cols.push_back(c);
        out.feature_names.push_back(header[c]);
    }
    if (feature_cols.empty()) throw std::invalid_argument(path.string() + ": no feature columns");
    out.input_dim = feature_cols.size();

    struct Row {
        std::vector<double> x;
        double y;
        std::size_t group;
    };
    std::vector<Row> data;
    std::vector<std::string> group_values;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != header.size()) {
            throw std::invalid_argument("csv row " + std::to_string(r) + ": expected " + std::to_string(header.size()) +
                                        " fields, found " + std::to_string(rows[r].size()));
        }
        Row row;
        for (std::size_t c : feature_cols) row.x.push_back(parse_number(rows[r][c], r, header[c]));
        row.y = parse_number(rows[r][label_col], r, header[label_col]);
        row.group = 0;
        if (group_col) group_values.push_back(rows[r][*group_col]);
        data.push_back(std::move(row));
    }

    if (group_col) {
        std::vector<std::string> distinct = group_values;
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        if (distinct.size() != manifest.num_groups()) {
            throw std::invalid_argument("csv: column '" + *options.group_column + "' has " +
                                        std::to_string(distinct.size()) + " distinct values, manifest has " +
                                        std::to_string(manifest.num_groups()) + " groups");
        }
        for (std::size_t r = 0; r < data.size(); ++r) {
            data[r].group = static_cast<std::size_t>(
                std::lower_bound(distinct.begin(), distinct.end(), group_values[r]) - distinct.begin());
        }
    } else if (manifest.num_groups() != 1) {
        throw std::invalid_argument("csv: manifest has several groups but no group column was given");
    }

    // Column-wise min-max over the whole file.
    out.feature_norm.assign(out.input_dim, MinMax{});
    for (std::size_t c = 0; c < out.input_dim; ++c) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (const auto& row : data) {
            lo = std::min(lo, row.x[c]);
            hi = std::max(hi, row.x[c]);
        }
        out.feature_norm[c] = data.empty() ? MinMax{} : MinMax{lo, hi};
    }
    {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (const auto& row : data) {
            lo = std::min(lo, row.y);
            hi = std::max(hi, row.y);
        }
        out.label_norm = data.empty() ? MinMax{} : MinMax{lo, hi};
    }

    const std::size_t N = manifest.num_clients;
    const std::size_t T = options.horizon;
    if (data.size() < N * T) {
        throw std::invalid_argument("csv: " + std::to_string(data.size()) + " rows cannot supply " +
                                    std::to_string(N) + " clients x " + std::to_string(T) + " steps");
    }

    // Per-source row pools in file order.
    std::vector<std::vector<std::size_t>> pools(manifest.num_groups());
    for (std::size_t r = 0; r < data.size(); ++r) pools[data[r].group].push_back(r);
    std::vector<std::size_t> cursor(pools.size(), 0);

    auto make_sample = [&](std::size_t r, std::size_t client, std::uint64_t t) {
        StreamSample s;
        s.t = t;
        s.client = static_cast<std::uint32_t>(client);
        s.source = static_cast<std::uint32_t>(data[r].group);
        s.x.resize(out.input_dim);
        for (std::size_t c = 0; c < out.input_dim; ++c) s.x[c] = out.feature_norm[c].apply(data[r].x[c]);
        s.y = out.label_norm.apply(data[r].y);
        return s;
    };

    out.clients.assign(N, {});
    for (auto& c : out.clients) c.reserve(T);
    Stream rng = Stream::derive(options.seed, StreamPurpose::Partition);
    for (std::uint64_t t = 1; t <= T; ++t) {
        for (std::size_t i = 0; i < N; ++i) {
            std::size_t source = 0;
            if (manifest.num_groups() > 1) source = draw_categorical(manifest.mixture_at(manifest.groups[i], t), rng.uniform());
            if (cursor[source] >= pools[source].size()) {
                throw std::invalid_argument("csv: group " + std::to_string(source) +
                                            " ran out of rows at step " + std::to_string(t));
            }
            out.clients[i].push_back(make_sample(pools[source][cursor[source]++], i, t));
        }
    }
    return out;
}

void write_stream_cache(const ClientStreams& streams, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    for (std::uint64_t t = 1; t <= streams.horizon(); ++t) {
        for (std::size_t i = 0; i < streams.num_clients(); ++i) {
            const auto& s = streams.at(i, t);
            json j{{"t", s.t}, {"client", s.client}, {"x", s.x}, {"y", s.y}, {"source", s.source}};
            os << j.dump() << '\n';
        }
    }
    if (!os) throw IoError("failed writing " + path.string());
}

ClientStreams read_stream_cache(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path.string());
    std::map<std::pair<std::uint32_t, std::uint64_t>, StreamSample> samples;
    std::string line;
    std::size_t lineno = 0;
    std::uint32_t max_client = 0;
    std::uint64_t max_t = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            StreamSample s;
            s.t = j.at("t").get<std::uint64_t>();
            s.client = j.at("client").get<std::uint32_t>();
            s.x = j.at("x").get<std::vector<double>>();
            s.y = j.at("y").get<double>();
            s.source = j.value("source", 0u);
            max_client = std::max(max_client, s.client);
            max_t = std::max(max_t, s.t);
            samples[{s.client, s.t}] = std::move(s);
        } catch (const json::exception& e) {
            throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    ClientStreams out;
    if (samples.empty()) return out;
    out.clients.assign(max_client + 1, {});
    for (auto& [key, s] : samples) {
        auto& c = out.clients[key.first];
        if (c.size() + 1 != s.t) throw IoError(path.string() + ": stream cache has gaps");
        out.input_dim = s.x.size();
        c.push_back(std::move(s));
    }
    for (const auto& c : out.clients) {
        if (c.size() != max_t) throw IoError(path.string() + ": clients have unequal horizons");
    }
    return out;
}

}  // namespace fedpoe
