#include "fedpoe/metrics.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "fedpoe/errors.hpp"
#include "json_util.hpp"

namespace fedpoe {

namespace detail {

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) throw std::runtime_error("format_double failed");
    return std::string(buf, ptr);
}

Json to_json(const LossPair& loss) { return Json{{"raw", loss.raw}, {"clipped", loss.clipped}}; }

LossPair loss_from_json(const Json& j) {
    if (j.is_array()) return LossPair{j.at(0).get<double>(), j.at(1).get<double>()};
    return LossPair{j.at("raw").get<double>(), j.at("clipped").get<double>()};
}

namespace {

void put_record(Json& j, const ComponentRecord& rec) {
    j["pred_final"] = rec.pred_final;
    j["pred_pair"] = rec.pred_pair;
    j["pred_local"] = rec.pred_local;
    j["pred_fed"] = rec.pred_fed;
    if (rec.pred_snap) j["pred_snap"] = *rec.pred_snap;
    j["loss_final"] = to_json(rec.loss_final);
    j["loss_pair"] = to_json(rec.loss_pair);
    j["loss_local"] = to_json(rec.loss_local);
    j["loss_fed"] = to_json(rec.loss_fed);
    if (rec.loss_snap) j["loss_snap"] = to_json(*rec.loss_snap);
    if (!rec.snapshot_losses.empty()) {
        Json arr = Json::array();
        for (const auto& l : rec.snapshot_losses) arr.push_back(Json::array({l.raw, l.clipped}));
        j["snapshot_losses"] = std::move(arr);
    }
    if (!rec.selected.empty()) j["selected"] = rec.selected;
}

}  // namespace

Json to_json(const ComponentRecord& rec) {
    Json j = Json::object();
    put_record(j, rec);
    return j;
}

ComponentRecord record_from_json(const Json& j) {
    ComponentRecord rec;
    rec.pred_final = j.at("pred_final").get<double>();
    rec.pred_pair = j.at("pred_pair").get<double>();
    rec.pred_local = j.at("pred_local").get<double>();
    rec.pred_fed = j.at("pred_fed").get<double>();
    if (j.contains("pred_snap")) rec.pred_snap = j.at("pred_snap").get<double>();
    rec.loss_final = loss_from_json(j.at("loss_final"));
    rec.loss_pair = loss_from_json(j.at("loss_pair"));
    rec.loss_local = loss_from_json(j.at("loss_local"));
    rec.loss_fed = loss_from_json(j.at("loss_fed"));
    if (j.contains("loss_snap")) rec.loss_snap = loss_from_json(j.at("loss_snap"));
    if (j.contains("snapshot_losses")) {
        for (const auto& l : j.at("snapshot_losses")) rec.snapshot_losses.push_back(loss_from_json(l));
    }
    if (j.contains("selected")) rec.selected = j.at("selected").get<std::vector<std::size_t>>();
    return rec;
}

Json to_json(const LedgerRow& row) {
    Json j = Json::object();
    j["t"] = row.t;
    j["client"] = row.client;
    j["y"] = row.y;
    if (!row.participant) j["participant"] = false;
    put_record(j, row.record);
    if (!row.kernels.empty()) {
        Json arr = Json::array();
        for (const auto& k : row.kernels) arr.push_back(to_json(k));
        j["kernels"] = std::move(arr);
    }
    return j;
}

LedgerRow row_from_json(const Json& j) {
    LedgerRow row;
    row.t = j.at("t").get<std::uint64_t>();
    row.client = j.at("client").get<std::uint32_t>();
    row.y = j.at("y").get<double>();
    row.participant = j.value("participant", true);
    row.record = record_from_json(j);
    if (j.contains("kernels")) {
        for (const auto& k : j.at("kernels")) row.kernels.push_back(record_from_json(k));
    }
    return row;
}

Json to_json(const Regret& regret) {
    Json j = Json::object();
    j["global_clipped"] = regret.global_clipped;
    j["global_raw"] = regret.global_raw;
    j["client_clipped"] = regret.client_clipped;
    j["client_raw"] = regret.client_raw;
    return j;
}

Json to_json(const BoundReport& r) {
    Json j = Json::object();
    j["id"] = std::string(to_string(r.id));
    if (r.client) j["client"] = *r.client;
    Json params = Json::object();
    for (const auto& [k, v] : r.params) params[k] = v;
    j["params"] = std::move(params);
    j["bound"] = r.bound;
    if (r.bound_alt) j["bound_alt"] = *r.bound_alt;
    j["measured_clipped"] = r.measured_clipped;
    j["measured_raw"] = r.measured_raw;
    j["satisfied"] = r.satisfied;
    return j;
}

Json to_json(const SummaryRecord& s) {
    Json j = Json::object();
    auto agg = [](const Aggregate& a) { return Json{{"mean", a.mean}, {"std", a.std}}; };
    Json clients = Json::array();
    for (const auto& c : s.clients) {
        Json cj = Json::object();
        cj["client"] = c.client;
        cj["mse"] = c.mse;
        if (c.accuracy) cj["accuracy"] = *c.accuracy;
        cj["loss_clipped"] = c.loss_clipped;
        cj["loss_raw"] = c.loss_raw;
        clients.push_back(std::move(cj));
    }
    j["clients"] = std::move(clients);
    Json a = Json::object();
    a["std_convention"] = "population";
    a["mse"] = agg(s.mse);
    if (s.accuracy) a["accuracy"] = agg(*s.accuracy);
    a["loss_clipped"] = agg(s.loss_clipped);
    a["loss_raw"] = agg(s.loss_raw);
    j["aggregate"] = std::move(a);
    Json regret = Json::object();
    if (s.convex_regret) regret["global_parameter"] = to_json(*s.convex_regret);
    if (s.personal_regret) regret["personal_parameter"] = to_json(*s.personal_regret);
    if (s.finite_regret) regret["finite_set"] = to_json(*s.finite_regret);
    if (!regret.empty()) j["regret"] = std::move(regret);
    if (!s.bounds.empty()) {
        Json b = Json::array();
        for (const auto& r : s.bounds) b.push_back(to_json(r));
        j["bounds"] = std::move(b);
    }
    return j;
}

}  // namespace detail

Aggregate aggregate(const std::vector<double>& values) {
    Aggregate a;
    if (values.empty()) return a;
    double sum = 0.0;
    for (double v : values) sum += v;
    a.mean = sum / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.std = std::sqrt(ss / static_cast<double>(values.size()));
    return a;
}

SummaryRecord summarize(const RegretLedger& ledger, const SummaryOptions& options) {
    if (ledger.empty()) throw std::invalid_argument("summarize: empty ledger");
    const std::size_t N = ledger.num_clients;
    const std::size_t T = ledger.horizon();
    SummaryRecord s;
    s.clients.resize(N);
    std::vector<double> sq(N, 0.0), hits(N, 0.0);
    for (const auto& row : ledger.rows) {
        auto& c = s.clients[row.client];
        const double e = row.record.pred_final - row.y;
        sq[row.client] += e * e;
        c.loss_clipped += row.record.loss_final.clipped;
        c.loss_raw += row.record.loss_final.raw;
        if (options.classification) {
            const double label = row.record.pred_final >= 0.5 ? 1.0 : 0.0;
            if (label == row.y) hits[row.client] += 1.0;
        }
    }
    std::vector<double> mse(N), acc(N), lc(N), lr(N);
    for (std::size_t i = 0; i < N; ++i) {
        auto& c = s.clients[i];
        c.client = i;
        c.mse = sq[i] / static_cast<double>(T);
        if (options.classification) c.accuracy = hits[i] / static_cast<double>(T);
        mse[i] = c.mse;
        acc[i] = hits[i] / static_cast<double>(T);
        lc[i] = c.loss_clipped;
        lr[i] = c.loss_raw;
    }
    s.mse = aggregate(mse);
    if (options.classification) s.accuracy = aggregate(acc);
    s.loss_clipped = aggregate(lc);
    s.loss_raw = aggregate(lr);

    if (options.convex_comparator) {
        s.convex_regret = compute_regret(ledger, *options.convex_comparator);
        s.convex_trace = regret_trace(ledger, *options.convex_comparator);
    }
    if (options.personal_comparator) s.personal_regret = compute_regret(ledger, *options.personal_comparator);
    if (options.finite_comparator) {
        s.finite_regret = compute_regret(ledger, *options.finite_comparator);
        s.finite_trace = regret_trace(ledger, *options.finite_comparator);
    }
    return s;
}

std::string ledger_to_jsonl(const RegretLedger& ledger) {
    std::string out;
    for (const auto& row : ledger.rows) {
        out += detail::to_json(row).dump();
        out += '\n';
    }
    return out;
}

RegretLedger ledger_from_jsonl(const std::string& text) {
    RegretLedger ledger;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    std::uint32_t max_client = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            ledger.rows.push_back(detail::row_from_json(detail::Json::parse(line)));
        } catch (const std::exception& e) {
            throw std::invalid_argument("ledger line " + std::to_string(lineno) + ": " + e.what());
        }
        max_client = std::max(max_client, ledger.rows.back().client);
    }
    ledger.num_clients = ledger.rows.empty() ? 0 : max_client + 1;
    return ledger;
}

std::string trace_to_csv(const RegretTrace& trace, const TraceBounds& bounds) {
    std::string out = "t,R_t_clipped,R_t_raw,bound_T1,bound_T2,bound_T3\n";
    auto cell = [](const std::vector<std::optional<double>>& v, std::size_t k) {
        return k < v.size() && v[k] ? detail::format_double(*v[k]) : std::string();
    };
    for (std::size_t k = 0; k < trace.clipped.size(); ++k) {
        out += std::to_string(k + 1);
        out += ',' + detail::format_double(trace.clipped[k]);
        out += ',' + detail::format_double(trace.raw[k]);
        out += ',' + cell(bounds.t1, k);
        out += ',' + cell(bounds.t2, k);
        out += ',' + cell(bounds.t3, k);
        out += '\n';
    }
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::error_code ec;
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw IoError(path.parent_path().string() + ": " + ec.message());
    }
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError(path.string() + ": cannot open for writing");
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!os) throw IoError(path.string() + ": write failed");
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError(path.string() + ": cannot open for reading");
    std::stringstream buf;
    buf << is.rdbuf();
    return buf.str();
}

}  // namespace fedpoe
