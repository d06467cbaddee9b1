#include "fedpoe/bounds.hpp"

#include <cmath>
#include <stdexcept>

namespace fedpoe {

std::string_view to_string(BoundId id) {
    switch (id) {
        case BoundId::T1: return "T1";
        case BoundId::T2Global: return "T2-global";
        case BoundId::T2Personal: return "T2-personal";
        case BoundId::T3Global: return "T3-global";
        case BoundId::T3Personal: return "T3-personal";
        case BoundId::LPersonal: return "L-personal";
    }
    return "unknown";
}

std::optional<BoundId> parse_bound_id(std::string_view text) {
    for (BoundId id : {BoundId::T1, BoundId::T2Global, BoundId::T2Personal, BoundId::T3Global, BoundId::T3Personal,
                       BoundId::LPersonal}) {
        if (to_string(id) == text) return id;
    }
    return std::nullopt;
}

namespace {

struct Required {
    const BoundParams& p;
    BoundId id;
    std::string missing;

    double get(const std::optional<double>& v, const char* name) {
        if (!v) {
            missing += missing.empty() ? name : std::string(", ") + name;
            return 0.0;
        }
        return *v;
    }
    void check() const {
        if (!missing.empty()) {
            throw std::invalid_argument(std::string(to_string(id)) + " bound needs: " + missing);
        }
    }
};

double ogd_term(double norm, double eta, double G, double T) {
    return norm * norm / (2.0 * eta) + eta * G * G * T / 2.0;
}

double hedge_term(double eta_c, double T) { return std::log(2.0) / eta_c + eta_c * T / 2.0; }

}  // namespace

BoundValue regret_bound(BoundId id, const BoundParams& params) {
    Required req{params, id, {}};
    BoundValue out;
    switch (id) {
        case BoundId::T1:
        case BoundId::LPersonal: {
            const double norm = req.get(params.comparator_norm, "comparator_norm");
            const double eta = req.get(params.eta, "eta");
            const double G = req.get(params.G, "G");
            const double T = req.get(params.T, "T");
            req.check();
            out.primary = ogd_term(norm, eta, G, T);
            break;
        }
        case BoundId::T2Global:
        case BoundId::T2Personal: {
            const double norm = req.get(params.comparator_norm, "comparator_norm");
            const double eta = req.get(params.eta, "eta");
            const double eta_c = req.get(params.eta_c, "eta_c");
            const double G = req.get(params.G, "G");
            const double T = req.get(params.T, "T");
            req.check();
            out.primary = ogd_term(norm, eta, G, T) + hedge_term(eta_c, T);
            break;
        }
        case BoundId::T3Global:
        case BoundId::T3Personal: {
            const double eta_c = req.get(params.eta_c, "eta_c");
            const double T = req.get(params.T, "T");
            const double U = req.get(params.U, "U");
            const double D = req.get(params.D, "D");
            req.check();
            // The store-size form holds once at least two snapshots exist.
            if (D < 2.0) throw std::invalid_argument(std::string(to_string(id)) + " bound needs D >= 2");
            out.primary = std::log(2.0 * D) / eta_c + eta_c / 2.0 * (D + 1.0) * T + (1.0 - eta_c * D / 2.0) * U;
            if (params.n && *params.n > 0.0 && U >= *params.n) {
                const double n = *params.n;
                out.alternate = (std::log(2.0 * U) - std::log(2.0 * n)) / eta_c + eta_c / 2.0 * (U / n + 1.0) * T +
                                (1.0 - eta_c * U / (2.0 * n)) * U;
            }
            break;
        }
    }
    return out;
}

BoundReport make_report(BoundId id, std::optional<std::size_t> client, const BoundParams& params,
                        double measured_clipped, double measured_raw) {
    const BoundValue value = regret_bound(id, params);
    BoundReport r;
    r.id = id;
    r.client = client;
    auto put = [&](const char* name, const std::optional<double>& v) {
        if (v) r.params.emplace_back(name, *v);
    };
    put("eta", params.eta);
    put("eta_c", params.eta_c);
    put("G", params.G);
    put("comparator_norm", params.comparator_norm);
    put("T", params.T);
    put("n", params.n);
    put("U", params.U);
    put("D", params.D);
    r.bound = value.primary;
    r.bound_alt = value.alternate;
    r.measured_clipped = measured_clipped;
    r.measured_raw = measured_raw;
    r.satisfied = measured_clipped <= value.primary;
    return r;
}

}  // namespace fedpoe
