#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fedpoe {

enum class BoundId {
    T1,          // federated OGD vs best global parameter
    T2Global,    // pair ensemble vs best global parameter
    T2Personal,  // pair ensemble vs each client's best parameter
    T3Global,    // full ensemble vs best member of the finite set (expected)
    T3Personal,  // full ensemble vs each client's best member (expected)
    LPersonal,   // local OGD vs each client's best parameter
};

std::string_view to_string(BoundId id);
std::optional<BoundId> parse_bound_id(std::string_view text);

/// Inputs to the closed-form bounds. Each bound reads only the fields it
/// needs and rejects the call when one of them is missing.
struct BoundParams {
    std::optional<double> eta;
    std::optional<double> eta_c;
    std::optional<double> G;
    std::optional<double> comparator_norm;  // ||theta*|| or ||phi_i*||
    std::optional<double> T;
    std::optional<double> n;
    std::optional<double> U;
    std::optional<double> D;  // actual store size
};

struct BoundValue {
    double primary = 0.0;
    /// T3 only: the form written in terms of U / n instead of the store size.
    std::optional<double> alternate;
};

/// Throws std::invalid_argument naming the missing parameters.
BoundValue regret_bound(BoundId id, const BoundParams& params);

struct BoundReport {
    BoundId id = BoundId::T1;
    std::optional<std::size_t> client;  // personal bounds only
    std::vector<std::pair<std::string, double>> params;
    double bound = 0.0;
    std::optional<double> bound_alt;
    double measured_clipped = 0.0;
    double measured_raw = 0.0;
    bool satisfied = false;
};

BoundReport make_report(BoundId id, std::optional<std::size_t> client, const BoundParams& params,
                        double measured_clipped, double measured_raw);

}  // namespace fedpoe
