#pragma once

#include <json.hpp>

#include "fedpoe/bounds.hpp"
#include "fedpoe/hindsight.hpp"
#include "fedpoe/ledger.hpp"
#include "fedpoe/metrics.hpp"

namespace fedpoe::detail {

using Json = nlohmann::ordered_json;

Json to_json(const LossPair& loss);
Json to_json(const ComponentRecord& rec);
Json to_json(const LedgerRow& row);
Json to_json(const Regret& regret);
Json to_json(const BoundReport& report);
Json to_json(const SummaryRecord& summary);

LossPair loss_from_json(const Json& j);
ComponentRecord record_from_json(const Json& j);
LedgerRow row_from_json(const Json& j);

/// Shortest decimal that reads back to the same double.
std::string format_double(double v);

}  // namespace fedpoe::detail
