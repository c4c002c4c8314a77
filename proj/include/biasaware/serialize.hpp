#pragma once

#include "biasaware/diagnostics.hpp"
#include "biasaware/efficiency.hpp"
#include "biasaware/errors.hpp"
#include "biasaware/inference.hpp"
#include "biasaware/simharness.hpp"

#include <json.hpp>

#include <string>
#include <utility>
#include <vector>

namespace biasaware {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

/// Compact JSON with every double printed at 17 significant digits and
/// non-finite numbers written as null. Field order is insertion order.
std::string dump_json(const Json& j);

/// {"schema_version": 1, "command": command}
Json envelope(const std::string& command);

Json to_json(const InferenceReport& r);
Json to_json(const SensitivityRow& r);
Json to_json(const Breakdown& b);
Json to_json(const CLowerCI& c);
Json to_json(const EfficiencyReport& e);
Json to_json(const CoverageSummary& s);  // summary statistics only
Json to_json(const RateCell& c);
Json to_json(const LowerCSummary& s);     // summary statistics only
Json to_json(const DoubleLassoResult& d);
Json r2_curve_json(const std::vector<std::pair<double, double>>& curve);

Json error_json(ErrorKind kind, const std::string& message);

}  // namespace biasaware
