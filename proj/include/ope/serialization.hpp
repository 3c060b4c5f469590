#pragma once

// JSON instance files, JSONL datasets, and JSON views of reports.

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "ope/adversarial.hpp"
#include "ope/diagnostics.hpp"
#include "ope/mdp.hpp"
#include "ope/moments.hpp"

namespace ope {

using Json = nlohmann::ordered_json;

Json matrix_to_json(const Matrix& m);
Json vector_to_json(const Vector& v);

Json reward_to_json(const RewardSpec& r);
RewardSpec reward_from_json(const Json& j, const std::string& path);

/// {name, n_states, n_actions, gamma, transitions[s][a][s'], rewards, policy, features{d, phi}, offline, reward_bound}
Json instance_to_json(const OpeInstance& inst);
/// Throws SchemaError naming the offending field; the result is validated.
OpeInstance instance_from_json(const Json& j);

/// Parses text, reporting JSON syntax errors with their line number.
Json parse_json_text(const std::string& text, const std::string& source);
OpeInstance load_instance(const std::string& path);
void save_instance(const OpeInstance& inst, const std::string& path);

void write_dataset_jsonl(const Dataset& data, std::ostream& os);
Dataset read_dataset_jsonl(std::istream& is, const std::string& source);

Json moments_to_json(const MomentSet& m);
Json regularity_to_json(const RegularityReport& r);
/// Stable field order; absent optional values serialize as null.
Json diagnostics_to_json(const DiagnosticsReport& r);
Json twin_report_to_json(const TwinConstruction& tc);
Json misspec_to_json(const MisspecReport& r);

}  // namespace ope
