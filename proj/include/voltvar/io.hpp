#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "voltvar/dynamics.hpp"
#include "voltvar/feeder.hpp"
#include "voltvar/rules.hpp"
#include "voltvar/stability.hpp"
#include "voltvar/trainer.hpp"

namespace voltvar {

using Json = nlohmann::ordered_json;

/// Shortest decimal text that parses back to the same double.
std::string format_double(double x);

std::string read_text_file(const std::string& path);
Json read_json_file(const std::string& path);
/// Pretty-printed with a trailing newline.
void write_json_file(const std::string& path, const Json& j);
void write_text_file(const std::string& path, const std::string& text);

/// Topology files carry "lines", explicit-model files carry "X".
FeederModel feeder_from_json(const Json& j, const std::string& source);
FeederModel load_feeder(const std::string& path);
FeederModel load_explicit_model(const std::string& path);
/// Explicit-model form {"kind","v0","R","X","phases"}.
Json feeder_to_json(const FeederModel& model);

/// Reads the four blocks named by "parameterization" (canonical form when absent).
RuleParams rules_from_json(const Json& j, const std::string& source);
RuleParams load_rules(const std::string& path);
/// Canonical (vref, delta, sigma, qbar) form plus qhat and der_mask.
Json rules_to_json(const RuleParams& params);

/// Header names p_g_1..N, p_l_1..N, q_l_1..N or vtilde_1..N; one scenario per row.
ScenarioSet parse_scenarios(std::istream& in, const FeederModel& model, const std::string& source);
ScenarioSet load_scenarios(const std::string& path, const FeederModel& model);
void write_scenarios_csv(std::ostream& out, const ScenarioSet& set);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};
/// Numeric CSV with a header row; "nan" is accepted.
CsvTable parse_csv(std::istream& in, const std::string& source);
void write_csv(std::ostream& out, const CsvTable& table);

/// Columns t, q_1..q_N, v_1..v_N.
CsvTable trace_table(const DynamicsTrace& trace);

Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j, const std::string& what);
Json certificate_to_json(const StabilityCertificate& cert);
Json equilibrium_to_json(const EquilibriumResult& eq);
Json train_report_to_json(const TrainReport& report, const TrainConfig& config);

}  // namespace voltvar
