#include "voltvar/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "voltvar/errors.hpp"

namespace voltvar {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

Matrix matrix_from_json(const Json& j, const std::string& what, const std::string& source) {
  if (!j.is_array() || j.empty()) throw ParseError(source + ": " + what + " must be a non-empty array of rows");
  const Index rows = static_cast<Index>(j.size());
  Index cols = -1;
  Matrix m;
  for (Index r = 0; r < rows; ++r) {
    const Json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array()) throw ParseError(source + ": " + what + " row " + std::to_string(r + 1) + " is not an array");
    if (cols < 0) {
      cols = static_cast<Index>(row.size());
      m.resize(rows, cols);
    } else if (static_cast<Index>(row.size()) != cols) {
      throw ParseError(source + ": " + what + " row " + std::to_string(r + 1) + " has " +
                       std::to_string(row.size()) + " entries, expected " + std::to_string(cols));
    }
    for (Index c = 0; c < cols; ++c) {
      const Json& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) throw ParseError(source + ": " + what + " entry (" + std::to_string(r + 1) + "," + std::to_string(c + 1) + ") is not a number");
      m(r, c) = v.get<double>();
    }
  }
  return m;
}

Json matrix_to_json(const Matrix& m) {
  Json out = Json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

double parse_number(const std::string& text, const std::string& where) {
  const std::string t = trim(text);
  if (t == "nan" || t == "NaN") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size())
    throw ParseError(where + ": '" + t + "' is not a number");
  return v;
}

template <class Fn>
auto wrap_json(const std::string& source, Fn&& fn) {
  try {
    return fn();
  } catch (const Json::exception& e) {
    throw ParseError(source + ": " + e.what());
  }
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path + ": cannot open file");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Json read_json_file(const std::string& path) {
  const std::string text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    // Byte offset to line number.
    std::size_t line = 1;
    for (std::size_t i = 0; i < std::min(e.byte, text.size()); ++i)
      if (text[i] == '\n') ++line;
    throw ParseError(path + ":" + std::to_string(line) + ": invalid JSON (" + e.what() + ")");
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError(path + ": cannot write file");
  out << text;
  if (!out) throw ParseError(path + ": write failed");
}

void write_json_file(const std::string& path, const Json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) {
    if (std::isfinite(v(i)))
      out.push_back(v(i));
    else
      out.push_back(nullptr);
  }
  return out;
}

Vector vector_from_json(const Json& j, const std::string& what) {
  if (!j.is_array()) throw ParseError(what + " must be an array of numbers");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ParseError(what + " entry " + std::to_string(i + 1) + " is not a number");
    v(static_cast<Index>(i)) = j[i].get<double>();
  }
  return v;
}

FeederModel feeder_from_json(const Json& j, const std::string& source) {
  return wrap_json(source, [&]() -> FeederModel {
    if (!j.is_object()) throw ParseError(source + ": feeder file must be a JSON object");
    const double v0 = j.value("v0", 1.0);
    if (j.contains("lines")) {
      if (!j.contains("root")) throw ParseError(source + ": topology file needs \"root\"");
      std::vector<Line> lines;
      const Json& arr = j.at("lines");
      if (!arr.is_array()) throw ParseError(source + ": \"lines\" must be an array");
      for (std::size_t k = 0; k < arr.size(); ++k) {
        const Json& e = arr[k];
        auto node_name = [&](const char* key) {
          const Json& v = e.at(key);
          if (v.is_string()) return v.get<std::string>();
          if (v.is_number_integer()) return std::to_string(v.get<long long>());
          throw ParseError(source + ": line " + std::to_string(k + 1) + " has a bad \"" + key + "\"");
        };
        lines.push_back({node_name("from"), node_name("to"), e.at("r").get<double>(), e.at("x").get<double>()});
      }
      const Json& root = j.at("root");
      const std::string root_name = root.is_string() ? root.get<std::string>() : std::to_string(root.get<long long>());
      return build_radial_sensitivities(lines, root_name, v0);
    }
    if (!j.contains("X")) throw ParseError(source + ": feeder file needs \"lines\" or \"X\"");
    const Matrix x = matrix_from_json(j.at("X"), "X", source);
    Matrix r = j.contains("R") ? matrix_from_json(j.at("R"), "R", source) : Matrix::Zero(x.rows(), x.cols());
    if (r.rows() != x.rows() || r.cols() != x.cols() || x.rows() != x.cols())
      throw ParseError(source + ": R and X must be square with identical dimensions");
    std::vector<std::string> labels;
    if (j.contains("labels")) labels = j.at("labels").get<std::vector<std::string>>();
    const std::string kind = j.value("kind", std::string("single-phase"));
    if (kind == "single-phase" || kind == "single" || kind == "single_phase")
      return FeederModel::single_phase(std::move(r), x, v0, labels);
    if (kind == "multiphase" || kind == "multi-phase") {
      std::vector<std::string> phases;
      if (j.contains("phases")) phases = j.at("phases").get<std::vector<std::string>>();
      return FeederModel::multiphase(std::move(r), x, v0, phases, labels);
    }
    throw ParseError(source + ": unknown feeder kind '" + kind + "'");
  });
}

FeederModel load_feeder(const std::string& path) { return feeder_from_json(read_json_file(path), path); }

FeederModel load_explicit_model(const std::string& path) {
  const Json j = read_json_file(path);
  if (j.is_object() && j.contains("lines"))
    throw ParseError(path + ": expected an explicit model with \"X\", found a topology file");
  return feeder_from_json(j, path);
}

Json feeder_to_json(const FeederModel& model) {
  Json j;
  j["kind"] = model.single_phase() ? "single-phase" : "multiphase";
  j["v0"] = model.v0();
  j["R"] = matrix_to_json(model.resistance());
  j["X"] = matrix_to_json(model.reactance());
  j["phases"] = model.phases();
  j["labels"] = model.labels();
  return j;
}

RuleParams rules_from_json(const Json& j, const std::string& source) {
  return wrap_json(source, [&]() -> RuleParams {
    if (!j.is_object()) throw ParseError(source + ": rule file must be a JSON object");
    const std::string pname = j.value("parameterization", to_string(Parameterization::VrefDeltaSigmaQbar));
    Parameterization kind;
    try {
      kind = parameterization_from_string(pname);
    } catch (const ValidationError& e) {
      throw ParseError(source + ": " + e.what());
    }
    const auto names = split(pname, ',');
    RuleCoordinates coords;
    coords.kind = kind;
    for (std::size_t k = 0; k < 4; ++k) {
      if (!j.contains(names[k])) throw ParseError(source + ": missing \"" + names[k] + "\"");
      coords.blocks[k] = vector_from_json(j.at(names[k]), source + ": \"" + names[k] + "\"");
    }
    const Index n = coords.blocks[0].size();
    for (std::size_t k = 1; k < 4; ++k)
      if (coords.blocks[k].size() != n)
        throw ParseError(source + ": \"" + names[k] + "\" has " + std::to_string(coords.blocks[k].size()) +
                         " entries, \"" + names[0] + "\" has " + std::to_string(n));
    Vector qhat;
    if (j.contains("qhat")) {
      qhat = vector_from_json(j.at("qhat"), source + ": \"qhat\"");
    } else if (kind == Parameterization::VrefDeltaSigmaQbar || kind == Parameterization::VrefAlphaDeltaQbar ||
               kind == Parameterization::VrefCDeltaQbar) {
      qhat = coords.blocks[3];
    } else {
      throw ParseError(source + ": missing \"qhat\"");
    }
    if (qhat.size() != n) throw ParseError(source + ": \"qhat\" length differs from the rule blocks");
    DerMask mask = all_ders(n);
    if (j.contains("der_mask")) {
      const Json& m = j.at("der_mask");
      if (!m.is_array() || static_cast<Index>(m.size()) != n)
        throw ParseError(source + ": \"der_mask\" must be an array of length " + std::to_string(n));
      for (std::size_t i = 0; i < m.size(); ++i) {
        if (m[i].is_boolean()) mask[i] = m[i].get<bool>();
        else if (m[i].is_number()) mask[i] = m[i].get<double>() != 0.0;
        else throw ParseError(source + ": \"der_mask\" entry " + std::to_string(i + 1) + " is not a boolean");
      }
    }
    try {
      RuleParams p = from_coordinates(coords, qhat, mask);
      p.check_structure();
      return p;
    } catch (const ValidationError& e) {
      throw ParseError(source + ": " + e.what());
    }
  });
}

RuleParams load_rules(const std::string& path) { return rules_from_json(read_json_file(path), path); }

Json rules_to_json(const RuleParams& params) {
  Json j;
  j["parameterization"] = to_string(Parameterization::VrefDeltaSigmaQbar);
  j["vref"] = vector_to_json(params.vref);
  j["delta"] = vector_to_json(params.delta);
  j["sigma"] = vector_to_json(params.sigma);
  j["qbar"] = vector_to_json(params.qbar);
  j["qhat"] = vector_to_json(params.qhat);
  Json mask = Json::array();
  for (bool b : params.der_mask) mask.push_back(b);
  j["der_mask"] = mask;
  return j;
}

CsvTable parse_csv(std::istream& in, const std::string& source) {
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty() || trim(line)[0] == '#') continue;
    auto cells = split(line, ',');
    if (t.header.empty()) {
      for (auto& c : cells) t.header.push_back(trim(c));
      continue;
    }
    if (cells.size() != t.header.size())
      throw ParseError(source + ":" + std::to_string(lineno) + ": " + std::to_string(cells.size()) +
                       " fields, header has " + std::to_string(t.header.size()));
    std::vector<double> row;
    row.reserve(cells.size());
    for (std::size_t k = 0; k < cells.size(); ++k)
      row.push_back(parse_number(cells[k], source + ":" + std::to_string(lineno) + " column " + t.header[k]));
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw ParseError(source + ": empty CSV file");
  return t;
}

void write_csv(std::ostream& out, const CsvTable& table) {
  for (std::size_t k = 0; k < table.header.size(); ++k) out << (k ? "," : "") << table.header[k];
  out << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t k = 0; k < row.size(); ++k) out << (k ? "," : "") << format_double(row[k]);
    out << "\n";
  }
}

ScenarioSet parse_scenarios(std::istream& in, const FeederModel& model, const std::string& source) {
  const CsvTable t = parse_csv(in, source);
  const Index n = model.size();
  std::map<std::string, std::size_t> col;
  for (std::size_t k = 0; k < t.header.size(); ++k) col[t.header[k]] = k;
  auto columns = [&](const std::string& prefix) {
    std::vector<std::size_t> idx;
    for (Index i = 1; i <= n; ++i) {
      auto it = col.find(prefix + std::to_string(i));
      if (it == col.end()) return std::vector<std::size_t>{};
      idx.push_back(it->second);
    }
    return idx;
  };
  auto count_prefix = [&](const std::string& prefix) {
    std::size_t c = 0;
    for (const auto& h : t.header)
      if (h.rfind(prefix, 0) == 0) ++c;
    return c;
  };

  ScenarioSet set;
  set.source = source;
  const auto vt = columns("vtilde_");
  const auto pg = columns("p_g_"), pl = columns("p_l_"), ql = columns("q_l_");
  const bool has_vt = count_prefix("vtilde_") > 0;
  if (has_vt) {
    if (vt.empty() || count_prefix("vtilde_") != static_cast<std::size_t>(n))
      throw ParseError(source + ": expected columns vtilde_1..vtilde_" + std::to_string(n) +
                       " for a feeder with " + std::to_string(n) + " nodes");
  } else if (pg.empty() || pl.empty() || ql.empty() || count_prefix("p_g_") != static_cast<std::size_t>(n)) {
    throw ParseError(source + ": expected columns p_g_1..p_g_" + std::to_string(n) + ", p_l_*, q_l_* or vtilde_1..vtilde_" +
                     std::to_string(n) + " for a feeder with " + std::to_string(n) + " nodes");
  }
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    for (double v : row)
      if (!std::isfinite(v)) throw ParseError(source + ": data row " + std::to_string(r + 1) + " has a non-finite value");
    if (has_vt) {
      Vector v(n);
      for (Index i = 0; i < n; ++i) v(i) = row[vt[static_cast<std::size_t>(i)]];
      set.scenarios.push_back(scenario_from_vtilde(model, std::move(v)));
    } else {
      Vector a(n), b(n), c(n);
      for (Index i = 0; i < n; ++i) {
        a(i) = row[pg[static_cast<std::size_t>(i)]];
        b(i) = row[pl[static_cast<std::size_t>(i)]];
        c(i) = row[ql[static_cast<std::size_t>(i)]];
      }
      set.scenarios.push_back(make_scenario(model, a, b, c));
    }
  }
  if (set.scenarios.empty()) throw ParseError(source + ": no scenario rows");
  return set;
}

ScenarioSet load_scenarios(const std::string& path, const FeederModel& model) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  return parse_scenarios(in, model, path);
}

void write_scenarios_csv(std::ostream& out, const ScenarioSet& set) {
  CsvTable t;
  const Index n = set.empty() ? 0 : set.scenarios.front().vtilde.size();
  for (Index i = 1; i <= n; ++i) t.header.push_back("vtilde_" + std::to_string(i));
  for (const auto& s : set.scenarios) t.rows.emplace_back(s.vtilde.data(), s.vtilde.data() + s.vtilde.size());
  write_csv(out, t);
}

CsvTable trace_table(const DynamicsTrace& trace) {
  CsvTable t;
  const Index n = trace.setpoints.empty() ? 0 : trace.setpoints.front().size();
  t.header.push_back("t");
  for (Index i = 1; i <= n; ++i) t.header.push_back("q_" + std::to_string(i));
  for (Index i = 1; i <= n; ++i) t.header.push_back("v_" + std::to_string(i));
  for (std::size_t k = 0; k < trace.setpoints.size(); ++k) {
    std::vector<double> row{static_cast<double>(k)};
    const Vector& q = trace.setpoints[k];
    const Vector& v = trace.voltages[k];
    row.insert(row.end(), q.data(), q.data() + q.size());
    row.insert(row.end(), v.data(), v.data() + v.size());
    t.rows.push_back(std::move(row));
  }
  return t;
}

Json certificate_to_json(const StabilityCertificate& cert) {
  Json j;
  j["epsilon"] = cert.epsilon;
  j["spectral_norm"] = cert.spectral_norm;
  j["spectral_pass"] = cert.spectral_pass;
  j["polytopic_pass"] = cert.polytopic_pass;
  j["kind"] = to_string(cert.kind);
  return j;
}

Json equilibrium_to_json(const EquilibriumResult& eq) {
  Json j;
  j["method"] = to_string(eq.method);
  j["q_star"] = vector_to_json(eq.q_star);
  j["v_star"] = vector_to_json(eq.v_star);
  j["objective"] = eq.objective ? Json(*eq.objective) : Json(nullptr);
  j["kkt_residual"] = std::isfinite(eq.kkt_residual) ? Json(eq.kkt_residual) : Json(nullptr);
  j["fixed_point_residual"] = eq.fixed_point_residual;
  j["iterations"] = eq.iterations;
  j["warnings"] = eq.warnings;
  return j;
}

Json train_report_to_json(const TrainReport& report, const TrainConfig& config) {
  Json cfg;
  cfg["step_size"] = config.step_size;
  cfg["batch_size"] = config.batch_size;
  cfg["epochs"] = config.epochs;
  cfg["epsilon"] = config.epsilon;
  cfg["optimizer"] = to_string(config.mode);
  cfg["beta1"] = config.beta1;
  cfg["beta2"] = config.beta2;
  cfg["adam_eps"] = config.adam_eps;
  cfg["alpha_floor"] = config.alpha_floor;
  cfg["seed"] = config.seed;
  cfg["depth"] = report.depth;
  cfg["depth_accuracy"] = config.depth_accuracy;
  cfg["adaptive_depth"] = config.adaptive_depth;
  cfg["keep_best"] = config.keep_best;

  Json j;
  j["loss_per_epoch"] = report.loss_per_epoch;
  j["displacement_per_epoch"] = report.displacement_per_epoch;
  j["residual_per_epoch"] = report.residual_per_epoch;
  j["initial_loss"] = report.initial_loss;
  j["best_epoch"] = report.best_epoch;
  j["clamp_count"] = report.clamp_count;
  j["initial_params"] = rules_to_json(report.initial_params);
  j["final_params"] = rules_to_json(report.final_params);
  j["certificate"] = certificate_to_json(report.certificate);
  j["config"] = cfg;
  return j;
}

}  // namespace voltvar
