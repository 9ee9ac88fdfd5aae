#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "voltvar/cli.hpp"
#include "voltvar/errors.hpp"
#include "voltvar/io.hpp"

using namespace voltvar;
namespace fs = std::filesystem;

namespace {

const std::string kData = VOLTVAR_DATA_DIR;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("voltvar_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) { return read_text_file(path); }

void write(const std::string& path, const std::string& text) { write_text_file(path, text); }

std::vector<std::string> inputs(const std::string& rules = kData + "/ders8.json") {
  return {"--feeder", kData + "/feeder8.json", "--rules", rules, "--scenarios", kData + "/scenarios8.csv"};
}

std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("number formatting round-trips") {
  for (double x : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0})
    CHECK(std::stod(format_double(x)) == x);
}

TEST_CASE("feeder files") {
  TempDir tmp;
  const auto m = load_feeder(kData + "/feeder8.json");
  CHECK(m.size() == 8);
  CHECK(m.single_phase());
  // Explicit form written by the library loads back to the same matrices.
  write(tmp / "x.json", feeder_to_json(m).dump());
  const auto again = load_explicit_model(tmp / "x.json");
  CHECK(again.reactance() == m.reactance());
  CHECK(again.resistance() == m.resistance());

  write(tmp / "mp.json", R"({"kind":"multiphase","v0":1.0,"R":[[0,0],[0,0]],"X":[[0.4,-0.1],[-0.2,0.5]],"phases":["A","B"]})");
  CHECK_FALSE(load_explicit_model(tmp / "mp.json").single_phase());
  write(tmp / "skew.json", R"({"kind":"multiphase","v0":1.0,"R":[[0,0],[0,0]],"X":[[0,1],[-1,0]],"phases":["A","B"]})");
  CHECK_THROWS_AS(load_explicit_model(tmp / "skew.json"), ValidationError);
  write(tmp / "dims.json", R"({"kind":"multiphase","v0":1.0,"R":[[0]],"X":[[0.4,-0.1],[-0.2,0.5]],"phases":["A","B"]})");
  CHECK_THROWS_AS(load_explicit_model(tmp / "dims.json"), ParseError);
  write(tmp / "bad.json", "{ not json");
  CHECK_THROWS_AS(load_feeder(tmp / "bad.json"), ParseError);
}

TEST_CASE("rule and scenario files round-trip") {
  TempDir tmp;
  const auto m = load_feeder(kData + "/feeder8.json");
  const auto r = load_rules(kData + "/ders8.json");
  write(tmp / "r.json", rules_to_json(r).dump());
  const auto r2 = load_rules(tmp / "r.json");
  CHECK(r2.vref == r.vref);
  CHECK(r2.sigma == r.sigma);
  CHECK(r2.qbar == r.qbar);
  CHECK(r2.der_mask == r.der_mask);

  const auto set = load_scenarios(kData + "/scenarios8.csv", m);
  CHECK(set.size() == 20);
  std::ostringstream csv;
  write_scenarios_csv(csv, set);
  std::istringstream in(csv.str());
  const auto set2 = parse_scenarios(in, m, "roundtrip");
  for (std::size_t s = 0; s < set.size(); ++s) CHECK(set2.scenarios[s].vtilde == set.scenarios[s].vtilde);

  std::istringstream broken("vtilde_1,vtilde_2\n1.0,abc\n");
  try {
    parse_csv(broken, "broken.csv");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("broken.csv") != std::string::npos);
    CHECK(std::string(e.what()).find('2') != std::string::npos);
  }
}

TEST_CASE("command exit codes") {
  TempDir tmp;
  CHECK(run({"feeder-validate", "--feeder", kData + "/feeder8.json"}).code == kExitOk);
  const auto missing = run({"simulate", "--feeder", kData + "/feeder8.json", "--rules", kData + "/ders8.json",
                            "--scenarios", tmp / "nope.csv"});
  CHECK(missing.code == kExitInput);
  CHECK(missing.err.find("nope.csv") != std::string::npos);
  CHECK(run({"stability"}).code == kExitInput);
  CHECK(run({"bogus-command"}).code == kExitInput);
  CHECK(run({"design", "--epsilon", "1.5"}).code == kExitInput);

  // A rule whose DER has no capability leaves nothing to design.
  auto r = load_rules(kData + "/ders8.json");
  const auto ders = der_indices(r.der_mask);
  r.qhat(ders[0]) = 0.0;
  r.qbar(ders[0]) = 0.0;
  write(tmp / "zero.json", rules_to_json(r).dump());
  const auto infeasible = run(cat({"design", "--epochs", "1"}, inputs(tmp / "zero.json")));
  CHECK(infeasible.code == kExitInfeasible);
}

TEST_CASE("unstable rule simulates without converging") {
  TempDir tmp;
  write(tmp / "f.json", R"({"root":"0","v0":1.0,"lines":[{"from":"0","to":"1","r":0,"x":0.1},{"from":"1","to":"2","r":0,"x":0.1}]})");
  write(tmp / "r.json",
        R"({"vref":[1,1],"delta":[0,0],"sigma":[0.1,0.1],"qbar":[1,1],"qhat":[1,1],"der_mask":[true,true]})");
  write(tmp / "s.csv", "vtilde_1,vtilde_2\n1.05,1.05\n");
  const auto base = std::vector<std::string>{"--feeder", tmp / "f.json", "--rules", tmp / "r.json", "--scenarios", tmp / "s.csv"};
  const auto sim = run(cat({"simulate", "--steps", "100", "--out", tmp / "trace.csv", "--summary", tmp / "sum.json"}, base));
  CHECK(sim.code == kExitOk);
  CHECK(Json::parse(slurp(tmp / "sum.json"))["converged"] == false);
  std::istringstream trace(slurp(tmp / "trace.csv"));
  const auto table = parse_csv(trace, "trace");
  CHECK(table.header.size() == 5);
  CHECK(table.rows.size() == 101);
  CHECK(fs::exists(tmp / "trace.csv.manifest.json"));
  CHECK(run(cat({"equilibrium"}, base)).code == kExitNoConvergence);
}

TEST_CASE("bundled pipeline") {
  TempDir tmp;
  const auto stab = run(cat({"stability", "--epsilon", "0.3", "--out", tmp / "cert.json"}, {"--feeder", kData + "/feeder8.json", "--rules", kData + "/ders8.json"}));
  REQUIRE(stab.code == kExitOk);
  const auto cert = Json::parse(slurp(tmp / "cert.json"));
  CHECK(cert.contains("spectral_norm"));
  CHECK(cert.contains("min_depth_for"));
  const auto manifest = Json::parse(slurp(tmp / "cert.json.manifest.json"));
  CHECK(manifest["command"] == "stability");
  CHECK(manifest["inputs"].size() == 2);

  for (const char* method : {"fixed-point", "coordinate-descent", "region-enumeration"})
    CHECK(run(cat({"equilibrium", "--method", method}, inputs())).code == kExitOk);
  CHECK(run(cat({"verify", "--minlp", tmp / "ord.txt"}, inputs())).code == kExitOk);
  CHECK(fs::file_size(tmp / "ord.txt") > 0);

  const auto design = cat({"design", "--epochs", "3", "--seed", "5", "--depth", "10"}, inputs());
  REQUIRE(run(cat(design, {"--out", tmp / "a.json", "--report", tmp / "ra.json"})).code == kExitOk);
  REQUIRE(run(cat(design, {"--out", tmp / "b.json", "--report", tmp / "rb.json", "--threads", "2"})).code == kExitOk);
  CHECK(slurp(tmp / "a.json") == slurp(tmp / "b.json"));
  CHECK(slurp(tmp / "ra.json") == slurp(tmp / "rb.json"));
  const auto rep = Json::parse(slurp(tmp / "ra.json"));
  CHECK(rep["loss_per_epoch"].size() == 3);
  CHECK(rep.contains("certificate"));
  CHECK(rep.contains("final_params"));

  const auto zero = run(cat({"design", "--epochs", "0", "--out", tmp / "z.json"}, inputs()));
  REQUIRE(zero.code == kExitOk);
  const auto z = load_rules(tmp / "z.json");
  CHECK(validate(z, 1e-9).ok());

  const auto ev = run(cat({"evaluate", "--out", tmp / "ev.json"}, inputs(tmp / "a.json")));
  CHECK(ev.code == kExitOk);
  const auto evj = Json::parse(slurp(tmp / "ev.json"));
  CHECK(evj["default_rule"]["objective"].get<double>() < evj["no_compensation"]["objective"].get<double>());

  CHECK(run(cat({"profile", "--out", tmp / "p.csv"}, inputs(tmp / "a.json"))).code == kExitOk);
  std::istringstream prof(slurp(tmp / "p.csv"));
  const auto pt = parse_csv(prof, "profile");
  CHECK(pt.rows.size() == 8 * 20);
}

TEST_CASE("profile with zero capability has identical columns") {
  TempDir tmp;
  auto r = load_rules(kData + "/ders8.json");
  r.qbar.setZero();
  r.qhat.setZero();
  write(tmp / "r.json", rules_to_json(r).dump());
  REQUIRE(run(cat({"profile", "--out", tmp / "p.csv"}, inputs(tmp / "r.json"))).code == kExitOk);
  std::istringstream prof(slurp(tmp / "p.csv"));
  for (const auto& row : parse_csv(prof, "profile").rows) {
    CHECK(row[2] == row[3]);
    CHECK(row[2] == row[4]);
  }
}

TEST_CASE("oracle command") {
  TempDir tmp;
  auto r = load_rules(kData + "/ders8.json");
  const auto ders = der_indices(r.der_mask);
  for (std::size_t k = 1; k < ders.size(); ++k) r.der_mask[static_cast<std::size_t>(ders[k])] = false;
  write(tmp / "one.json", rules_to_json(r).dump());
  const auto res = run(cat({"oracle", "--vref-points", "3", "--delta-points", "2", "--alpha-points", "3",
                            "--qbar-points", "2", "--out", tmp / "best.json", "--log", tmp / "grid.csv"},
                           inputs(tmp / "one.json")));
  REQUIRE(res.code == kExitOk);
  std::istringstream log(slurp(tmp / "grid.csv"));
  const auto t = parse_csv(log, "grid");
  CHECK(t.header.size() == 5);
  CHECK(!t.rows.empty());
  CHECK(validate(load_rules(tmp / "best.json")).ok());
}
