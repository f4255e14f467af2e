#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "asiplab/config.hpp"
#include "asiplab/experiments.hpp"
#include "asiplab/parallel.hpp"

using namespace asiplab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

// Every leaf path of a JSON document.
void leaves(const json& j, const std::string& path, std::vector<std::pair<std::string, json>>& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) leaves(it.value(), path.empty() ? it.key() : path + "." + it.key(), out);
  } else {
    out.emplace_back(path, j);
  }
}

json perturbed(const json& v) {
  if (v.is_boolean()) return !v.get<bool>();
  if (v.is_number_unsigned()) return v.get<std::uint64_t>() + 1;
  if (v.is_number_integer()) return v.get<std::int64_t>() + 1;
  if (v.is_number()) return v.get<double>() + 0.125;
  if (v.is_string()) return v.get<std::string>() + "x";
  json a = v;
  if (a.empty()) return json::array({0});
  a.push_back(a.back());
  return a;
}

ExperimentConfig small_thermo() {
  ExperimentConfig c;
  c.numerics.n_points = 128;
  c.experiment.thermo.x_samples = 3;
  c.experiment.thermo.u_samples = 4;
  c.experiment.thermo.regularity_pairs = 6;
  return c;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("asiplab-unit-" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_SUITE("report_cli") {
  TEST_CASE("defaults round trip") {
    const ExperimentConfig d;
    const ExperimentConfig again = parse_config(to_json_text(d));
    CHECK(to_json_text(again) == to_json_text(d));
    CHECK(config_hash(again) == config_hash(d));
    CHECK(config_hash(d).size() == 16);
    CHECK(to_json_text(parse_config("{}")) == to_json_text(d));
  }

  TEST_CASE("unknown keys name the key") {
    CHECK(message_of([] { parse_config(R"({"numerics": {"n_point": 12}})"); }).find("numerics.n_point") != std::string::npos);
    CHECK(message_of([] { parse_config(R"({"nonsense": 1})"); }).find("'nonsense'") != std::string::npos);
  }

  TEST_CASE("type mismatches name the key") {
    const std::string m = message_of([] { parse_config(R"({"numerics": {"n_points": "many"}})"); });
    CHECK(m.find("numerics.n_points") != std::string::npos);
    CHECK(m.find("string") != std::string::npos);
    CHECK_THROWS_AS(parse_config(R"({"numerics": {"n_points": 1.5}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"statistics": {"seed": -1}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"fiber": {"branch_count": [2, 2.5]}})"), ConfigError);
    CHECK_NOTHROW(parse_config(R"({"numerics": {"eps0": 1}})"));
  }

  TEST_CASE("malformed text reports line and column") {
    const std::string m = message_of([] { parse_config("{\n  \"numerics\": {\n    \"n_points\": ,\n  }\n}"); });
    CHECK(m.find("line 3") != std::string::npos);
    CHECK(m.find("column") != std::string::npos);
  }

  TEST_CASE("overrides") {
    ExperimentConfig c;
    apply_override(c, "statistics.seed=7");
    apply_override(c, "numerics.interp=linear");
    apply_override(c, "fiber.potential_amp=[0.2,0.3]");
    CHECK(c.statistics.seed == 7);
    CHECK(c.numerics.interp == "linear");
    CHECK(c.fiber.potential_amp == std::vector<double>{0.2, 0.3});
    CHECK(message_of([&] { apply_override(c, "statistics.sede=1"); }).find("statistics.sede") != std::string::npos);
    CHECK_THROWS_AS(apply_override(c, "noequals"), ConfigError);
    CHECK_THROWS_AS(apply_override(c, "a..b=1"), ConfigError);
  }

  TEST_CASE("hash covers every field") {
    const ExperimentConfig d;
    const std::string h0 = config_hash(d);
    std::vector<std::pair<std::string, json>> all;
    leaves(json::parse(to_json_text(d)), "", all);
    CHECK(all.size() > 60);
    for (const auto& [path, value] : all) {
      ExperimentConfig c;
      apply_override(c, path + "=" + perturbed(value).dump());
      INFO(path);
      CHECK(config_hash(c) != h0);
    }
  }

  TEST_CASE("system construction from config") {
    ExperimentConfig c;
    c.holder.xi = 0.1;
    c.holder.eta = 0.05;
    const SystemSpec s = make_system(c);
    CHECK(s.holder().xi == 0.1);
    CHECK(s.degree(1) == 3);
    c.fiber.observable_kind = "bogus";
    CHECK_THROWS_AS(make_observable(c), ConfigError);
  }

  TEST_CASE("subcommand list") {
    CHECK(subcommands().size() == 12);
    CHECK(is_subcommand("condition-h"));
    CHECK(is_subcommand("all"));
    CHECK_FALSE(is_subcommand("gapp"));
    CHECK_THROWS_AS(run_experiment("gapp", ExperimentConfig{}), std::invalid_argument);
  }

  TEST_CASE("thermo with zero potential") {
    ExperimentConfig c = small_thermo();
    c.fiber.potential_amp = {0.0, 0.0};
    const ExperimentReport r = run_experiment("thermo", c);
    CHECK(r.contract_ok);
    const json j = json::parse(r.json_text);
    const json chain = j.at("lambda_chain");
    const BasePoint x = sample_base(make_system(c).base_ptr(), derive_seed(c.statistics.seed, 11), 0);
    for (std::size_t k = 0; k < chain.size(); ++k) {
      const int d = c.fiber.branch_count[static_cast<std::size_t>(x.symbol(static_cast<std::int64_t>(k)))];
      CHECK(chain[k].get<double>() == doctest::Approx(d).epsilon(1e-12));
    }
    for (const auto& v : j.at("rho")) CHECK(std::abs(v.get<double>() - 1.0) <= 1e-10);
    CHECK(j.contains("config"));
    CHECK(j.at("config_hash") == config_hash(c));
    CHECK(j.contains("untested_claims"));
    CHECK_FALSE(j.contains("timestamp"));
  }

  TEST_CASE("reports are deterministic across thread caps") {
    const ExperimentConfig c = small_thermo();
    set_thread_cap(1);
    const ExperimentReport a = run_experiment("thermo", c);
    set_thread_cap(8);
    const ExperimentReport b = run_experiment("thermo", c);
    set_thread_cap(0);
    CHECK(a.json_text == b.json_text);
    CHECK(a.csv == b.csv);
  }

  TEST_CASE("write, replay and tamper") {
    const ExperimentConfig c = small_thermo();
    const fs::path root = scratch_dir("replay");
    const ExperimentReport r = run_experiment("thermo", c);
    const std::string dir = write_report(r, c, root.string());
    CHECK(dir == report_directory(root.string(), "thermo", c));
    CHECK(fs::exists(fs::path(dir) / "thermo_states.csv"));
    const json stored = json::parse(std::ifstream(fs::path(dir) / "report.json"));
    CHECK(stored.contains("timestamp"));

    CHECK(replay_report(dir).exit_code == 0);

    json tampered = stored;
    tampered["seed"] = 43;
    std::ofstream(fs::path(dir) / "report.json") << tampered.dump(2);
    const ReplayOutcome t = replay_report(dir);
    CHECK(t.exit_code == 2);
    CHECK(t.message.find("seed") != std::string::npos);

    json edited = stored;
    edited["rho_min"] = 0.5;
    std::ofstream(fs::path(dir) / "report.json") << edited.dump(2);
    const ReplayOutcome e = replay_report(dir);
    CHECK(e.exit_code == 2);
    CHECK(e.message.find("rho_min") != std::string::npos);

    std::ofstream(fs::path(dir) / "report.json") << stored.dump(2);
    std::ofstream(fs::path(dir) / "thermo_states.csv", std::ios::app) << "extra\n";
    CHECK(replay_report(dir).exit_code == 2);

    CHECK(replay_report((root / "missing").string()).exit_code == 1);
    fs::remove_all(root);
  }
}
