#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "tofsim/cli.hpp"

using namespace tofsim;

namespace {

Json reference_config_json() {
    return Json::parse(R"({
      "setup": {
        "kappa": 1.0, "t1": 0.5, "t2": 1.5, "T": 3.0,
        "mass_ratio_1": 0.1, "mass_ratio_2": 0.1,
        "P0": 100.0, "dP0": 150.0, "dp1": 30.0, "dp2": 30.0
      }
    })");
}

std::string write_temp(const std::string& name, const std::string& content) {
    const std::string path = std::string("cli_test_") + name;
    std::ofstream out(path, std::ios::binary);
    out << content;
    return path;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(TOFSIM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

} // namespace

TEST_CASE("config parsing and validation") {
    const RunConfig config = parse_config(reference_config_json());
    CHECK(config.setup.kappa == 1.0);
    CHECK(config.setup.dP0 == 150.0);
    CHECK_FALSE(config.condition.has_value());

    Json bad = reference_config_json();
    bad["setup"]["t2"] = 0.1;
    CHECK_THROWS_AS(parse_config(bad), SimError);

    Json typo = reference_config_json();
    typo["setup"]["kapa"] = 2.0;
    CHECK_THROWS_WITH_AS(parse_config(typo), doctest::Contains("kapa"), SimError);

    Json missing = reference_config_json();
    missing["setup"].erase("dP0");
    CHECK_THROWS_WITH_AS(parse_config(missing), doctest::Contains("dP0"), SimError);
}

TEST_CASE("axis parsing accepts values and linspace forms") {
    Json doc = reference_config_json();
    doc["sweep"] = Json{{"quantity", "width_ratio"},
                        {"axis1", {{"param", "dp"}, {"values", {10.0, 30.0}}}},
                        {"axis2", {{"param", "dP0"}, {"min", 1.0}, {"max", 5.0}, {"count", 5}}}};
    const RunConfig config = parse_config(doc);
    REQUIRE(config.sweep.has_value());
    CHECK(config.sweep->axis1.values == std::vector<double>{10.0, 30.0});
    CHECK(config.sweep->axis2.values == std::vector<double>{1.0, 2.0, 3.0, 4.0, 5.0});
}

TEST_CASE("overrides reach dotted paths") {
    Json doc = reference_config_json();
    apply_override(doc, "setup.kappa", "2.5");
    apply_override(doc, "condition.p_out", "140");
    CHECK(doc["setup"]["kappa"] == 2.5);
    const RunConfig config = parse_config(doc);
    CHECK(config.setup.kappa == 2.5);
    REQUIRE(config.condition.has_value());
    CHECK(config.condition->p_out == 140.0);
}

TEST_CASE("config echo round trips") {
    Json doc = reference_config_json();
    doc["condition"] = Json{{"p_out", 123.456}};
    doc["sweep"] = Json{{"quantity", "gradient_d"},
                        {"axis1", {{"param", "dp"}, {"values", {1.0, 2.0}}}},
                        {"axis2", {{"param", "dP0"}, {"values", {3.0, 4.0}}}}};
    const RunConfig config = parse_config(doc);
    const Json echoed = config_to_json(config);
    const RunConfig reparsed = parse_config(echoed);
    CHECK(config_to_json(reparsed) == echoed);
}

TEST_CASE("floats serialize with 17 significant digits and round trip") {
    const double value = 1581.5539217226249;
    CHECK(format_g17(value) == "1581.5539217226249");
    const Json doc = Json{{"v", value}};
    const std::string dumped = dump_json(doc);
    CHECK(dumped.find("1581.5539217226249") != std::string::npos);
    CHECK(Json::parse(dumped)["v"].get<double>() == value);
}

TEST_CASE("simulate report contents") {
    const RunConfig config = parse_config(reference_config_json());
    const Json report = cmd_simulate(config);
    CHECK(report["command"] == "simulate");
    CHECK(report["tof_expectation"].get<double>() == doctest::Approx(100.0));
    CHECK(report["traced_variance"].get<double>() == doctest::Approx(24300.0));
    CHECK(report["mean_T"][1].get<double>() == doctest::Approx(100.0));

    // identical runs produce byte-identical reports
    CHECK(dump_json(report) == dump_json(cmd_simulate(config)));

    Json doc = reference_config_json();
    doc["setup"]["kappa"] = 0.0;
    const Json degenerate = cmd_simulate(parse_config(doc));
    CHECK_FALSE(degenerate.contains("tof_expectation"));
    REQUIRE(degenerate.contains("warnings"));
}

TEST_CASE("condition report and densities") {
    Json doc = reference_config_json();
    doc["condition"] = Json{{"p_out", 100.0}};
    const RunConfig config = parse_config(doc);
    const Json report = cmd_condition(config);
    CHECK(report["result"]["p_c"].get<double>() == 100.0);
    CHECK(report["result"]["width_ratio"].get<double>() < 1.0);

    // readouts in the wings leave the width ratio unchanged
    Json wings = reference_config_json();
    wings["condition"] = Json{{"p_out", 400.0}};
    const Json wing_report = cmd_condition(parse_config(wings));
    CHECK(wing_report["result"]["width_ratio"].get<double>() ==
          report["result"]["width_ratio"].get<double>());

    // densities CSV
    Json with_dist = reference_config_json();
    with_dist["condition"] =
        Json{{"p_out", 100.0},
             {"distribution",
              {{"p_min", -500.0}, {"p_max", 700.0}, {"points", 201}, {"out", "unused"}}}};
    const RunConfig dc = parse_config(with_dist);
    const DistributionSamples samples = condition_densities(dc);
    const std::string csv = densities_to_csv(dc.setup, samples);
    std::istringstream lines(csv);
    std::string line;
    std::getline(lines, line);
    CHECK(line.rfind("# base kappa=1", 0) == 0);
    std::getline(lines, line);
    CHECK(line == "P,initial,traced,conditioned");
    int rows = 0;
    while (std::getline(lines, line)) ++rows;
    CHECK(rows == 201);

    CHECK_THROWS_AS(cmd_condition(parse_config(reference_config_json())), SimError);
}

TEST_CASE("sweep CSV schema") {
    Json doc = reference_config_json();
    doc["sweep"] = Json{{"quantity", "width_ratio"},
                        {"axis1", {{"param", "dp"}, {"values", {10.0, 30.0}}}},
                        {"axis2", {{"param", "dP0"}, {"values", {100.0, 200.0, 300.0}}}}};
    const SweepResult result = cmd_sweep(parse_config(doc));
    const std::string csv = sweep_to_csv(result);

    std::istringstream lines(csv);
    std::string line;
    std::getline(lines, line);
    CHECK(line.rfind("# base ", 0) == 0);
    CHECK(line.find("axis1=dp") != std::string::npos);
    std::getline(lines, line);
    CHECK(line == "axis1,axis2,value");
    int rows = 0;
    while (std::getline(lines, line)) ++rows;
    CHECK(rows == 6);

    CHECK(sweep_to_csv(cmd_sweep(parse_config(doc))) == csv); // byte identical
}

TEST_CASE("oracle check passes and refines with n") {
    Json doc = Json::parse(R"({
      "setup": {
        "kappa": 1.0, "t1": 0.25, "t2": 0.75, "T": 1.0,
        "mass_ratio_1": 0.1, "mass_ratio_2": 0.1,
        "P0": 2.0, "dP0": 1.0, "dp1": 0.5, "dp2": 0.5
      },
      "oracle": {
        "n": 64, "half_width_X": 9.5, "half_width_x1": 10.0,
        "half_width_x2": 11.0, "dt": 0.01, "p_out": 2.0
      }
    })");
    const Json coarse = cmd_oracle_check(parse_config(doc));
    CHECK(coarse["pass"] == true);
    CHECK(coarse["max_cov_error"].get<double>() < 0.01);

    doc["oracle"]["n"] = 128;
    const Json fine = cmd_oracle_check(parse_config(doc));
    CHECK(fine["pass"] == true);
    // the interpolation-limited conditioned variance error shrinks under refinement
    CHECK(fine["conditioned_var_error"].get<double>() <
          coarse["conditioned_var_error"].get<double>());
}

TEST_CASE("optimize report is self consistent") {
    Json doc = reference_config_json();
    doc["optimize"] =
        Json{{"free", Json::array({Json{{"param", "kappa"}, {"lo", 0.1}, {"hi", 5.0}}})}};
    const Json report = cmd_optimize(parse_config(doc));
    CHECK(report["best_ratio"].get<double>() <=
          report["baseline_ratio"].get<double>());
    CHECK(report["trace"].size() == 8);
}

TEST_CASE("cli binary end to end") {
    const std::string cfg = write_temp("ref.json", reference_config_json().dump());

    CHECK(run_cli("simulate " + cfg) == 0);
    CHECK(run_cli("condition " + cfg + " --condition.p_out=100") == 0);
    CHECK(run_cli("condition " + cfg) == 2);          // p_out omitted
    CHECK(run_cli("simulate missing_file.json") == 2);
    CHECK(run_cli("simulate " + cfg + " --setup.dP0=-3") == 2);

    const std::string broken = write_temp("broken.json", "{ not json");
    CHECK(run_cli("simulate " + broken) == 2);

    // sweep with CSV output lands on disk
    Json doc = reference_config_json();
    doc["sweep"] = Json{{"quantity", "width_ratio"},
                        {"axis1", {{"param", "dp"}, {"values", {10.0, 30.0}}}},
                        {"axis2", {{"param", "dP0"}, {"values", {100.0, 300.0}}}}};
    const std::string sweep_cfg = write_temp("sweep.json", doc.dump());
    CHECK(run_cli("sweep " + sweep_cfg + " --format csv --out cli_test_sweep.csv") == 0);
    std::ifstream csv("cli_test_sweep.csv");
    REQUIRE(csv.good());
    std::string header;
    std::getline(csv, header); // metadata comment
    std::getline(csv, header);
    CHECK(header == "axis1,axis2,value");

    std::remove(cfg.c_str());
    std::remove(broken.c_str());
    std::remove(sweep_cfg.c_str());
    std::remove("cli_test_sweep.csv");
}
