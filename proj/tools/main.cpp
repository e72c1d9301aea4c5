#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tofsim/cli.hpp"

namespace {

using tofsim::ErrorKind;
using tofsim::Json;

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::ContractViolation:
        case ErrorKind::Aliasing:
            return 3;
        case ErrorKind::OracleMismatch:
            return 4;
        default:
            return 2;
    }
}

struct CommonArgs {
    std::string config_path;
    std::string out_path;
    std::string format = "json";
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("config", args.config_path, "JSON configuration file")
        ->required();
    cmd->add_option("--out", args.out_path, "output path (stdout when omitted)");
    cmd->add_option("--format", args.format, "json|csv")
        ->check(CLI::IsMember({"json", "csv"}));
    cmd->allow_extras(); // dotted-path overrides, e.g. --setup.kappa=2
}

Json load_config(const CommonArgs& args, const std::vector<std::string>& extras) {
    std::ifstream in(args.config_path);
    if (!in) tofsim::fail(ErrorKind::Usage, "cannot open config file " + args.config_path);
    Json doc;
    try {
        doc = Json::parse(in);
    } catch (const Json::parse_error& err) {
        tofsim::fail(ErrorKind::InvalidParameter,
                     std::string("malformed config file: ") + err.what());
    }

    // remaining tokens: --dotted.path=value or --dotted.path value
    for (std::size_t i = 0; i < extras.size(); ++i) {
        std::string token = extras[i];
        if (token.rfind("--", 0) != 0)
            tofsim::fail(ErrorKind::Usage, "unexpected argument '" + token + "'");
        token = token.substr(2);
        const std::size_t eq = token.find('=');
        std::string path, value;
        if (eq != std::string::npos) {
            path = token.substr(0, eq);
            value = token.substr(eq + 1);
        } else {
            path = token;
            if (i + 1 >= extras.size())
                tofsim::fail(ErrorKind::Usage, "override --" + path + " needs a value");
            value = extras[++i];
        }
        tofsim::apply_override(doc, path, value);
    }
    return doc;
}

void emit(const CommonArgs& args, const std::string& text) {
    if (args.out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(args.out_path, std::ios::binary);
    if (!out) tofsim::fail(ErrorKind::Usage, "cannot write to " + args.out_path);
    out << text;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-pointer time-of-flight momentum measurement simulator"};
    app.require_subcommand(1);

    CommonArgs args;
    CLI::App* simulate = app.add_subcommand("simulate", "time-T state and ToF statistics");
    CLI::App* condition = app.add_subcommand("condition", "conditioned post-measurement state");
    CLI::App* sweep = app.add_subcommand("sweep", "parameter sweep tables");
    CLI::App* oracle = app.add_subcommand("oracle-check", "grid-propagation cross check");
    CLI::App* optimize = app.add_subcommand("optimize", "apparatus optimization");
    for (CLI::App* cmd : {simulate, condition, sweep, oracle, optimize})
        add_common(cmd, args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        return app.exit(err) == 0 ? 0 : 2;
    }

    CLI::App* active = app.get_subcommands().front();
    try {
        const Json doc = load_config(args, active->remaining());
        const tofsim::RunConfig config = tofsim::parse_config(doc);

        if (active == simulate) {
            if (args.format != "json")
                tofsim::fail(ErrorKind::Usage, "simulate emits JSON only");
            emit(args, tofsim::dump_json(tofsim::cmd_simulate(config)));
        } else if (active == condition) {
            if (args.format != "json")
                tofsim::fail(ErrorKind::Usage,
                             "condition emits JSON (densities go to the distribution block's out path)");
            const Json report = tofsim::cmd_condition(config);
            if (config.condition && config.condition->distribution) {
                const auto samples = tofsim::condition_densities(config);
                std::ofstream csv(config.condition->distribution->out, std::ios::binary);
                if (!csv)
                    tofsim::fail(ErrorKind::Usage,
                                 "cannot write to " + config.condition->distribution->out);
                csv << tofsim::densities_to_csv(config.setup, samples);
            }
            emit(args, tofsim::dump_json(report));
        } else if (active == sweep) {
            const tofsim::SweepResult result = tofsim::cmd_sweep(config);
            if (args.format == "csv") {
                emit(args, tofsim::sweep_to_csv(result));
            } else {
                Json report;
                report["command"] = "sweep";
                report["config"] = tofsim::config_to_json(config);
                Json rows = Json::array();
                for (const tofsim::SweepRow& row : result.rows)
                    rows.push_back(Json::array({row.axis1, row.axis2, row.value}));
                report["rows"] = rows;
                emit(args, tofsim::dump_json(report));
            }
        } else if (active == oracle) {
            if (args.format != "json")
                tofsim::fail(ErrorKind::Usage, "oracle-check emits JSON only");
            const Json report = tofsim::cmd_oracle_check(config);
            emit(args, tofsim::dump_json(report));
            if (!report.at("pass").get<bool>()) {
                std::cerr << "error: oracle-mismatch: moment errors exceed tolerance\n";
                return 4;
            }
        } else {
            if (args.format != "json")
                tofsim::fail(ErrorKind::Usage, "optimize emits JSON only");
            emit(args, tofsim::dump_json(tofsim::cmd_optimize(config)));
        }
    } catch (const tofsim::SimError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return exit_code_for(err.kind());
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    }
    return 0;
}
