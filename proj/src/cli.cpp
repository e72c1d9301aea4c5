#include "tofsim/cli.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace tofsim {

namespace {

[[noreturn]] void config_error(const std::string& message) {
    fail(ErrorKind::InvalidParameter, "config: " + message);
}

const Json& expect_object(const Json& doc, const std::string& where) {
    if (!doc.is_object()) config_error(where + " must be a JSON object");
    return doc;
}

double expect_number(const Json& obj, const std::string& key,
                     const std::string& where) {
    if (!obj.contains(key)) config_error(where + " is missing '" + key + "'");
    const Json& v = obj.at(key);
    if (!v.is_number()) config_error(where + "." + key + " must be a number");
    return v.get<double>();
}

void reject_unknown_keys(const Json& obj, const std::vector<std::string>& known,
                         const std::string& where) {
    for (const auto& item : obj.items()) {
        bool found = false;
        for (const std::string& k : known)
            if (item.key() == k) { found = true; break; }
        if (!found) config_error("unknown key '" + item.key() + "' in " + where);
    }
}

ToFSetup parse_setup(const Json& doc) {
    const Json& obj = expect_object(doc, "setup");
    reject_unknown_keys(obj,
                        {"kappa", "t1", "t2", "T", "mass_ratio_1", "mass_ratio_2",
                         "P0", "dP0", "dp1", "dp2"},
                        "setup");
    ToFSetup s;
    s.kappa = expect_number(obj, "kappa", "setup");
    s.t1 = expect_number(obj, "t1", "setup");
    s.t2 = expect_number(obj, "t2", "setup");
    s.T = expect_number(obj, "T", "setup");
    s.mass_ratio_1 = expect_number(obj, "mass_ratio_1", "setup");
    s.mass_ratio_2 = expect_number(obj, "mass_ratio_2", "setup");
    s.P0 = expect_number(obj, "P0", "setup");
    s.dP0 = expect_number(obj, "dP0", "setup");
    s.dp1 = expect_number(obj, "dp1", "setup");
    s.dp2 = expect_number(obj, "dp2", "setup");
    return s;
}

SweepAxis parse_axis(const Json& doc, const std::string& where) {
    const Json& obj = expect_object(doc, where);
    SweepAxis axis;
    if (!obj.contains("param")) config_error(where + " is missing 'param'");
    axis.param = setup_param_from_string(obj.at("param").get<std::string>());
    if (obj.contains("values")) {
        reject_unknown_keys(obj, {"param", "values"}, where);
        for (const Json& v : obj.at("values")) {
            if (!v.is_number()) config_error(where + ".values must be numbers");
            axis.values.push_back(v.get<double>());
        }
    } else {
        reject_unknown_keys(obj, {"param", "min", "max", "count"}, where);
        const double lo = expect_number(obj, "min", where);
        const double hi = expect_number(obj, "max", where);
        const double count = expect_number(obj, "count", where);
        const int n = static_cast<int>(count);
        if (n < 1 || static_cast<double>(n) != count)
            config_error(where + ".count must be a positive integer");
        for (int i = 0; i < n; ++i)
            axis.values.push_back(
                n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (n - 1));
    }
    if (axis.values.empty()) config_error(where + " has an empty value list");
    return axis;
}

Json setup_to_json(const ToFSetup& s) {
    return Json{{"kappa", s.kappa},
                {"t1", s.t1},
                {"t2", s.t2},
                {"T", s.T},
                {"mass_ratio_1", s.mass_ratio_1},
                {"mass_ratio_2", s.mass_ratio_2},
                {"P0", s.P0},
                {"dP0", s.dP0},
                {"dp1", s.dp1},
                {"dp2", s.dp2}};
}

std::string setup_echo(const ToFSetup& s) {
    std::ostringstream os;
    os << "kappa=" << format_g17(s.kappa) << " t1=" << format_g17(s.t1)
       << " t2=" << format_g17(s.t2) << " T=" << format_g17(s.T)
       << " mass_ratio_1=" << format_g17(s.mass_ratio_1)
       << " mass_ratio_2=" << format_g17(s.mass_ratio_2)
       << " P0=" << format_g17(s.P0) << " dP0=" << format_g17(s.dP0)
       << " dp1=" << format_g17(s.dp1) << " dp2=" << format_g17(s.dp2);
    return os.str();
}

} // namespace

RunConfig parse_config(const Json& doc) {
    const Json& obj = expect_object(doc, "config");
    reject_unknown_keys(obj, {"setup", "condition", "sweep", "oracle", "optimize"},
                        "config");
    if (!obj.contains("setup")) config_error("missing 'setup' block");

    RunConfig config;
    config.setup = parse_setup(obj.at("setup"));
    config.setup.validate();

    if (obj.contains("condition")) {
        const Json& c = expect_object(obj.at("condition"), "condition");
        reject_unknown_keys(c, {"p_out", "distribution"}, "condition");
        ConditionBlock block;
        block.p_out = expect_number(c, "p_out", "condition");
        if (c.contains("distribution")) {
            const Json& d = expect_object(c.at("distribution"), "condition.distribution");
            reject_unknown_keys(d, {"p_min", "p_max", "points", "out"},
                                "condition.distribution");
            DistributionBlock dist;
            dist.p_min = expect_number(d, "p_min", "condition.distribution");
            dist.p_max = expect_number(d, "p_max", "condition.distribution");
            dist.points =
                static_cast<int>(expect_number(d, "points", "condition.distribution"));
            if (dist.points < 2 || !(dist.p_min < dist.p_max))
                config_error("distribution grid needs p_min < p_max and points >= 2");
            if (!d.contains("out") || !d.at("out").is_string())
                config_error("condition.distribution needs an 'out' path");
            dist.out = d.at("out").get<std::string>();
            block.distribution = dist;
        }
        config.condition = block;
    }

    if (obj.contains("sweep")) {
        const Json& s = expect_object(obj.at("sweep"), "sweep");
        reject_unknown_keys(s, {"quantity", "axis1", "axis2"}, "sweep");
        SweepSpec spec;
        spec.base = config.setup;
        if (!s.contains("quantity")) config_error("sweep is missing 'quantity'");
        spec.quantity = sweep_quantity_from_string(s.at("quantity").get<std::string>());
        if (!s.contains("axis1") || !s.contains("axis2"))
            config_error("sweep needs 'axis1' and 'axis2'");
        spec.axis1 = parse_axis(s.at("axis1"), "sweep.axis1");
        spec.axis2 = parse_axis(s.at("axis2"), "sweep.axis2");
        config.sweep = spec;
    }

    if (obj.contains("oracle")) {
        const Json& o = expect_object(obj.at("oracle"), "oracle");
        reject_unknown_keys(o,
                            {"n", "half_width_X", "half_width_x1", "half_width_x2",
                             "dt", "p_out"},
                            "oracle");
        OracleBlock block;
        block.grid.n = static_cast<int>(expect_number(o, "n", "oracle"));
        block.grid.half_width_X = expect_number(o, "half_width_X", "oracle");
        block.grid.half_width_x1 = expect_number(o, "half_width_x1", "oracle");
        block.grid.half_width_x2 = expect_number(o, "half_width_x2", "oracle");
        block.grid.dt = expect_number(o, "dt", "oracle");
        if (o.contains("p_out"))
            block.p_out = expect_number(o, "p_out", "oracle");
        config.oracle = block;
    }

    if (obj.contains("optimize")) {
        const Json& o = expect_object(obj.at("optimize"), "optimize");
        reject_unknown_keys(o, {"free"}, "optimize");
        if (!o.contains("free") || !o.at("free").is_array())
            config_error("optimize needs a 'free' array");
        OptimizeBlock block;
        for (const Json& item : o.at("free")) {
            const Json& b = expect_object(item, "optimize.free[]");
            reject_unknown_keys(b, {"param", "lo", "hi"}, "optimize.free[]");
            OptimizeBound bound;
            if (!b.contains("param")) config_error("optimize.free[] missing 'param'");
            bound.param = setup_param_from_string(b.at("param").get<std::string>());
            bound.lo = expect_number(b, "lo", "optimize.free[]");
            bound.hi = expect_number(b, "hi", "optimize.free[]");
            block.free_params.push_back(bound);
        }
        config.optimize = block;
    }

    return config;
}

Json config_to_json(const RunConfig& config) {
    Json doc;
    doc["setup"] = setup_to_json(config.setup);
    if (config.condition) {
        Json c{{"p_out", config.condition->p_out}};
        if (config.condition->distribution) {
            const DistributionBlock& d = *config.condition->distribution;
            c["distribution"] = Json{{"p_min", d.p_min},
                                     {"p_max", d.p_max},
                                     {"points", d.points},
                                     {"out", d.out}};
        }
        doc["condition"] = c;
    }
    if (config.sweep) {
        const SweepSpec& s = *config.sweep;
        const auto axis_json = [](const SweepAxis& axis) {
            return Json{{"param", setup_param_name(axis.param)},
                        {"values", axis.values}};
        };
        doc["sweep"] = Json{{"quantity", sweep_quantity_name(s.quantity)},
                            {"axis1", axis_json(s.axis1)},
                            {"axis2", axis_json(s.axis2)}};
    }
    if (config.oracle) {
        Json o{{"n", config.oracle->grid.n},
               {"half_width_X", config.oracle->grid.half_width_X},
               {"half_width_x1", config.oracle->grid.half_width_x1},
               {"half_width_x2", config.oracle->grid.half_width_x2},
               {"dt", config.oracle->grid.dt}};
        if (config.oracle->p_out) o["p_out"] = *config.oracle->p_out;
        doc["oracle"] = o;
    }
    if (config.optimize) {
        Json arr = Json::array();
        for (const OptimizeBound& b : config.optimize->free_params)
            arr.push_back(Json{{"param", setup_param_name(b.param)},
                               {"lo", b.lo},
                               {"hi", b.hi}});
        doc["optimize"] = Json{{"free", arr}};
    }
    return doc;
}

void apply_override(Json& doc, const std::string& path, const std::string& value) {
    if (path.empty()) fail(ErrorKind::Usage, "empty override path");
    Json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const std::size_t dot = path.find('.', start);
        const std::string key = path.substr(start, dot - start);
        if (key.empty()) fail(ErrorKind::Usage, "malformed override path '" + path + "'");
        if (dot == std::string::npos) {
            Json parsed = Json::parse(value, nullptr, false);
            (*node)[key] = parsed.is_discarded() ? Json(value) : parsed;
            return;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

std::string format_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

void dump_value(const Json& v, std::string& out, int indent, int depth) {
    const std::string pad(static_cast<std::size_t>(indent) * depth, ' ');
    const std::string pad_in(static_cast<std::size_t>(indent) * (depth + 1), ' ');
    switch (v.type()) {
        case Json::value_t::object: {
            if (v.empty()) { out += "{}"; return; }
            out += "{\n";
            bool first = true;
            for (const auto& item : v.items()) {
                if (!first) out += ",\n";
                first = false;
                out += pad_in + Json(item.key()).dump() + ": ";
                dump_value(item.value(), out, indent, depth + 1);
            }
            out += "\n" + pad + "}";
            return;
        }
        case Json::value_t::array: {
            if (v.empty()) { out += "[]"; return; }
            out += "[\n";
            bool first = true;
            for (const Json& item : v) {
                if (!first) out += ",\n";
                first = false;
                out += pad_in;
                dump_value(item, out, indent, depth + 1);
            }
            out += "\n" + pad + "]";
            return;
        }
        case Json::value_t::number_float:
            out += format_g17(v.get<double>());
            return;
        default:
            out += v.dump();
            return;
    }
}

} // namespace

std::string dump_json(const Json& doc, int indent) {
    std::string out;
    dump_value(doc, out, indent, 0);
    out += "\n";
    return out;
}

std::string sweep_to_csv(const SweepResult& result) {
    std::ostringstream os;
    os << "# base " << setup_echo(result.spec.base)
       << " quantity=" << sweep_quantity_name(result.spec.quantity)
       << " axis1=" << setup_param_name(result.spec.axis1.param)
       << " axis2=" << setup_param_name(result.spec.axis2.param) << "\n";
    os << "axis1,axis2,value\n";
    for (const SweepRow& row : result.rows)
        os << format_g17(row.axis1) << ',' << format_g17(row.axis2) << ','
           << format_g17(row.value) << "\n";
    return os.str();
}

std::string densities_to_csv(const ToFSetup& setup, const DistributionSamples& samples) {
    std::ostringstream os;
    os << "# base " << setup_echo(setup) << "\n";
    os << "P,initial,traced" << (samples.conditioned ? ",conditioned" : "") << "\n";
    for (std::size_t i = 0; i < samples.grid.size(); ++i) {
        os << format_g17(samples.grid[i]) << ',' << format_g17(samples.initial[i])
           << ',' << format_g17(samples.traced[i]);
        if (samples.conditioned) os << ',' << format_g17((*samples.conditioned)[i]);
        os << "\n";
    }
    return os.str();
}

Json cmd_simulate(const RunConfig& config) {
    const ToFSetup& setup = config.setup;
    const GaussianState at_T = propagate(setup, delta_schedule(setup));

    Json report;
    report["command"] = "simulate";
    report["config"] = config_to_json(config);
    report["mean_T"] = std::vector<double>(at_T.mean().data(),
                                           at_T.mean().data() + kPhaseDim);
    Json cov = Json::array();
    for (int i = 0; i < kPhaseDim; ++i) {
        Json row = Json::array();
        for (int j = 0; j < kPhaseDim; ++j) row.push_back(at_T.cov()(i, j));
        cov.push_back(row);
    }
    report["cov_T"] = cov;
    report["traced_variance"] = at_T.var_of(PhaseIndex::P);

    if (setup.kappa != 0.0) {
        report["tof_expectation"] = tof_expectation(setup);
    } else {
        report["warnings"] = Json::array(
            {"degenerate-functional: kappa = 0, no ToF expectation emitted"});
    }
    return report;
}

Json cmd_condition(const RunConfig& config) {
    if (!config.condition)
        fail(ErrorKind::Usage, "condition command requires a 'condition' block with p_out");
    const ConditionedResult r = condition_on_tof(config.setup, config.condition->p_out);

    Json report;
    report["command"] = "condition";
    report["config"] = config_to_json(config);
    report["result"] = Json{{"p_out", r.p_out},       {"p_c", r.p_c},
                            {"var_pc", r.var_pc},     {"var_pt", r.var_pt},
                            {"d", r.d},               {"width_ratio", r.width_ratio}};
    return report;
}

DistributionSamples condition_densities(const RunConfig& config) {
    if (!config.condition || !config.condition->distribution)
        fail(ErrorKind::Usage, "no distribution block configured");
    const DistributionBlock& d = *config.condition->distribution;
    std::vector<double> grid(static_cast<std::size_t>(d.points));
    for (int i = 0; i < d.points; ++i)
        grid[static_cast<std::size_t>(i)] =
            d.p_min + (d.p_max - d.p_min) * static_cast<double>(i) / (d.points - 1);
    return distribution_samples(config.setup, config.condition->p_out, grid);
}

SweepResult cmd_sweep(const RunConfig& config) {
    if (!config.sweep)
        fail(ErrorKind::Usage, "sweep command requires a 'sweep' block");
    return run_sweep(*config.sweep);
}

Json cmd_oracle_check(const RunConfig& config) {
    if (!config.oracle)
        fail(ErrorKind::Usage, "oracle-check command requires an 'oracle' block");
    const ToFSetup& setup = config.setup;
    const GridSpec& spec = config.oracle->grid;
    const double p_out = config.oracle->p_out.value_or(setup.P0);

    GridState state = propagate_grid(init_grid(setup, spec), setup);
    const double norm_drift = std::abs(state.norm_squared() - 1.0);

    const GaussianState engine = propagate(setup, delta_schedule(setup));
    const GridMoments moments = grid_moments(state);
    const MomentComparison cmp = compare_moments(moments, engine);

    const ConditionedGridStats grid_cond = conditioned_stats_grid(state, setup, p_out);
    const ConditionedResult engine_cond = condition_on_tof(setup, p_out);
    const double mean_scale =
        std::max(std::abs(engine_cond.p_c), std::sqrt(engine_cond.var_pc));
    const double cond_mean_err = std::abs(grid_cond.mean - engine_cond.p_c) / mean_scale;
    const double cond_var_err =
        std::abs(grid_cond.variance - engine_cond.var_pc) / engine_cond.var_pc;

    constexpr double kTol = 0.01;
    const bool pass = cmp.max_mean_err < kTol && cmp.max_cov_err < kTol &&
                      cond_mean_err < kTol && cond_var_err < kTol &&
                      norm_drift < 1e-8;

    Json report;
    report["command"] = "oracle_check";
    report["config"] = config_to_json(config);
    report["tolerance"] = kTol;
    report["norm_drift"] = norm_drift;
    report["max_mean_error"] = cmp.max_mean_err;
    report["max_cov_error"] = cmp.max_cov_err;
    report["conditioned_mean_error"] = cond_mean_err;
    report["conditioned_var_error"] = cond_var_err;

    Json mean_err = Json::array();
    Json cov_err = Json::array();
    for (int i = 0; i < kPhaseDim; ++i) {
        const double sigma = std::sqrt(engine.cov()(i, i));
        const double scale = std::max(std::abs(engine.mean()(i)), sigma);
        mean_err.push_back(std::abs(moments.mean(i) - engine.mean()(i)) / scale);
        Json row = Json::array();
        for (int j = 0; j < kPhaseDim; ++j) {
            const double s = std::sqrt(engine.cov()(i, i) * engine.cov()(j, j));
            row.push_back(std::abs(moments.cov(i, j) - engine.cov()(i, j)) / s);
        }
        cov_err.push_back(row);
    }
    report["mean_errors"] = mean_err;
    report["cov_errors"] = cov_err;
    report["conditioned"] = Json{{"p_out", p_out},
                                 {"grid_mean", grid_cond.mean},
                                 {"grid_variance", grid_cond.variance},
                                 {"engine_mean", engine_cond.p_c},
                                 {"engine_variance", engine_cond.var_pc}};
    report["pass"] = pass;
    return report;
}

Json cmd_optimize(const RunConfig& config) {
    if (!config.optimize)
        fail(ErrorKind::Usage, "optimize command requires an 'optimize' block");
    const OptimizeResult result =
        optimize_width_ratio(config.setup, config.optimize->free_params);

    Json report;
    report["command"] = "optimize";
    report["config"] = config_to_json(config);
    report["best_setup"] = setup_to_json(result.best);
    report["best_ratio"] = result.best_ratio;
    report["baseline_ratio"] =
        condition_on_tof(config.setup, config.setup.P0).width_ratio;
    Json trace = Json::array();
    for (const OptimizeEval& eval : result.trace)
        trace.push_back(Json{{"setup", setup_to_json(eval.setup)},
                             {"ratio", eval.ratio}});
    report["trace"] = trace;
    return report;
}

} // namespace tofsim
