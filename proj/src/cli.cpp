#include "advisor/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "advisor/analysis.hpp"
#include "advisor/batch.hpp"
#include "advisor/errors.hpp"
#include "advisor/io.hpp"
#include "advisor/scenario.hpp"

namespace advisor {

namespace fs = std::filesystem;

namespace {

std::vector<double> parse_list(const std::string& text, const char* what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || item.find_first_not_of(" \t", used) != std::string::npos || !std::isfinite(v))
            throw InputError(std::string(what) + ": cannot parse '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) throw InputError(std::string(what) + ": empty list");
    return out;
}

ModelOrders parse_orders(const std::string& text) {
    const std::vector<double> v = parse_list(text, "--orders");
    if (v.size() != 4) throw InputError("--orders takes na,nb,nc,nd");
    ModelOrders o{static_cast<int>(v[0]), static_cast<int>(v[1]), static_cast<int>(v[2]), static_cast<int>(v[3])};
    for (std::size_t i = 0; i < 4; ++i)
        if (v[i] != std::floor(v[i])) throw InputError("--orders must be integers");
    o.validate();
    return o;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw InputError("cannot create output directory " + dir.string());
}

ordered_json whiteness_json(const std::vector<double>& residuals, const fs::path& acf_csv) {
    try {
        const WhitenessResult w = whiteness_test(residuals);
        write_autocorrelation_csv(acf_csv, autocorrelation(residuals, 20));
        return ordered_json{{"fraction_inside", w.fraction_inside}, {"exceedances", w.exceedances},
                            {"q_statistic", w.q_statistic},         {"p_value", w.p_value},
                            {"white", w.pass}};
    } catch (const ZeroVariance&) {
        // Noiseless fits leave constant residuals; there is nothing to test.
        return nullptr;
    }
}

// Steady state starts at 5 s; runs that end earlier are summarized whole.
double steady_start(const EstimationLog& est) {
    constexpr double kSteady = 5.0;
    return est.back().t >= kSteady ? kSteady : est.front().t;
}

struct Fitted {
    FitReport report;
    std::vector<double> prediction;
    double val_rmse = 0.0;
    double val_r2 = 0.0;
};

// ---- fit ------------------------------------------------------------------

struct FitOptions {
    std::string log;
    std::string orders;
    bool select = false;
    int max_order = 3;
    std::string model = "both";
    std::string scenario;
    std::string track = "straight";
    std::string validate;
    std::string out;
};

ScenarioConfig scenario_or_default(const std::string& path) {
    return path.empty() ? ScenarioConfig{} : scenario_from_json(read_json_file(path));
}

Track track_for(const FitOptions& o, const ScenarioConfig& cfg) {
    if (!o.scenario.empty()) return Track(cfg.track);
    if (o.track == "curved") return Track(TrackSpec::curved());
    return Track{};
}

int cmd_fit(const FitOptions& o, std::ostream& out) {
    const ScenarioConfig cfg = scenario_or_default(o.scenario);
    const Track track = track_for(o, cfg);
    const SteeringSeries train = steering_series(read_trajectory_log(o.log), track, cfg.vehicle);
    const SteeringSeries val =
        o.validate.empty() ? train : steering_series(read_trajectory_log(o.validate), track, cfg.vehicle);
    const fs::path dir(o.out);
    ensure_dir(dir);

    ModelOrders orders = GeneralizedSteeringParams::nominal().orders();
    if (!o.orders.empty()) orders = parse_orders(o.orders);
    if (o.select) {
        if (o.max_order < 0 || o.max_order > 6) throw InputError("--max-order must be in 0..6");
        const int m = o.max_order;
        orders = select_order(train, {m, m, m, m});
    }

    std::map<std::string, Fitted> fits;
    if (o.model == "generalized" || o.model == "both") fits["generalized"].report = fit_generalized(train, orders);
    if (o.model == "two-point" || o.model == "both") fits["two-point"].report = fit_two_point(train, cfg.vehicle);
    if (fits.empty()) throw InputError("--model must be generalized, two-point or both");

    std::size_t warmup = 1;
    for (const auto& [name, f] : fits)
        warmup = std::max(warmup, static_cast<std::size_t>(f.report.params.orders().max()));
    if (val.size() <= warmup + 1) throw InputError("validation log too short");
    const std::vector<double> actual(val.delta.begin() + static_cast<std::ptrdiff_t>(warmup), val.delta.end());

    for (auto& [name, f] : fits) {
        f.prediction = predict_steering(f.report.params, val, warmup, true);
        f.val_rmse = rmse(f.prediction, actual);
        f.val_r2 = r_squared(f.prediction, actual);
        ordered_json j = to_json(f.report);
        j["validation"] = {{"log", o.validate.empty() ? o.log : o.validate},
                           {"free_run", true},
                           {"rmse", f.val_rmse},
                           {"r2", f.val_r2}};
        const std::string stem = name == "generalized" ? "generalized" : "two_point";
        j["whiteness"] = whiteness_json(f.report.residuals, dir / ("acf_" + stem + ".csv"));
        write_text_file(dir / ("fit_" + stem + ".json"), j.dump(2) + "\n");
        out << name << ": orders " << f.report.params.orders().na << "," << f.report.params.orders().nb << ","
            << f.report.params.orders().nc << "," << f.report.params.orders().nd << "  rmse " << f.val_rmse
            << "  r2 " << f.val_r2 << "\n";
    }
    const Fitted& primary = fits.count("generalized") ? fits["generalized"] : fits["two-point"];
    ordered_json pj = to_json(primary.report);
    write_text_file(dir / "fit.json", pj.dump(2) + "\n");

    std::ostringstream overlay;
    overlay.precision(17);
    overlay << "t,delta";
    for (const auto& [name, f] : fits) overlay << "," << (name == "generalized" ? "generalized" : "two_point");
    overlay << "\n";
    const double ts = cfg.vehicle.ts;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        overlay << static_cast<double>(i + warmup) * ts << "," << actual[i];
        for (const auto& [name, f] : fits) overlay << "," << f.prediction[i];
        overlay << "\n";
    }
    write_text_file(dir / "overlay.csv", overlay.str());

    std::vector<ModelMetricsRow> rows;
    const std::string id = fs::path(o.log).stem().string();
    if (fits.count("two-point")) rows.push_back({id, "two-point", fits["two-point"].val_rmse, fits["two-point"].val_r2, 0.0});
    if (fits.count("generalized")) {
        const double dec = fits.count("two-point") ? rmse_decrease(fits["two-point"].val_rmse, fits["generalized"].val_rmse) : 0.0;
        rows.push_back({id, "generalized", fits["generalized"].val_rmse, fits["generalized"].val_r2, dec});
    }
    write_model_metrics_csv(dir / "metrics.csv", rows);
    return 0;
}

// ---- simulate -------------------------------------------------------------

int cmd_simulate(const std::string& scenario, const std::vector<std::uint64_t>& seeds, const std::string& out_dir,
                 std::ostream& out) {
    const ScenarioConfig base = scenario_from_json(read_json_file(scenario));
    std::vector<std::uint64_t> list = seeds.empty() ? std::vector<std::uint64_t>{base.seed} : seeds;
    if (std::set<std::uint64_t>(list.begin(), list.end()).size() != list.size())
        throw InputError("--seed values must be unique");
    const fs::path dir(out_dir);
    ensure_dir(dir);
    parallel_for(list.size(), [&](std::size_t i) {
        ScenarioConfig cfg = base;
        cfg.seed = list[i];
        write_trajectory_log(dir / ("trajectory_seed" + std::to_string(list[i]) + ".jsonl"), run_closed_loop(cfg));
    });
    for (auto s : list) out << (dir / ("trajectory_seed" + std::to_string(s) + ".jsonl")).string() << "\n";
    return 0;
}

// ---- estimate -------------------------------------------------------------

struct EstimateOptions {
    std::vector<std::string> logs;
    std::string fit;
    std::string scenario;
    std::string hypotheses;
    bool no_human = false;
    std::string jacobian;
    std::optional<std::uint64_t> seed;
    std::string out;
};

int cmd_estimate(const EstimateOptions& o, std::ostream& out) {
    const ScenarioConfig cfg = scenario_or_default(o.scenario);
    EstimationSettings settings = estimation_settings(cfg);
    GeneralizedSteeringParams model = estimation_model(cfg);
    if (!o.fit.empty()) model = fit_report_from_json(read_json_file(o.fit)).params;
    if (!o.hypotheses.empty()) settings.hypotheses = parse_list(o.hypotheses, "--hypotheses");
    if (o.no_human) settings.filter.use_human = false;
    if (!o.jacobian.empty()) settings.filter.mode = parse_jacobian_mode(o.jacobian);
    const Track track(cfg.track);
    const fs::path dir(o.out);
    ensure_dir(dir);

    std::set<std::string> stems;
    for (const auto& l : o.logs)
        if (!stems.insert(fs::path(l).stem().string()).second) throw InputError("duplicate log name " + l);

    const auto summaries = parallel_map<ordered_json>(o.logs.size(), [&](std::size_t i) {
        EstimationSettings s = settings;
        s.seed = o.seed ? *o.seed + i : settings.seed;
        const EstimationLog est = run_estimation(read_trajectory_log(o.logs[i]), model, cfg.vehicle, s, track);
        const std::string stem = fs::path(o.logs[i]).stem().string();
        write_estimation_log(dir / ("estimation_" + stem + ".jsonl"), est);
        const double from = steady_start(est);
        const LateralErrorSummary sum = lateral_error_series(est, from);
        return ordered_json{{"log", o.logs[i]},
                            {"seed", s.seed},
                            {"steady_start", from},
                            {"ss_rmse", sum.ss_rmse},
                            {"ss_mean_abs", sum.ss_mean_abs},
                            {"ss_std_abs", sum.ss_std_abs},
                            {"final_weights", sum.final_weights}};
    });

    std::vector<double> rmses;
    for (const auto& s : summaries) rmses.push_back(s["ss_rmse"].get<double>());
    const MeanStd ms = rmses.size() > 1 ? mean_std(rmses) : MeanStd{rmses.front(), 0.0};
    ordered_json summary{{"jacobian", jacobian_mode_name(settings.filter.mode)},
                         {"use_human", settings.filter.use_human},
                         {"hypotheses", settings.hypotheses},
                         {"runs", summaries},
                         {"mean_ss_rmse", ms.mean},
                         {"std_ss_rmse", ms.std}};
    write_text_file(dir / "summary.json", summary.dump(2) + "\n");
    out << "runs " << rmses.size() << "  mean lateral RMSE " << ms.mean << " m  std " << ms.std << "\n";
    return 0;
}

// ---- report ---------------------------------------------------------------

int cmd_report(const std::string& in_dir, const std::string& out_dir, std::ostream& out) {
    const fs::path dir(in_dir);
    if (!fs::is_directory(dir)) throw InputError("not a directory: " + in_dir);
    std::map<std::string, std::vector<fs::path>> estimations;  // group -> logs
    std::vector<fs::path> fit_dirs;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const std::string name = e.path().filename().string();
        if (name.rfind("estimation_", 0) == 0 && e.path().extension() == ".jsonl")
            estimations[fs::relative(e.path().parent_path(), dir).generic_string()].push_back(e.path());
        if (name == "fit_generalized.json") fit_dirs.push_back(e.path().parent_path());
    }
    if (estimations.empty() && fit_dirs.empty())
        throw InputError("no estimation_*.jsonl or fit_generalized.json files under " + in_dir);
    const fs::path od = out_dir.empty() ? dir : fs::path(out_dir);
    ensure_dir(od);

    if (!fit_dirs.empty()) {
        std::sort(fit_dirs.begin(), fit_dirs.end());
        std::vector<ModelMetricsRow> rows;
        for (const auto& fd : fit_dirs) {
            const std::string id = fs::relative(fd, dir).generic_string();
            const json g = read_json_file(fd / "fit_generalized.json");
            const double g_rmse = g.at("validation").at("rmse").get<double>();
            if (fs::exists(fd / "fit_two_point.json")) {
                const json t = read_json_file(fd / "fit_two_point.json");
                const double t_rmse = t.at("validation").at("rmse").get<double>();
                rows.push_back({id, "two-point", t_rmse, t.at("validation").at("r2").get<double>(), 0.0});
                rows.push_back({id, "generalized", g_rmse, g.at("validation").at("r2").get<double>(),
                                rmse_decrease(t_rmse, g_rmse)});
            } else {
                rows.push_back({id, "generalized", g_rmse, g.at("validation").at("r2").get<double>(), 0.0});
            }
        }
        write_model_metrics_csv(od / "model_metrics.csv", rows);
        out << "model_metrics.csv: " << rows.size() << " rows\n";
    }

    if (!estimations.empty()) {
        std::vector<LateralSummaryRow> rows;
        for (auto& [group, logs] : estimations) {
            std::sort(logs.begin(), logs.end());
            std::vector<double> run_rmse;
            std::vector<LateralErrorSummary> series;
            for (const auto& l : logs) {
                const EstimationLog est = read_estimation_log(l);
                if (est.empty()) throw InputError("empty estimation log " + l.string());
                series.push_back(lateral_error_series(est, steady_start(est)));
                run_rmse.push_back(series.back().ss_rmse);
            }
            const MeanStd ms = run_rmse.size() > 1 ? mean_std(run_rmse) : MeanStd{run_rmse.front(), 0.0};
            const std::string label = group.empty() || group == "." ? "all" : group;
            rows.push_back({label, static_cast<int>(logs.size()), ms.mean, ms.std});

            // Lateral error evolution: per-step mean and spread of |error| across runs.
            std::size_t n = series.front().t.size();
            for (const auto& s : series) n = std::min(n, s.t.size());
            std::ostringstream csv;
            csv.precision(17);
            csv << "t,mean_abs_err,std_abs_err\n";
            for (std::size_t k = 0; k < n; ++k) {
                std::vector<double> v;
                for (const auto& s : series) v.push_back(std::abs(s.err[k]));
                const MeanStd m = v.size() > 1 ? mean_std(v) : MeanStd{v.front(), 0.0};
                csv << series.front().t[k] << "," << m.mean << "," << m.std << "\n";
            }
            std::string file = label;
            std::replace(file.begin(), file.end(), '/', '_');
            write_text_file(od / ("lateral_error_" + file + ".csv"), csv.str());
        }
        write_lateral_summary_csv(od / "lateral_summary.csv", rows);
        out << "lateral_summary.csv: " << rows.size() << " rows\n";
    }
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Human-as-advisor lane estimation toolkit"};
    app.require_subcommand(1);

    FitOptions fo;
    auto* fit = app.add_subcommand("fit", "Fit steering models to a trajectory log");
    fit->add_option("log", fo.log, "training trajectory log (JSONL)")->required();
    fit->add_option("--orders", fo.orders, "generalized model orders na,nb,nc,nd");
    fit->add_flag("--select-order", fo.select, "choose orders by BIC");
    fit->add_option("--max-order", fo.max_order, "largest order tried by --select-order");
    fit->add_option("--model", fo.model, "generalized, two-point or both");
    fit->add_option("--scenario", fo.scenario, "scenario JSON supplying track and vehicle parameters");
    fit->add_option("--track", fo.track, "straight or curved when no scenario is given");
    fit->add_option("--validate", fo.validate, "held-out log for free-run validation");
    fit->add_option("--out", fo.out, "output directory")->required();

    std::string sim_scenario, sim_out;
    std::vector<std::uint64_t> sim_seeds;
    auto* sim = app.add_subcommand("simulate", "Run closed-loop simulations");
    sim->add_option("scenario", sim_scenario, "scenario JSON")->required();
    sim->add_option("--seed", sim_seeds, "one or more seeds");
    sim->add_option("--out", sim_out, "output directory")->required();

    EstimateOptions eo;
    std::uint64_t est_seed = 0;
    auto* est = app.add_subcommand("estimate", "Run the mixture filter over trajectory logs");
    est->add_option("logs", eo.logs, "trajectory logs (JSONL)")->required();
    est->add_option("--fit", eo.fit, "fit JSON with the steering model");
    est->add_option("--scenario", eo.scenario, "scenario JSON with noise, hypotheses and estimator settings");
    est->add_option("--hypotheses", eo.hypotheses, "comma-separated lateral offsets (m)");
    est->add_flag("--no-human", eo.no_human, "drop the steering channel");
    est->add_option("--jacobian", eo.jacobian, "paper or exact");
    auto* seed_opt = est->add_option("--seed", est_seed, "input-noise seed (incremented per log)");
    est->add_option("--out", eo.out, "output directory")->required();

    std::string rep_dir, rep_out;
    auto* rep = app.add_subcommand("report", "Summarize fits and estimation runs into tables and plot data");
    rep->add_option("dir", rep_dir, "directory with fit and estimation outputs")->required();
    rep->add_option("--out", rep_out, "output directory (defaults to dir)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*fit) return cmd_fit(fo, out);
        if (*sim) return cmd_simulate(sim_scenario, sim_seeds, sim_out, out);
        if (*est) {
            if (*seed_opt) eo.seed = est_seed;
            return cmd_estimate(eo, out);
        }
        if (*rep) return cmd_report(rep_dir, rep_out, out);
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        err << "error: malformed input: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace advisor
