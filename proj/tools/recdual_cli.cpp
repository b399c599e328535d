// recdual command-line front end. Links only the shared-library C API.

#include <recdual/recdual.h>

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

namespace {

struct ScenarioDeleter {
    void operator()(rd_scenario* s) const { rd_scenario_free(s); }
};
using ScenarioPtr = std::unique_ptr<rd_scenario, ScenarioDeleter>;

struct OwnedString {
    char* s = nullptr;
    ~OwnedString() { rd_string_free(s); }
    std::string str() const { return s ? s : ""; }
};

[[noreturn]] void die(rd_status st, const std::string& what) {
    std::cerr << "error (" << rd_status_name(st) << ") in " << what << ": " << rd_last_error()
              << "\n";
    std::exit(2);
}

void check(rd_status st, const std::string& what) {
    if (st != RD_OK) die(st, what);
}

struct CommonOpts {
    std::string config;
    std::string out;
    std::string format = "text";
    uint64_t seed = 0;
    bool seed_set = false;
    int paths = 0;
    int steps = 0;
    int threads = -1;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config, "scenario configuration file (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", o.out, "output file path");
    cmd->add_option("--format", o.format, "output format")
        ->check(CLI::IsMember({"json", "csv", "text"}));
    cmd->add_option("--seed", o.seed, "override the configured seed")
        ->each([&](const std::string&) { o.seed_set = true; });
    cmd->add_option("--paths", o.paths, "override the configured path count");
    cmd->add_option("--steps", o.steps, "override the configured step count");
    cmd->add_option("--threads", o.threads, "worker threads (0 = hardware)");
}

ScenarioPtr load_scenario(const CommonOpts& o) {
    rd_scenario* raw = nullptr;
    check(rd_scenario_load(o.config.c_str(), &raw), "loading config");
    ScenarioPtr s(raw);
    if (o.seed_set) check(rd_scenario_set_seed(s.get(), o.seed), "setting seed");
    if (o.paths > 0) check(rd_scenario_set_paths(s.get(), o.paths), "setting paths");
    if (o.steps > 0) check(rd_scenario_set_steps(s.get(), o.steps), "setting steps");
    if (o.threads >= 0) check(rd_scenario_set_threads(s.get(), o.threads), "setting threads");
    return s;
}

std::string effective_out(const CommonOpts& o, const ScenarioPtr& s) {
    if (!o.out.empty()) return o.out;
    OwnedString configured;
    check(rd_scenario_out_path(s.get(), &configured.s), "reading configured output path");
    return configured.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        std::cerr << "error: cannot open output file: " << path << "\n";
        std::exit(2);
    }
    out << content;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"convex-duality solver for recursive utility maximization"};
    app.require_subcommand(1);

    CommonOpts solve_opts, simulate_opts, verify_opts, transform_opts;
    int stride = 1;
    double t_point = 0.0, x_point = 1.0, mu_point = 0.0;
    std::vector<double> q_point, nu_point;

    CLI::App* solve = app.add_subcommand("solve", "compute the dual solution");
    add_common(solve, solve_opts);

    CLI::App* simulate =
        app.add_subcommand("simulate", "simulate paths under the optimal strategy (CSV)");
    add_common(simulate, simulate_opts);
    simulate->add_option("--stride", stride, "emit every n-th knot")->check(CLI::PositiveNumber);

    CLI::App* verify = app.add_subcommand("verify", "run the property check suite");
    add_common(verify, verify_opts);

    CLI::App* transform =
        app.add_subcommand("transform", "evaluate drift / conjugate / round-trip at a point");
    add_common(transform, transform_opts);
    transform->add_option("--t", t_point, "evaluation time");
    CLI::Option* xo = transform->add_option("--x", x_point, "wealth coordinate");
    CLI::Option* qo = transform->add_option("--q", q_point, "position vector");
    CLI::Option* mo = transform->add_option("--mu", mu_point, "conjugate x-slope");
    CLI::Option* no = transform->add_option("--nu", nu_point, "conjugate q-slope vector");

    CLI11_PARSE(app, argc, argv);

    if (solve->parsed()) {
        ScenarioPtr s = load_scenario(solve_opts);
        rd_solution* sol = nullptr;
        check(rd_solve(s.get(), &sol), "solve");
        OwnedString doc, summary;
        check(rd_solution_dump(sol, &doc.s), "serializing solution");
        check(rd_solution_summary(sol, &summary.s), "summarizing solution");
        const std::string out = effective_out(solve_opts, s);
        if (!out.empty()) write_file(out, doc.str());
        if (solve_opts.format == "json")
            std::cout << doc.str();
        else
            std::cout << summary.str();
        rd_solution_free(sol);
        return 0;
    }

    if (simulate->parsed()) {
        ScenarioPtr s = load_scenario(simulate_opts);
        const std::string out = effective_out(simulate_opts, s);
        if (out.empty()) {
            std::cerr << "error: simulate needs --out (or 'out' in the config) for the CSV\n";
            return 2;
        }
        rd_solution* sol = nullptr;
        check(rd_solve(s.get(), &sol), "solve");
        OwnedString summary;
        check(rd_simulate(s.get(), sol, out.c_str(), stride, &summary.s), "simulate");
        rd_solution_free(sol);
        if (simulate_opts.format == "json") {
            std::cout << summary.str();
        } else {
            std::cout << "csv written to " << out << "\n" << summary.str();
        }
        return 0;
    }

    if (verify->parsed()) {
        ScenarioPtr s = load_scenario(verify_opts);
        rd_report* rep = nullptr;
        check(rd_verify(s.get(), &rep), "verify");
        OwnedString doc, text;
        check(rd_report_dump(rep, &doc.s), "serializing report");
        check(rd_report_summary(rep, &text.s), "summarizing report");
        const std::string out = effective_out(verify_opts, s);
        if (!out.empty()) write_file(out, doc.str());
        if (verify_opts.format == "json")
            std::cout << doc.str();
        else
            std::cout << text.str();
        const bool passed = rd_report_passed(rep) != 0;
        rd_report_free(rep);
        return passed ? 0 : 1;
    }

    if (transform->parsed()) {
        ScenarioPtr s = load_scenario(transform_opts);
        const bool have_primal = xo->count() > 0 || qo->count() > 0;
        const bool have_dual = mo->count() > 0 || no->count() > 0;
        if (!have_primal && !have_dual) {
            std::cerr << "error: transform needs (--x, --q) and/or (--mu, --nu)\n";
            return 2;
        }
        std::string json = "{";
        bool first = true;
        const auto emit = [&](const std::string& key, const std::string& value, bool quote) {
            json += std::string(first ? "" : ", ") + "\"" + key + "\": ";
            json += quote ? "\"" + value + "\"" : value;
            first = false;
        };
        char buf[32];
        const auto num = [&](double v) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            return std::string(buf);
        };
        if (have_primal) {
            double drift = 0.0, roundtrip = 0.0;
            check(rd_drift_eval(s.get(), t_point, x_point, q_point.data(), q_point.size(), &drift),
                  "drift_eval");
            check(rd_duality_roundtrip(s.get(), t_point, x_point, q_point.data(), q_point.size(),
                                       &roundtrip),
                  "duality_roundtrip");
            if (transform_opts.format == "json") {
                emit("drift", num(drift), false);
                emit("roundtrip", num(roundtrip), false);
            } else {
                std::cout << "drift      " << num(drift) << "\n"
                          << "roundtrip  " << num(roundtrip) << "\n";
            }
        }
        if (have_dual) {
            double value = 0.0;
            int finite = 0;
            check(rd_drift_conjugate(s.get(), t_point, mu_point, nu_point.data(), nu_point.size(),
                                     &value, &finite),
                  "drift_conjugate");
            const std::string shown = finite ? num(value) : "+inf";
            if (transform_opts.format == "json")
                emit("conjugate", shown, finite == 0);
            else
                std::cout << "conjugate  " << shown << "\n";
        }
        if (transform_opts.format == "json") std::cout << json << "}\n";
        return 0;
    }
    return 2;
}
