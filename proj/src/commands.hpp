#pragma once

#include "scenario.hpp"
#include "solver.hpp"
#include "verifier.hpp"

#include <json.hpp>

#include <iosfwd>
#include <optional>
#include <string>

namespace recdual {

struct SolveResult {
    DualPoint dual;
    double zeta_hat_bisect = 0.0;  // deterministic-route cross-check
    std::optional<LargeInvestorSolution> closed_form;
    nlohmann::json document;
    std::string summary;
};

SolveResult run_solve(const Scenario& s);

struct SimulateResult {
    nlohmann::json summary;
    std::string summary_text;
    long csv_rows = 0;
};

/// Euler paths under the case's optimal feedback strategy, dumped as CSV,
/// plus the budget and weighted-utility summaries of the saddle point.
SimulateResult run_simulate(const Scenario& s, const SolveResult& solved, std::ostream& csv_out,
                            int stride = 1);

struct VerifyOptions {
    int saddle_candidates = 50;
    int martingale_alts = 5;
    int proposition_draws = 100;
    int generator_draws = 200;
    int roundtrip_points = 100;
    double tolerance_scale = 1.0;
    bool include_generator_oracle = true;
    uint64_t audit_seed = 0xA5D1ACE5ULL;
};

VerificationReport verify_scenario(const Scenario& s, const VerifyOptions& opts = {});

nlohmann::json report_to_json(const VerificationReport& report);
std::string report_summary_text(const VerificationReport& report);

struct TransformRequest {
    double t = 0.0;
    std::optional<double> x;      // with q: evaluate the drift and its round-trip
    std::vector<double> q;
    std::optional<double> mu;     // with nu: evaluate the conjugate
    std::vector<double> nu;
};

nlohmann::json run_transform(const Scenario& s, const TransformRequest& req);

/// Optimal feedback fraction of wealth per step (step-major), defined for
/// the three solvable cases: (b + gamma_hat - partner) / (1 - alpha) with
/// partner = 0, mu_hat or delta_hat.
std::vector<double> optimal_fraction_steps(const Scenario& s, const DualPoint& dual);

}  // namespace recdual
