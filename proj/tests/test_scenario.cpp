#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "commands.hpp"
#include "scenario.hpp"

#include <cmath>
#include <sstream>

using namespace recdual;
using nlohmann::json;

namespace {

const char* kLargeConfig = R"({
  "case": "large-investor",
  "dim": 1,
  "horizon": 1.0,
  "alpha": 0.5,
  "K": 0.1,
  "b": 0.3,
  "eps": 0.05,
  "x0": 1.0,
  "n_paths": 500,
  "n_steps": 8,
  "seed": 12345
})";

}  // namespace

TEST_CASE("configuration load populates the market and preferences") {
    const Scenario s = Scenario::from_text(kLargeConfig);
    CHECK(s.case_name == "large-investor");
    CHECK(s.market.drift == DriftCase::large_investor);
    CHECK(s.market.dim == 1);
    CHECK(s.market.horizon == 1.0);
    CHECK(s.market.appreciation.component(0)(0.3) == 0.3);
    CHECK(s.market.impact[0] == 0.05);
    CHECK(s.pref.alpha == 0.5);
    CHECK(s.pref.ambiguity[0] == 0.1);
    CHECK(s.x0 == 1.0);
    CHECK(s.n_paths == 500);
    CHECK(s.n_steps == 8);
    CHECK(s.seed == 12345);
}

TEST_CASE("load-serialize-load is the identity") {
    const Scenario s1 = Scenario::from_text(kLargeConfig);
    const json j1 = s1.to_json();
    const Scenario s2 = Scenario::from_json(j1);
    const json j2 = s2.to_json();
    CHECK(j1 == j2);
    CHECK(j1.dump(2) == j2.dump(2));

    // also with piecewise coefficients and a long-short case
    const char* pw = R"({
      "case": "long-short",
      "horizon": 2.0,
      "alpha": 0.4,
      "K": 0.05,
      "r": [[0.0, 0.01], [1.0, 0.02]],
      "theta_long": 0.3,
      "theta_short": [[0.0, 0.1], [0.5, 0.15]],
      "x0": 2.0
    })";
    const Scenario p1 = Scenario::from_text(pw);
    CHECK(p1.market.rate_r(0.5) == 0.01);
    CHECK(p1.market.rate_r(1.0) == 0.02);
    CHECK(p1.market.short_rate.component(0)(0.75) == 0.15);
    const json pj1 = p1.to_json();
    CHECK(Scenario::from_json(pj1).to_json() == pj1);
}

TEST_CASE("malformed configurations are rejected with reasons") {
    // unknown key
    CHECK_THROWS_AS(Scenario::from_text(R"({"case":"linear","horizon":1,"alpha":0.5,
        "K":0.1,"b":0.3,"x0":1,"volatility":2})"),
                    std::invalid_argument);
    // the price-impact case fixes the riskless rate to zero: no "r" key
    CHECK_THROWS_AS(Scenario::from_text(R"({"case":"large-investor","horizon":1,"alpha":0.5,
        "K":0.1,"b":0.3,"eps":0.05,"r":0.01,"x0":1})"),
                    std::invalid_argument);
    // missing required coefficient
    CHECK_THROWS_AS(Scenario::from_text(R"({"case":"higher-rate","horizon":1,"alpha":0.5,
        "K":0.1,"b":0.3,"x0":1})"),
                    std::invalid_argument);
    // market invariant: borrowing rate below the riskless rate
    CHECK_THROWS_AS(Scenario::from_text(R"({"case":"higher-rate","horizon":1,"alpha":0.5,
        "K":0.1,"b":0.3,"r":0.05,"R":0.02,"x0":1})"),
                    std::invalid_argument);
    // long rate must dominate
    CHECK_THROWS_AS(Scenario::from_text(R"({"case":"long-short","horizon":1,"alpha":0.5,
        "K":0.1,"theta_long":0.1,"theta_short":0.3,"x0":1})"),
                    std::invalid_argument);
    // preference invariants
    CHECK_THROWS_AS(Scenario::from_text(R"({"case":"linear","horizon":1,"alpha":1.5,
        "K":0.1,"b":0.3,"x0":1})"),
                    std::invalid_argument);
    CHECK_THROWS_AS(Scenario::from_text(R"({"case":"linear","horizon":1,"alpha":0.5,
        "K":-0.1,"b":0.3,"x0":1})"),
                    std::invalid_argument);
    // structural
    CHECK_THROWS_AS(Scenario::from_text("not json at all"), std::invalid_argument);
    CHECK_THROWS_AS(Scenario::from_text(R"({"case":"martingale","horizon":1,"alpha":0.5,
        "K":0.1,"x0":1})"),
                    std::invalid_argument);
    CHECK_THROWS_AS(Scenario::from_text(R"({"case":"linear","horizon":1,"alpha":0.5,
        "K":0.1,"b":0.3,"x0":0})"),
                    std::invalid_argument);
}

TEST_CASE("solve document carries the reference values") {
    Scenario s = Scenario::from_text(kLargeConfig);
    const SolveResult r = run_solve(s);
    CHECK(r.dual.zeta_hat == doctest::Approx(std::exp(0.01125)).epsilon(1e-12));
    CHECK(r.document.at("zeta_hat").get<double>() ==
          doctest::Approx(1.01131).epsilon(1e-5));
    CHECK(r.document.at("large_investor").at("v0").get<double>() ==
          doctest::Approx(2.022626).epsilon(1e-6));
    CHECK(std::abs(r.zeta_hat_bisect - r.dual.zeta_hat) / r.dual.zeta_hat <= 1e-6);
    // distortion knots compress to the single change point at t = 0
    const json gh = r.document.at("gamma_hat");
    REQUIRE(gh.size() == 1);
    CHECK(gh[0][0].get<double>() == 0.0);
    CHECK(gh[0][1][0].get<double>() == doctest::Approx(-0.1));

    // degenerate market: nothing to invest in
    Scenario flat = Scenario::from_text(R"({
      "case":"large-investor","horizon":1,"alpha":0.5,"K":0.0,"b":0.0,"eps":0.0,
      "x0":1.0,"n_paths":100,"n_steps":4,"seed":1})");
    const SolveResult fr = run_solve(flat);
    CHECK(fr.document.at("large_investor").at("v0").get<double>() == doctest::Approx(2.0));
    CHECK(fr.document.at("large_investor").at("pi_fraction")[0][1][0].get<double>() ==
          doctest::Approx(0.0));

    // linear case: clipped distortion is constant at -K
    Scenario lin = Scenario::from_text(R"({
      "case":"linear","horizon":1,"alpha":0.5,"K":0.1,"b":0.3,
      "x0":1.0,"n_paths":100,"n_steps":4,"seed":1})");
    const SolveResult lr = run_solve(lin);
    const json lgh = lr.document.at("gamma_hat");
    REQUIRE(lgh.size() == 1);
    CHECK(lgh[0][1][0].get<double>() == doctest::Approx(-0.1));
}

TEST_CASE("simulate: row-count contract, budget summary, byte determinism") {
    Scenario s = Scenario::from_text(kLargeConfig);
    s.n_paths = 10;
    s.n_steps = 4;
    const SolveResult solved = run_solve(s);
    std::ostringstream csv1, csv2;
    const SimulateResult r1 = run_simulate(s, solved, csv1);
    const SimulateResult r2 = run_simulate(s, solved, csv2);
    CHECK(r1.csv_rows == 50);  // (n_steps + 1) * n_paths data rows
    CHECK(csv1.str() == csv2.str());
    CHECK(r1.summary.dump() == r2.summary.dump());

    Scenario big = Scenario::from_text(kLargeConfig);
    big.n_paths = 20000;
    big.n_steps = 50;
    std::ostringstream sink;
    const SimulateResult rb = run_simulate(big, run_solve(big), sink, 50);
    const double budget = rb.summary.at("budget").at("mean").get<double>();
    const double se = rb.summary.at("budget").at("std_error").get<double>();
    CHECK(std::abs(budget - 1.0) <= 3.0 * se);
}

TEST_CASE("transform documents expose drift, round-trip and conjugate") {
    const Scenario s = Scenario::from_text(kLargeConfig);
    TransformRequest req;
    req.t = 0.0;
    req.x = 1.0;
    req.q = {0.5};
    json j = run_transform(s, req);
    CHECK(j.at("drift").get<double>() == doctest::Approx(0.125));
    CHECK(j.at("roundtrip").get<double>() == doctest::Approx(0.125));

    req.mu = 0.0;
    req.nu = {0.27};
    j = run_transform(s, req);
    CHECK(j.at("conjugate").get<double>() == 0.0);
    req.nu = {0.2};
    j = run_transform(s, req);
    CHECK(j.at("conjugate").is_string());
    CHECK(j.at("conjugate").get<std::string>() == "+inf");

    TransformRequest empty;
    CHECK_THROWS_AS(run_transform(s, empty), std::invalid_argument);
}
