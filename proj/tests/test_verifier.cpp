#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "commands.hpp"
#include "verifier.hpp"

#include <cmath>

using namespace recdual;

namespace {

MarketSpec large_spec(double b, double eps) {
    MarketSpec m;
    m.drift = DriftCase::large_investor;
    m.appreciation = VectorCurve::constant({b});
    m.impact = {eps};
    m.validate();
    return m;
}

MarketSpec linear_spec(double b) {
    MarketSpec m;
    m.drift = DriftCase::linear;
    m.appreciation = VectorCurve::constant({b});
    m.validate();
    return m;
}

PreferenceSpec pref_spec(double alpha, double K) {
    PreferenceSpec p;
    p.alpha = alpha;
    p.ambiguity = {K};
    return p;
}

Scenario small_scenario(const std::string& name, int paths = 20000, int steps = 250) {
    Scenario s;
    s.case_name = name;
    s.pref = pref_spec(0.5, 0.1);
    s.x0 = 1.0;
    s.n_paths = paths;
    s.n_steps = steps;
    s.seed = 12345;
    if (name == "linear") {
        s.market = linear_spec(0.3);
    } else if (name == "large-investor") {
        s.market = large_spec(0.3, 0.05);
    } else {
        s.market.drift = DriftCase::higher_rate;
        s.market.appreciation = VectorCurve::constant({0.3});
        s.market.rate_borrow = TimeCurve(0.1);
        s.market.validate();
    }
    return s;
}

}  // namespace

TEST_CASE("pass rule: tolerance widened by three standard errors") {
    CHECK(make_check("a", 1.0, 1.0, 0.0, std::nullopt, 0).passed);
    CHECK_FALSE(make_check("a", 1.1, 1.0, 0.05, std::nullopt, 0).passed);
    CHECK(make_check("a", 1.1, 1.0, 0.05, 0.04, 0).passed);   // 3 se = 0.12 wins
    CHECK_FALSE(make_check("a", 1.1, 1.0, 0.0, 0.03, 0).passed);
}

TEST_CASE("budget identity passes, and detects an inflated claimant") {
    const TimeGrid grid{1.0, 250};
    const PathBatch batch = simulate_brownian(grid, 20000, 1, 12345);
    SaddlePoint s = assemble_saddle(large_spec(0.3, 0.05), pref_spec(0.5, 0.1), 1.0, batch);
    const CheckResult ok = check_budget(s, 1.0);
    CHECK(ok.passed);
    CHECK(ok.measured == doctest::Approx(1.0).epsilon(2e-2));

    for (double& xi : s.xi_hat) xi *= 1.1;  // infeasible terminal claim
    const CheckResult bad = check_budget(s, 1.0);
    CHECK_FALSE(bad.passed);
    CHECK(bad.measured == doctest::Approx(1.1).epsilon(2e-2));
}

TEST_CASE("saddle audit holds; an out-of-box distortion beats the optimum") {
    const TimeGrid grid{1.0, 250};
    const PathBatch batch = simulate_brownian(grid, 20000, 1, 777);
    const MarketSpec m = linear_spec(0.3);
    const PreferenceSpec p = pref_spec(0.5, 0.1);
    const SaddlePoint s = assemble_saddle(m, p, 1.0, batch);

    const auto results = check_saddle(m, p, s, batch, 10, 4242, 0);
    REQUIRE(results.size() == 4);
    for (const CheckResult& c : results) {
        CAPTURE(c.name);
        CAPTURE(c.measured);
        CHECK(c.passed);
    }

    // gamma = -0.5 sits outside the ambiguity box and strictly improves the
    // weighted utility, which the in-domain audit must never see
    std::vector<double> outside(250, -0.5);
    const McEstimate gap = saddle_weight_gap(p, s, batch, outside);
    CHECK(gap.mean < -3.0 * gap.std_error);

    std::vector<double> wrong_grid(100, 0.0);
    CHECK_THROWS_AS(saddle_weight_gap(p, s, batch, wrong_grid), std::invalid_argument);
}

TEST_CASE("value process drifts by zero at the optimum and upward off it") {
    const TimeGrid grid{1.0, 250};
    const PathBatch batch = simulate_brownian(grid, 20000, 1, 999);
    const MarketSpec m = linear_spec(0.3);
    const PreferenceSpec p = pref_spec(0.5, 0.1);
    const DualPoint dual = solve_dual(m, p, 1.0, grid);

    for (const CheckResult& c : check_martingale(m, p, dual, batch, 3, 31, 0)) {
        CAPTURE(c.name);
        CHECK(c.passed);
    }

    // strictly suboptimal distortion: gamma = +K against gamma_hat = -K
    std::vector<double> flipped(250, 0.1);
    for (const McEstimate& d : martingale_drifts(m, p, dual, batch, flipped)) {
        CHECK(d.mean > 0.0);
        CHECK(d.mean > 3.0 * d.std_error);
    }
}

TEST_CASE("dynamic-programming residuals vanish for the closed form only") {
    const TimeGrid grid{1.0, 500};
    const MarketSpec m = large_spec(0.3, 0.05);
    const PreferenceSpec p = pref_spec(0.5, 0.1);

    const auto results = check_hjb(m, p, grid);
    REQUIRE(results.size() == 4);
    for (const CheckResult& c : results) {
        CAPTURE(c.name);
        CAPTURE(c.measured);
        CHECK(c.passed);
    }

    // corrupt the value function's growth exponent: residuals must blow up
    const auto bad = check_hjb(m, p, grid, 21, 21, 0.5, 2.0, 1.05);
    bool any_failed = false;
    for (const CheckResult& c : bad)
        if (c.name == "hjb.generator_residual" || c.name == "hjb.changed_measure_residual")
            any_failed = any_failed || !c.passed;
    CHECK(any_failed);

    CHECK_THROWS_AS(check_hjb(m, p, grid, 1, 21, 0.5, 2.0), std::invalid_argument);
}

TEST_CASE("euler under the closed-form strategy tracks the optimal wealth") {
    const TimeGrid grid{1.0, 2000};
    const PathBatch batch = simulate_brownian(grid, 20000, 1, 2025);
    const auto results =
        check_forward_backward(large_spec(0.3, 0.05), pref_spec(0.5, 0.1), 1.0, batch);
    REQUIRE(results.size() == 3);
    for (const CheckResult& c : results) {
        CAPTURE(c.name);
        CAPTURE(c.measured);
        CHECK(c.passed);
    }
}

TEST_CASE("minimizer statements hold on random draws inside their hypotheses") {
    for (DriftCase d :
         {DriftCase::linear, DriftCase::higher_rate, DriftCase::large_investor}) {
        for (const CheckResult& c : check_propositions(d, 100, 555)) {
            CAPTURE(c.name);
            CAPTURE(c.measured);
            CHECK(c.passed);
        }
    }
    CHECK_THROWS_AS(check_propositions(DriftCase::long_short, 10, 1), std::invalid_argument);
}

TEST_CASE("generator closed forms match the fine grid oracle") {
    for (DriftCase d :
         {DriftCase::linear, DriftCase::higher_rate, DriftCase::large_investor}) {
        const CheckResult c = check_generator_oracle(d, 30, 808);
        CAPTURE(c.name);
        CAPTURE(c.measured);
        CHECK(c.passed);
    }
}

TEST_CASE("conjugate round-trip check across cases") {
    CHECK(check_conjugate_roundtrip(linear_spec(0.3), 50, 22).passed);
    CHECK(check_conjugate_roundtrip(large_spec(0.3, 0.05), 50, 23).passed);
}

TEST_CASE("full verification report: deterministic, sorted, and tamper-evident") {
    Scenario s = small_scenario("linear", 8000, 100);
    VerifyOptions opts;
    opts.saddle_candidates = 8;
    opts.martingale_alts = 2;
    opts.proposition_draws = 25;
    opts.generator_draws = 10;
    opts.roundtrip_points = 25;

    const VerificationReport a = verify_scenario(s, opts);
    CHECK(a.overall_pass);
    for (size_t i = 1; i < a.checks.size(); ++i) CHECK(a.checks[i - 1].name < a.checks[i].name);

    const VerificationReport b = verify_scenario(s, opts);
    REQUIRE(a.checks.size() == b.checks.size());
    for (size_t i = 0; i < a.checks.size(); ++i) {
        CHECK(a.checks[i].name == b.checks[i].name);
        CHECK(a.checks[i].measured == b.checks[i].measured);  // bitwise
    }

    // report serialization round-trips through JSON
    const nlohmann::json doc = report_to_json(a);
    const nlohmann::json reparsed = nlohmann::json::parse(doc.dump());
    CHECK(reparsed == doc);
    CHECK(reparsed.at("overall_pass").get<bool>());

    // zeroing every tolerance must sink the Monte Carlo checks
    VerifyOptions tampered = opts;
    tampered.tolerance_scale = 0.0;
    CHECK_FALSE(verify_scenario(s, tampered).overall_pass);
}

TEST_CASE("full reports pass for the borrowing and price-impact cases") {
    VerifyOptions opts;
    opts.saddle_candidates = 6;
    opts.martingale_alts = 2;
    opts.proposition_draws = 25;
    opts.generator_draws = 10;
    opts.roundtrip_points = 25;
    for (const char* name : {"higher-rate", "large-investor"}) {
        const VerificationReport r = verify_scenario(small_scenario(name, 20000, 500), opts);
        for (const CheckResult& c : r.checks) {
            CAPTURE(name);
            CAPTURE(c.name);
            CAPTURE(c.measured);
            CHECK(c.passed);
        }
        CHECK(r.overall_pass);
    }
}
