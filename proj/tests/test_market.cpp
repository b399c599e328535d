#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "market.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

using namespace recdual;

namespace {

MarketSpec linear_spec(double b, double r = 0.0) {
    MarketSpec m;
    m.drift = DriftCase::linear;
    m.appreciation = VectorCurve::constant({b});
    m.rate_r = TimeCurve(r);
    m.validate();
    return m;
}

MarketSpec higher_spec(double b, double r, double R) {
    MarketSpec m;
    m.drift = DriftCase::higher_rate;
    m.appreciation = VectorCurve::constant({b});
    m.rate_r = TimeCurve(r);
    m.rate_borrow = TimeCurve(R);
    m.validate();
    return m;
}

MarketSpec large_spec(double b, double eps) {
    MarketSpec m;
    m.drift = DriftCase::large_investor;
    m.appreciation = VectorCurve::constant({b});
    m.impact = {eps};
    m.validate();
    return m;
}

MarketSpec longshort_spec(double r, double th_short, double th_long) {
    MarketSpec m;
    m.drift = DriftCase::long_short;
    m.rate_r = TimeCurve(r);
    m.short_rate = VectorCurve::constant({th_short});
    m.long_rate = VectorCurve::constant({th_long});
    m.validate();
    return m;
}

double u01(uint64_t s, uint64_t a, uint64_t b) {
    auto mix = [](uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    };
    return ((mix(mix(mix(s) ^ a) ^ b) >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

TEST_CASE("drift evaluation matches the case formulas") {
    const double q_half[] = {0.5};
    CHECK(drift_eval(linear_spec(0.3), 0.0, 1.0, q_half) == doctest::Approx(0.15).epsilon(1e-14));

    const double q_short[] = {-1.0};
    CHECK(drift_eval(large_spec(0.3, 0.05), 0.2, 1.0, q_short) ==
          doctest::Approx(-0.35).epsilon(1e-14));

    const double q_two[] = {2.0};
    CHECK(drift_eval(higher_spec(0.3, 0.02, 0.06), 0.5, 1.0, q_two) ==
          doctest::Approx(0.54).epsilon(1e-14));

    const MarketSpec ls = longshort_spec(0.0, 0.1, 0.3);
    const double q_one[] = {1.0};
    CHECK(drift_eval(ls, 0.0, 1.0, q_one) == doctest::Approx(0.1));
    CHECK(drift_eval(ls, 0.0, 1.0, q_short) == doctest::Approx(-0.3));

    CHECK_THROWS_AS(drift_eval(linear_spec(0.3), 2.0, 1.0, q_half), std::out_of_range);
    const double q2[] = {1.0, 1.0};
    CHECK_THROWS_AS(drift_eval(linear_spec(0.3), 0.0, 1.0, q2), std::invalid_argument);
}

TEST_CASE("closed-form conjugates are exact set memberships") {
    const MarketSpec lin = linear_spec(0.3);
    double nu = 0.3;
    CHECK(drift_conjugate(lin, 0.0, 0.0, {&nu, 1}).finite);
    CHECK(drift_conjugate(lin, 0.0, 0.0, {&nu, 1}).value == 0.0);
    nu = 0.2;
    CHECK_FALSE(drift_conjugate(lin, 0.0, 0.0, {&nu, 1}).finite);

    const MarketSpec hi = higher_spec(0.3, 0.02, 0.06);
    nu = 0.26;
    CHECK(drift_conjugate(hi, 0.0, 0.04, {&nu, 1}).finite);
    nu = 0.29;
    CHECK_FALSE(drift_conjugate(hi, 0.0, 0.01, {&nu, 1}).finite);

    const MarketSpec li = large_spec(0.3, 0.05);
    nu = 0.27;
    CHECK(drift_conjugate(li, 0.0, 0.0, {&nu, 1}).finite);
    nu = 0.2;
    CHECK_FALSE(drift_conjugate(li, 0.0, 0.0, {&nu, 1}).finite);
    nu = 0.27;
    CHECK_FALSE(drift_conjugate(li, 0.0, 0.1, {&nu, 1}).finite);

    MarketSpec cc;
    cc.drift = DriftCase::custom_concave;
    cc.custom = [](double, double x, std::span<const double> q) {
        return -0.5 * (x * x + q[0] * q[0]);
    };
    cc.custom_lipschitz = 3.0;
    cc.validate();
    CHECK_THROWS_AS(drift_conjugate(cc, 0.0, 0.0, {&nu, 1}), std::domain_error);
}

TEST_CASE("numeric conjugate oracle: zeros on the domain, growth flag off it") {
    const GridBox box{6.0, 0.01, 1e-6};
    const MarketSpec lin = linear_spec(0.3);
    double nu = 0.3;
    const ExtReal on = drift_conjugate_numeric(lin, 0.0, 0.0, {&nu, 1}, box);
    CHECK(on.finite);
    CHECK(std::abs(on.value) <= 1e-9);

    const MarketSpec li = large_spec(0.3, 0.05);
    nu = 0.27;
    const ExtReal li_on = drift_conjugate_numeric(li, 0.0, 0.0, {&nu, 1}, box);
    CHECK(li_on.finite);
    CHECK(std::abs(li_on.value) <= 1e-9);

    nu = 0.2;  // off the singleton: linear objective unbounded
    CHECK_FALSE(drift_conjugate_numeric(lin, 0.0, 0.0, {&nu, 1}, box).finite);

    CHECK_THROWS_AS(drift_conjugate_numeric(lin, 0.0, 0.0, {&nu, 1}, GridBox{1.0, -1.0, 1e-6}),
                    std::invalid_argument);
}

TEST_CASE("duality round-trip recovers the drift") {
    const double q_half[] = {0.5};
    const MarketSpec li = large_spec(0.3, 0.05);
    CHECK(duality_roundtrip(li, 0.0, 1.0, q_half) == doctest::Approx(0.125).epsilon(1e-12));
    CHECK(drift_eval(li, 0.0, 1.0, q_half) == doctest::Approx(0.125).epsilon(1e-12));

    const double q_two[] = {2.0};
    const MarketSpec hi = higher_spec(0.3, 0.02, 0.06);
    CHECK(duality_roundtrip(hi, 0.0, 1.0, q_two) == doctest::Approx(0.54).epsilon(1e-12));

    const MarketSpec lin = linear_spec(0.3);
    CHECK(duality_roundtrip(lin, 0.0, 1.0, q_half) == drift_eval(lin, 0.0, 1.0, q_half));
}

TEST_CASE("custom concave drift: numeric round-trip within grid tolerance") {
    MarketSpec cc;
    cc.drift = DriftCase::custom_concave;
    cc.custom = [](double, double x, std::span<const double> q) {
        return -0.5 * (x * x + q[0] * q[0]);
    };
    cc.custom_lipschitz = 2.5;
    cc.validate();
    const GridBox box{2.0, 0.02, 1e-6};
    const double q[] = {-0.7};
    const double rt = duality_roundtrip(cc, 0.0, 0.5, q, box);
    const double direct = drift_eval(cc, 0.0, 0.5, q);
    CHECK(std::abs(rt - direct) <= 1e-3);
    CHECK(probe_concavity(cc, 0.0, GridBox{2.0, 0.02, 1e-6}, 200, 99));
}

TEST_CASE("round-trip property on random points, every closed-form case") {
    const std::vector<MarketSpec> cases = {linear_spec(0.3), higher_spec(0.3, 0.0, 0.1),
                                           large_spec(0.3, 0.05), longshort_spec(0.02, 0.1, 0.3)};
    for (size_t ci = 0; ci < cases.size(); ++ci) {
        const MarketSpec& m = cases[ci];
        for (int d = 0; d < 25; ++d) {
            const double t = u01(ci, d, 0);
            const double x = -3.0 + 6.0 * u01(ci, d, 1);
            const double q[] = {-3.0 + 6.0 * u01(ci, d, 2)};
            const double gap = std::abs(duality_roundtrip(m, t, x, q) - drift_eval(m, t, x, q));
            CAPTURE(ci);
            CAPTURE(d);
            CHECK(gap <= 1e-6);
        }
    }
}

TEST_CASE("midpoint concavity on random segments, every case") {
    const std::vector<MarketSpec> cases = {linear_spec(0.3, 0.01), higher_spec(0.3, 0.02, 0.1),
                                           large_spec(0.3, 0.05), longshort_spec(0.02, 0.1, 0.3)};
    for (const MarketSpec& m : cases) {
        CHECK(probe_concavity(m, 0.0, GridBox{10.0, 0.01, 1e-6}, 200, 7));
        CHECK(probe_concavity(m, 0.7, GridBox{10.0, 0.01, 1e-6}, 200, 8));
    }
}

TEST_CASE("closed-form and numeric conjugates agree on random points") {
    const GridBox box{6.0, 0.02, 1e-6};
    const std::vector<MarketSpec> cases = {linear_spec(0.3), higher_spec(0.3, 0.02, 0.1),
                                           large_spec(0.3, 0.05), longshort_spec(0.02, 0.1, 0.3)};
    for (size_t ci = 0; ci < cases.size(); ++ci) {
        const MarketSpec& m = cases[ci];
        const double c1 = m.conjugate_box_bound();
        int checked_finite = 0;
        for (int d = 0; d < 100; ++d) {
            // Half the draws sit inside the effective domain, half clearly
            // outside; points within 0.02 of its boundary are not drawn (the
            // growth margin cannot certify those).
            double mu, nu;
            if (d % 2 == 0) {
                const double w = u01(ci, d, 3);
                switch (m.drift) {
                    case DriftCase::linear:
                        mu = m.rate_r(0.0);
                        nu = m.appreciation.component(0)(0.0) - mu;
                        break;
                    case DriftCase::higher_rate:
                        mu = m.rate_r(0.0) + w * 0.9 * (m.rate_borrow(0.0) - m.rate_r(0.0));
                        nu = m.appreciation.component(0)(0.0) - mu;
                        break;
                    case DriftCase::large_investor:
                        mu = 0.0;
                        nu = m.appreciation.component(0)(0.0) +
                             (2.0 * w - 1.0) * 0.5 * m.impact[0];
                        break;
                    default:
                        mu = m.rate_r(0.0);
                        nu = m.short_rate.component(0)(0.0) +
                             w * 0.5 *
                                 (m.long_rate.component(0)(0.0) - m.short_rate.component(0)(0.0));
                }
            } else {
                mu = (2.0 * u01(ci, d, 4) - 1.0) * 1.5;
                nu = (2.0 * u01(ci, d, 5) - 1.0) * 1.5;
                mu += mu >= 0 ? 0.55 : -0.55;  // push away from the O(0.3) domain
                nu += nu >= 0 ? 0.55 : -0.55;
            }
            const ExtReal closed = drift_conjugate(m, 0.0, mu, {&nu, 1});
            const ExtReal numeric = drift_conjugate_numeric(m, 0.0, mu, {&nu, 1}, box);
            CAPTURE(ci);
            CAPTURE(mu);
            CAPTURE(nu);
            CHECK(closed.finite == numeric.finite);
            if (closed.finite && numeric.finite) {
                ++checked_finite;
                CHECK(std::abs(closed.value - numeric.value) <= 1e-6);
                // every finite point obeys the Lipschitz box bound
                CHECK(std::abs(mu) <= c1 + 1e-9);
                CHECK(std::abs(nu) <= c1 + 1e-9);
            }
        }
        CHECK(checked_finite >= 50);
    }
}

TEST_CASE("power utility closed forms and identities") {
    PreferenceSpec p;
    p.alpha = 0.5;
    p.ambiguity = {0.1};
    p.validate();
    CHECK(p.utility(1.0) == doctest::Approx(2.0));
    CHECK(p.marginal_inverse(1.0) == doctest::Approx(1.0));
    CHECK(p.utility_conjugate(1.0) == doctest::Approx(1.0));
    CHECK(p.marginal_inverse(4.0) == doctest::Approx(0.0625).epsilon(1e-14));

    for (int d = 0; d < 50; ++d) {
        PreferenceSpec r;
        r.alpha = 0.1 + 0.8 * u01(21, d, 0);
        r.ambiguity = {0.0};
        const double zeta = std::exp(4.0 * (2.0 * u01(21, d, 1) - 1.0));
        const double lhs = r.utility_conjugate(zeta);
        const double rhs = r.utility(r.marginal_inverse(zeta)) - zeta * r.marginal_inverse(zeta);
        CHECK(std::abs(lhs - rhs) < 1e-12 * (1.0 + std::abs(lhs)));
    }

    // Inada behaviour at the probe points: the marginal inverse explodes at
    // 0+, vanishes at infinity, and inverts the marginal utility.
    CHECK(p.marginal_inverse(1e-8) > 1e6);
    CHECK(p.marginal_inverse(1e8) < 1e-6);
    for (double zeta : {1e-8, 1e8}) {
        const double x = p.marginal_inverse(zeta);
        CHECK(std::pow(x, p.alpha - 1.0) == doctest::Approx(zeta).epsilon(1e-9));
    }

    CHECK_THROWS_AS(p.utility(-1.0), std::domain_error);
    CHECK_THROWS_AS(p.marginal_inverse(0.0), std::domain_error);
    CHECK_THROWS_AS(p.utility_conjugate(-2.0), std::domain_error);
}

TEST_CASE("ambiguity driver and its conjugate domain") {
    PreferenceSpec p;
    p.alpha = 0.5;
    p.ambiguity = {0.1};
    const double z[] = {-2.0};
    CHECK(p.driver(z) == doctest::Approx(-0.2).epsilon(1e-14));

    PreferenceSpec none;
    none.alpha = 0.5;
    none.ambiguity = {0.0};
    for (double zv : {-3.0, -0.2, 0.0, 1.7}) CHECK(none.driver({&zv, 1}) == 0.0);

    double g = 0.1;
    CHECK(p.conjugate_domain_contains(0.0, {&g, 1}));
    g = 0.0;
    CHECK_FALSE(p.conjugate_domain_contains(0.01, {&g, 1}));
    g = 0.11;
    CHECK_FALSE(p.conjugate_domain_contains(0.0, {&g, 1}));
    const double z2[] = {1.0, 1.0};
    CHECK_THROWS_AS(p.driver(z2), std::invalid_argument);
}

TEST_CASE("market invariants are enforced at validation") {
    CHECK_THROWS_AS(higher_spec(0.3, 0.06, 0.02), std::invalid_argument);
    CHECK_THROWS_AS(longshort_spec(0.0, 0.3, 0.1), std::invalid_argument);

    MarketSpec li;
    li.drift = DriftCase::large_investor;
    li.appreciation = VectorCurve::constant({0.3});
    li.impact = {0.05};
    li.rate_r = TimeCurve(0.01);
    CHECK_THROWS_AS(li.validate(), std::invalid_argument);
    li.rate_r = TimeCurve(0.0);
    li.impact = {-0.05};
    CHECK_THROWS_AS(li.validate(), std::invalid_argument);

    MarketSpec cc;
    cc.drift = DriftCase::custom_concave;
    CHECK_THROWS_AS(cc.validate(), std::invalid_argument);

    PreferenceSpec p;
    p.alpha = 1.0;
    p.ambiguity = {0.1};
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p.alpha = 0.5;
    p.ambiguity = {-0.1};
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("piecewise-constant curves use the left knot value") {
    const TimeCurve c({{0.0, 1.0}, {0.5, 2.0}});
    CHECK(c(0.0) == 1.0);
    CHECK(c(0.49) == 1.0);
    CHECK(c(0.5) == 2.0);
    CHECK(c(1.0) == 2.0);
    CHECK_THROWS_AS(TimeCurve({{0.5, 1.0}, {0.5, 2.0}}), std::invalid_argument);
    CHECK_THROWS_AS(TimeCurve(std::vector<std::pair<double, double>>{}), std::invalid_argument);
}
