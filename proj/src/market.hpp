#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace recdual {

/// Piecewise-constant function of time. The value at t is the value attached
/// to the latest knot with knot time <= t; evaluation before the first knot
/// returns the first value. This matches the left-point rule used by the
/// Euler discretization.
class TimeCurve {
public:
    TimeCurve() : TimeCurve(0.0) {}
    explicit TimeCurve(double constant_value) { knots_.emplace_back(0.0, constant_value); }
    explicit TimeCurve(std::vector<std::pair<double, double>> knots);

    double operator()(double t) const;

    bool is_constant() const { return knots_.size() == 1; }
    bool is_identically(double v) const;
    double max_abs() const;
    double min_value() const;
    double max_value() const;

    const std::vector<std::pair<double, double>>& knots() const { return knots_; }

    bool operator==(const TimeCurve&) const = default;

private:
    std::vector<std::pair<double, double>> knots_;
};

/// Bundle of per-component time curves (one per Brownian component).
class VectorCurve {
public:
    VectorCurve() = default;
    explicit VectorCurve(std::vector<TimeCurve> components) : comp_(std::move(components)) {}
    static VectorCurve constant(const std::vector<double>& values);

    int dim() const { return static_cast<int>(comp_.size()); }
    void eval(double t, std::span<double> out) const;
    std::vector<double> at(double t) const;
    const TimeCurve& component(int i) const { return comp_.at(static_cast<size_t>(i)); }

    bool operator==(const VectorCurve&) const = default;

private:
    std::vector<TimeCurve> comp_;
};

enum class DriftCase {
    linear,          // r x + q'(b - r 1)
    higher_rate,     // linear minus (R - r)(x - q'1)^-, scalar only
    large_investor,  // q'b - eps'|q|, riskless rate fixed to zero
    long_short,      // r x + theta_short'q+ - theta_long'q-
    custom_concave,  // caller-supplied concave sampler
};

const char* drift_case_name(DriftCase c);

/// Caller-supplied concave drift b(t, x, q).
using CustomDrift = std::function<double(double t, double x, std::span<const double> q)>;

struct MarketSpec {
    int dim = 1;
    double horizon = 1.0;
    DriftCase drift = DriftCase::linear;

    TimeCurve rate_r{0.0};       // riskless rate r_t
    TimeCurve rate_borrow{0.0};  // borrowing rate R_t (higher_rate only)
    VectorCurve appreciation;    // b_t
    std::vector<double> impact;  // eps (large_investor only)
    VectorCurve long_rate;       // upper return bound, applied to negative positions
    VectorCurve short_rate;      // lower return bound, applied to positive positions

    CustomDrift custom;             // custom_concave only
    double custom_lipschitz = 0.0;  // conjugate-domain box bound for custom drifts

    /// Checks the structural invariants of the active drift case. Throws
    /// std::invalid_argument on violation.
    void validate() const;

    /// Box bound C such that every finite conjugate point (mu, nu) lies in
    /// [-C, C]^(dim+1). Computed from the case's coefficient extremes.
    double conjugate_box_bound() const;
};

/// Power utility with ambiguity bounds: u(x) = x^alpha / alpha and the
/// driver f(t, y, z) = -K'|z|.
struct PreferenceSpec {
    double alpha = 0.5;
    std::vector<double> ambiguity;  // K, one nonnegative bound per component

    void validate() const;

    double utility(double x) const;             // u
    double marginal_inverse(double zeta) const; // I = (u')^{-1}
    double utility_conjugate(double zeta) const;

    double driver(std::span<const double> z) const;
    /// Membership in the driver-conjugate domain {beta = 0, |gamma_i| <= K_i}.
    bool conjugate_domain_contains(double beta, std::span<const double> gamma,
                                   double slack = 0.0) const;
};

/// Extended real used for conjugate values: indicator-style conjugates are
/// exact set memberships, so +infinity is a tag, never a large float.
struct ExtReal {
    double value = 0.0;
    bool finite = true;

    static ExtReal of(double v) { return {v, true}; }
    static ExtReal infinity() { return {0.0, false}; }
};

struct ConjugatePoint {
    double mu = 0.0;
    std::vector<double> nu;
    ExtReal value;
};

/// Symmetric sampling box with uniform step, used by the grid oracles.
/// Coefficients of the reference scenarios are O(1); callers must widen the
/// box for large coefficients.
struct GridBox {
    double half_width = 10.0;
    double step = 0.01;
    double growth_margin = 1e-6;  // boundary excess that flags an unbounded objective
};

double drift_eval(const MarketSpec& m, double t, double x, std::span<const double> q);

/// Closed-form Fenchel-Legendre conjugate of the drift. Throws
/// std::domain_error for custom drifts (use the numeric oracle instead).
/// Set membership is evaluated with a 1e-9 absolute slack.
ExtReal drift_conjugate(const MarketSpec& m, double t, double mu, std::span<const double> nu);

/// Grid oracle for the conjugate: max over the (x, q) box of
/// b(t, x, q) - x mu - q'nu. Returns the infinity tag when the boundary
/// value exceeds the interior maximum by more than the growth margin.
ExtReal drift_conjugate_numeric(const MarketSpec& m, double t, double mu,
                                std::span<const double> nu, const GridBox& grid = {});

/// Recovers the drift from its conjugate: inf over a grid of the effective
/// domain of [conjugate + x mu + q'nu]. The domain grids include their
/// endpoints, so the infimum of the linear objective is exact for the
/// closed-form cases.
double duality_roundtrip(const MarketSpec& m, double t, double x, std::span<const double> q,
                         const GridBox& grid = {});

/// Midpoint concavity probe on random segment pairs inside the box.
/// Returns false when some midpoint value falls below the chord average by
/// more than tol.
bool probe_concavity(const MarketSpec& m, double t, const GridBox& box, int n_pairs,
                     uint64_t seed, double tol = 1e-9);

}  // namespace recdual
