#pragma once

#include "engine.hpp"
#include "market.hpp"

#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace recdual {

/// Pointwise minimum of a dual generator together with its minimizing
/// controls. `partner` is the borrowing rate mu for the higher-rate case,
/// the impact distortion delta for the large-investor case, and empty for
/// the linear case.
struct GeneratorPoint {
    double value = 0.0;
    std::vector<double> gamma;
    std::vector<double> partner;
};

/// Componentwise clip of -b - ((1-alpha)/alpha) z to the ambiguity box.
std::vector<double> gamma_hat_linear(std::span<const double> b, std::span<const double> K,
                                     double alpha, std::span<const double> z);

GeneratorPoint generator_linear(std::span<const double> b, std::span<const double> K,
                                double alpha, std::span<const double> z);

/// Box minimum over [r, R] x [-K, K]. The joint stationarity system is
/// infeasible, so the minimum sits on the boundary; each edge is a convex
/// quadratic solved in closed form and the best of the four clipped edge
/// minimizers is returned.
GeneratorPoint generator_higher(double b, double K, double r, double R, double alpha, double z);

GeneratorPoint generator_large(std::span<const double> b, std::span<const double> K,
                               std::span<const double> eps, double alpha,
                               std::span<const double> z);

/// Case dispatch; only the linear, higher-rate and large-investor drifts
/// have a dual generator.
GeneratorPoint generator_minimum(const MarketSpec& m, const PreferenceSpec& pref, double t,
                                 std::span<const double> z);

/// Left-rule quadrature of the deterministic backward equation:
/// y[i] = sum_{j >= i} g0[j] dt, y[steps] = 0.
std::vector<double> integrate_y_tilde(std::span<const double> g0_per_step, const TimeGrid& grid);

double zeta_hat_closed(double x, double alpha, double e_dual);

/// Dual value at the candidate multiplier: ((1-alpha)/alpha) zeta^{alpha/(alpha-1)} e_dual.
double v_tilde_closed(double zeta, double alpha, double e_dual);

struct BisectOptions {
    double rel_tol = 1e-10;   // 1e-4 is appropriate for Monte Carlo derivatives
    bool se_aware = false;    // stop once the estimate is within one SE of the root
    int max_doublings = 60;
};

/// Root of v_tilde_prime(zeta) + x = 0 by bisection on an expanding
/// bracket; v_tilde_prime must be nondecreasing in zeta.
double zeta_hat_bisect(double x, const std::function<McEstimate(double)>& v_tilde_prime,
                       const BisectOptions& opts = {});

/// Deterministic part of the dual solution: per-step minimizing controls,
/// the integrated curve y_tilde, and the resulting multiplier.
struct DualPoint {
    DriftCase drift = DriftCase::linear;
    int steps = 0;
    int dim = 1;
    double alpha = 0.5;

    std::vector<double> gamma_hat;    // step-major, steps x dim
    std::vector<double> partner_hat;  // per step (mu) or step-major (delta); empty for linear
    std::vector<double> g0;           // per step, generator at z = 0
    std::vector<double> y_tilde;      // per knot, size steps + 1

    double y_tilde_0 = 0.0;
    double e_dual = 1.0;      // exp(y_tilde_0), the dual expectation
    double zeta_hat = 1.0;
    double dual_value = 0.0;  // v_tilde(zeta_hat) + zeta_hat * x
    double x0 = 1.0;
};

DualPoint solve_dual(const MarketSpec& m, const PreferenceSpec& pref, double x,
                     const TimeGrid& grid);

/// (mu, nu) controls of the wealth-side exponential for the case's optimal
/// dual point: nu = b for linear, nu = b - mu_hat for higher-rate,
/// nu = b - delta_hat for large-investor.
ControlPath dual_n_controls(const MarketSpec& m, const DualPoint& dual, const TimeGrid& grid);

/// (beta = 0, gamma = gamma_hat) controls of the utility-side exponential.
ControlPath dual_gamma_controls(const DualPoint& dual);

/// Saddle point on a concrete path batch: the dual point plus the optimal
/// terminal wealth per path and the terminal log-exponentials it was built
/// from.
struct SaddlePoint {
    DualPoint dual;
    double x0 = 1.0;
    std::vector<double> xi_hat;       // per path
    std::vector<double> log_n_T;      // per path
    std::vector<double> log_gamma_T;  // per path
};

SaddlePoint assemble_saddle(const MarketSpec& m, const PreferenceSpec& pref, double x,
                            const PathBatch& batch, int threads = 0);

/// Dynamic closed-form solution of the large-investor problem: value
/// function, optimal feedback strategy, utility intensity and the pathwise
/// optimal wealth.
class LargeInvestorSolution {
public:
    LargeInvestorSolution(const MarketSpec& m, const PreferenceSpec& pref, const TimeGrid& grid);

    double value(double t, double x) const;
    double value_time_derivative(double t, double x) const;

    std::vector<double> kappa(double t) const;        // b + gamma_hat - delta_hat
    double kappa_sq_tail(double t) const;             // int_t^T |kappa|^2 dr
    std::vector<double> pi_fraction(double t) const;  // kappa / (1 - alpha)
    std::vector<double> pi_hat(double t, double x) const;
    std::vector<double> z_hat(double s, double wealth) const;

    /// Pathwise optimal wealth at the requested knots (path-major).
    std::vector<double> x_hat_at(const PathBatch& batch, double x0, std::span<const int> knots,
                                 int threads = 0) const;

    const std::vector<double>& kappa_steps() const { return kappa_; }
    const TimeGrid& grid() const { return grid_; }

private:
    TimeGrid grid_{};
    double alpha_ = 0.5;
    int dim_ = 1;
    std::vector<double> kappa_;      // step-major
    std::vector<double> gamma_hat_;  // step-major
    std::vector<double> kappa_sq_;   // per step, |kappa_i|^2
    std::vector<double> suffix_;     // per knot, int_{t_k}^T |kappa|^2 dr
};

}  // namespace recdual
