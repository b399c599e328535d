#pragma once

#include "market.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <vector>

namespace recdual {

struct TimeGrid {
    double horizon = 1.0;
    int steps = 1;

    double dt() const { return horizon / steps; }
    double knot(int i) const { return i * dt(); }
};

namespace rng {

/// Documented absolute accuracy of the rational inverse-normal approximation.
constexpr double kNormalInverseAbsTol = 1e-9;

inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Inverse of the standard normal CDF (rational minimax approximation,
/// central/tail split). Far more accurate than the documented 1e-9 bound.
double normal_inverse_cdf(double p);

/// One standard normal draw per (seed, path, draw) counter triple. Pure
/// function of its key, so any subset of paths reproduces in isolation and
/// results do not depend on the number of worker threads.
inline double standard_normal(uint64_t seed, uint64_t path, uint64_t draw) {
    uint64_t h = mix64(seed);
    h = mix64(h ^ path);
    h = mix64(h ^ draw);
    return normal_inverse_cdf(((h >> 11) + 0.5) * 0x1.0p-53);
}

}  // namespace rng

/// Lazily evaluated batch of Brownian paths on a fixed grid. Increments are
/// derived from the counter RNG, so the batch is immutable, cheap to copy,
/// and safe to share across threads. An optional per-step drift shift
/// supports simulation under a changed measure.
class PathBatch {
public:
    PathBatch() = default;
    PathBatch(TimeGrid grid, int n_paths, int dim, uint64_t seed);

    const TimeGrid& grid() const { return grid_; }
    int n_paths() const { return n_paths_; }
    int dim() const { return dim_; }
    uint64_t seed() const { return seed_; }

    /// Increment of W over [t_i, t_{i+1}) for one path/component, including
    /// any measure shift.
    double increment(int path, int step, int comp) const {
        const double z = rng::standard_normal(
            seed_, static_cast<uint64_t>(path),
            static_cast<uint64_t>(step) * static_cast<uint64_t>(dim_) + static_cast<uint64_t>(comp));
        double dw = z * sqrt_dt_;
        if (!shift_.empty())
            dw += shift_[static_cast<size_t>(step) * static_cast<size_t>(dim_) + static_cast<size_t>(comp)] * grid_.dt();
        return dw;
    }

    /// Batch with an additional per-step drift added to the increments
    /// (step-major layout, steps x dim). Shifts compose additively.
    PathBatch with_drift_shift(std::span<const double> per_step) const;

private:
    TimeGrid grid_{};
    int n_paths_ = 0;
    int dim_ = 1;
    uint64_t seed_ = 0;
    double sqrt_dt_ = 0.0;
    std::vector<double> shift_;  // step-major, empty when unshifted
};

PathBatch simulate_brownian(const TimeGrid& grid, int n_paths, int dim, uint64_t seed);

/// Reinterprets the batch draws as increments of the Brownian motion under
/// the measure tilted by gamma: the original W gains drift +gamma dt, so
/// plain averages over the shifted batch match Gamma-weighted averages over
/// the original one.
PathBatch girsanov_shift(const PathBatch& batch, std::span<const double> gamma_step_major);

/// Piecewise-constant controls sampled on the simulation grid, step-major.
/// Empty arrays stand for identically-zero controls.
struct ControlPath {
    int steps = 0;
    int dim = 1;
    std::vector<double> beta;   // steps, or empty
    std::vector<double> gamma;  // steps*dim, or empty
    std::vector<double> mu;     // steps, or empty
    std::vector<double> nu;     // steps*dim, or empty
};

/// Deterministic Monte Carlo reduction: sequential two-pass mean and
/// standard error over the path index, so serial and parallel runs agree
/// bit for bit. Throws std::domain_error on non-finite path values.
struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    int n_paths = 0;
};

McEstimate mc_expect(std::span<const double> per_path);

/// Runs fn(begin, end) over a static partition of [0, n). threads <= 0
/// selects the hardware count. Exceptions from workers are rethrown.
void parallel_for(int n, int threads, const std::function<void(int, int)>& fn);

/// log N_{0,t} and log Gamma_{0,t} per path at the requested knots
/// (flattened path-major). Riemann-Ito sums with the left-point rule;
/// exponentials stay in log space.
struct PathExponentials {
    std::vector<double> log_n;
    std::vector<double> log_gamma;
};

PathExponentials log_exponentials_at(const PathBatch& batch, const ControlPath& n_controls,
                                     const ControlPath& gamma_controls,
                                     std::span<const int> knots, int threads = 0);

/// N_{0,t} = exp(-int (mu + |nu|^2/2) dr - int nu'dW) per path at the knots.
std::vector<double> stoch_exp_n_at(const PathBatch& batch, const ControlPath& controls,
                                   std::span<const int> knots, int threads = 0);

/// Gamma_{0,t} = exp(int (beta - |gamma|^2/2) dr + int gamma'dW).
std::vector<double> stoch_exp_gamma_at(const PathBatch& batch, const ControlPath& controls,
                                       std::span<const int> knots, int threads = 0);

struct EulerScan {
    std::vector<double> wealth;    // path-major at the requested knots
    std::vector<uint8_t> bankrupt; // per path: clipped-at-zero flag
};

namespace detail {

struct DriftSamples {
    DriftCase kind;
    int dim;
    std::vector<double> r, rb;        // per step
    std::vector<double> b;            // steps*dim
    std::vector<double> theta_lo, theta_hi;  // steps*dim (long/short)
    std::vector<double> eps;          // dim
    const MarketSpec* spec;           // custom drifts fall back to drift_eval

    double eval(int step, double t, double x, std::span<const double> q) const {
        const size_t row = static_cast<size_t>(step) * static_cast<size_t>(dim);
        switch (kind) {
            case DriftCase::linear: {
                double s = r[static_cast<size_t>(step)] * x;
                for (int i = 0; i < dim; ++i)
                    s += q[static_cast<size_t>(i)] * (b[row + static_cast<size_t>(i)] - r[static_cast<size_t>(step)]);
                return s;
            }
            case DriftCase::higher_rate: {
                const double rr = r[static_cast<size_t>(step)];
                const double excess = x - q[0];
                double s = rr * x + q[0] * (b[row] - rr);
                if (excess < 0.0) s += (rb[static_cast<size_t>(step)] - rr) * excess;
                return s;
            }
            case DriftCase::large_investor: {
                double s = 0.0;
                for (int i = 0; i < dim; ++i)
                    s += q[static_cast<size_t>(i)] * b[row + static_cast<size_t>(i)] -
                         eps[static_cast<size_t>(i)] * std::abs(q[static_cast<size_t>(i)]);
                return s;
            }
            case DriftCase::long_short: {
                double s = r[static_cast<size_t>(step)] * x;
                for (int i = 0; i < dim; ++i) {
                    const double qi = q[static_cast<size_t>(i)];
                    s += qi > 0.0 ? theta_lo[row + static_cast<size_t>(i)] * qi
                                  : theta_hi[row + static_cast<size_t>(i)] * qi;
                }
                return s;
            }
            case DriftCase::custom_concave:
                return spec->custom(t, x, q);
        }
        return 0.0;
    }
};

DriftSamples sample_drift(const MarketSpec& m, const TimeGrid& grid);

void throw_nonfinite_strategy();

}  // namespace detail

/// Euler stepping of the wealth equation under a feedback strategy
/// pi(t, x). Paths are clipped at zero with a recorded bankruptcy flag;
/// admissibility is reported on, not silently enforced.
template <class Strategy>
EulerScan euler_wealth_at(const MarketSpec& m, const PathBatch& batch, Strategy&& strategy,
                          double x0, std::span<const int> knots, int threads = 0) {
    if (!(x0 > 0.0)) throw std::invalid_argument("initial wealth must be positive");
    const TimeGrid& grid = batch.grid();
    const auto drift = detail::sample_drift(m, grid);
    const double dt = grid.dt();
    const int n_knots = static_cast<int>(knots.size());

    EulerScan out;
    out.wealth.assign(static_cast<size_t>(batch.n_paths()) * static_cast<size_t>(n_knots), 0.0);
    out.bankrupt.assign(static_cast<size_t>(batch.n_paths()), 0);

    parallel_for(batch.n_paths(), threads, [&](int lo, int hi) {
        std::vector<double> pi(static_cast<size_t>(batch.dim()));
        for (int p = lo; p < hi; ++p) {
            double x = x0;
            bool broke = false;
            int kpos = 0;
            for (; kpos < n_knots && knots[static_cast<size_t>(kpos)] == 0; ++kpos)
                out.wealth[static_cast<size_t>(p) * static_cast<size_t>(n_knots) + static_cast<size_t>(kpos)] = x;
            for (int i = 0; i < grid.steps; ++i) {
                const double t = grid.knot(i);
                strategy(t, x, std::span<double>(pi));
                double dx = drift.eval(i, t, x, pi) * dt;
                for (int c = 0; c < batch.dim(); ++c) {
                    if (!std::isfinite(pi[static_cast<size_t>(c)])) detail::throw_nonfinite_strategy();
                    dx += pi[static_cast<size_t>(c)] * batch.increment(p, i, c);
                }
                x += dx;
                if (x < 0.0) {
                    x = 0.0;
                    broke = true;
                }
                for (; kpos < n_knots && knots[static_cast<size_t>(kpos)] == i + 1; ++kpos)
                    out.wealth[static_cast<size_t>(p) * static_cast<size_t>(n_knots) + static_cast<size_t>(kpos)] = x;
            }
            out.bankrupt[static_cast<size_t>(p)] = broke ? 1 : 0;
        }
    });
    return out;
}

/// Path dump: header `path_id,t,W_1..W_d,X,pi_1..pi_d`, one row per
/// (path, knot) at the given stride (terminal knot always included).
/// Returns the number of data rows written.
long write_path_csv(std::ostream& os, const MarketSpec& m, const PathBatch& batch,
                    const std::function<void(double, double, std::span<double>)>& strategy,
                    double x0, int stride);

}  // namespace recdual
