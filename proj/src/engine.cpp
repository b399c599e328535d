#include "engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <thread>

namespace recdual {

namespace rng {

// Wichura's rational approximation of the normal quantile (central region
// plus two tail regimes split at sqrt(-log r) = 5).
double normal_inverse_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal quantile needs p in (0, 1)");
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                     6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                   1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
                 1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
               (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                     3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
                   5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
                 4.2313330701600911252e1) * r + 1.0);
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                    2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                  3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
                4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
              (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                    1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                  6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
                2.05319162663775882187e0) * r + 1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                    1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                  2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
                5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
              (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                    1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                  1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
                5.99832206555887937690e-1) * r + 1.0);
    }
    return q < 0.0 ? -val : val;
}

}  // namespace rng

PathBatch::PathBatch(TimeGrid grid, int n_paths, int dim, uint64_t seed)
    : grid_(grid), n_paths_(n_paths), dim_(dim), seed_(seed), sqrt_dt_(std::sqrt(grid.dt())) {}

PathBatch PathBatch::with_drift_shift(std::span<const double> per_step) const {
    const size_t want = static_cast<size_t>(grid_.steps) * static_cast<size_t>(dim_);
    if (per_step.size() != want) throw std::invalid_argument("drift shift grid mismatch");
    PathBatch shifted = *this;
    if (shifted.shift_.empty()) shifted.shift_.assign(want, 0.0);
    for (size_t i = 0; i < want; ++i) shifted.shift_[i] += per_step[i];
    return shifted;
}

PathBatch simulate_brownian(const TimeGrid& grid, int n_paths, int dim, uint64_t seed) {
    if (n_paths < 1) throw std::invalid_argument("need at least one path");
    if (grid.steps < 1) throw std::invalid_argument("need at least one step");
    if (dim < 1) throw std::invalid_argument("need at least one Brownian component");
    if (!(grid.horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
    return PathBatch(grid, n_paths, dim, seed);
}

PathBatch girsanov_shift(const PathBatch& batch, std::span<const double> gamma_step_major) {
    return batch.with_drift_shift(gamma_step_major);
}

McEstimate mc_expect(std::span<const double> per_path) {
    if (per_path.empty()) throw std::invalid_argument("empty sample");
    double sum = 0.0;
    for (double v : per_path) {
        if (!std::isfinite(v)) throw std::domain_error("non-finite path value in reduction");
        sum += v;
    }
    const int n = static_cast<int>(per_path.size());
    const double mean = sum / n;
    double ss = 0.0;
    for (double v : per_path) {
        const double d = v - mean;
        ss += d * d;
    }
    const double var = n > 1 ? ss / (n - 1) : 0.0;
    return {mean, std::sqrt(var / n), n};
}

void parallel_for(int n, int threads, const std::function<void(int, int)>& fn) {
    if (n <= 0) return;
    int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;
    workers = std::min(workers, n);
    if (workers == 1) {
        fn(0, n);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<size_t>(workers));
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        const int lo = static_cast<int>(static_cast<long long>(n) * w / workers);
        const int hi = static_cast<int>(static_cast<long long>(n) * (w + 1) / workers);
        pool.emplace_back([&, lo, hi, w] {
            try {
                fn(lo, hi);
            } catch (...) {
                errors[static_cast<size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

namespace {

void check_controls(const PathBatch& batch, const ControlPath& c, const char* what) {
    const auto steps = static_cast<size_t>(batch.grid().steps);
    const auto vec = steps * static_cast<size_t>(batch.dim());
    const bool ok = (c.beta.empty() || c.beta.size() == steps) &&
                    (c.mu.empty() || c.mu.size() == steps) &&
                    (c.gamma.empty() || c.gamma.size() == vec) &&
                    (c.nu.empty() || c.nu.size() == vec);
    if (!ok) throw std::invalid_argument(std::string(what) + ": control grid mismatch");
}

}  // namespace

PathExponentials log_exponentials_at(const PathBatch& batch, const ControlPath& n_controls,
                                     const ControlPath& gamma_controls,
                                     std::span<const int> knots, int threads) {
    check_controls(batch, n_controls, "N controls");
    check_controls(batch, gamma_controls, "Gamma controls");
    const TimeGrid& grid = batch.grid();
    const double dt = grid.dt();
    const int dim = batch.dim();
    const int n_knots = static_cast<int>(knots.size());
    for (int k : knots)
        if (k < 0 || k > grid.steps) throw std::invalid_argument("knot index out of range");

    // Per-step drift parts are path independent; precompute them.
    std::vector<double> n_drift(static_cast<size_t>(grid.steps), 0.0);
    std::vector<double> g_drift(static_cast<size_t>(grid.steps), 0.0);
    for (int i = 0; i < grid.steps; ++i) {
        const size_t row = static_cast<size_t>(i) * static_cast<size_t>(dim);
        double nn = n_controls.mu.empty() ? 0.0 : n_controls.mu[static_cast<size_t>(i)];
        double gg = gamma_controls.beta.empty() ? 0.0 : gamma_controls.beta[static_cast<size_t>(i)];
        for (int c = 0; c < dim; ++c) {
            if (!n_controls.nu.empty()) {
                const double v = n_controls.nu[row + static_cast<size_t>(c)];
                nn += 0.5 * v * v;
            }
            if (!gamma_controls.gamma.empty()) {
                const double v = gamma_controls.gamma[row + static_cast<size_t>(c)];
                gg -= 0.5 * v * v;
            }
        }
        n_drift[static_cast<size_t>(i)] = -nn * dt;
        g_drift[static_cast<size_t>(i)] = gg * dt;
    }

    PathExponentials out;
    out.log_n.assign(static_cast<size_t>(batch.n_paths()) * static_cast<size_t>(n_knots), 0.0);
    out.log_gamma.assign(out.log_n.size(), 0.0);

    parallel_for(batch.n_paths(), threads, [&](int lo, int hi) {
        for (int p = lo; p < hi; ++p) {
            double log_n = 0.0, log_g = 0.0;
            int kpos = 0;
            const size_t base = static_cast<size_t>(p) * static_cast<size_t>(n_knots);
            for (; kpos < n_knots && knots[static_cast<size_t>(kpos)] == 0; ++kpos) {
                out.log_n[base + static_cast<size_t>(kpos)] = 0.0;
                out.log_gamma[base + static_cast<size_t>(kpos)] = 0.0;
            }
            for (int i = 0; i < grid.steps; ++i) {
                const size_t row = static_cast<size_t>(i) * static_cast<size_t>(dim);
                double n_sto = 0.0, g_sto = 0.0;
                for (int c = 0; c < dim; ++c) {
                    const double dw = batch.increment(p, i, c);
                    if (!n_controls.nu.empty()) n_sto -= n_controls.nu[row + static_cast<size_t>(c)] * dw;
                    if (!gamma_controls.gamma.empty())
                        g_sto += gamma_controls.gamma[row + static_cast<size_t>(c)] * dw;
                }
                log_n += n_drift[static_cast<size_t>(i)] + n_sto;
                log_g += g_drift[static_cast<size_t>(i)] + g_sto;
                for (; kpos < n_knots && knots[static_cast<size_t>(kpos)] == i + 1; ++kpos) {
                    out.log_n[base + static_cast<size_t>(kpos)] = log_n;
                    out.log_gamma[base + static_cast<size_t>(kpos)] = log_g;
                }
            }
        }
    });
    return out;
}

std::vector<double> stoch_exp_n_at(const PathBatch& batch, const ControlPath& controls,
                                   std::span<const int> knots, int threads) {
    ControlPath none;
    auto logs = log_exponentials_at(batch, controls, none, knots, threads);
    std::vector<double> out(logs.log_n.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::exp(logs.log_n[i]);
    return out;
}

std::vector<double> stoch_exp_gamma_at(const PathBatch& batch, const ControlPath& controls,
                                       std::span<const int> knots, int threads) {
    ControlPath none;
    auto logs = log_exponentials_at(batch, none, controls, knots, threads);
    std::vector<double> out(logs.log_gamma.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::exp(logs.log_gamma[i]);
    return out;
}

namespace detail {

DriftSamples sample_drift(const MarketSpec& m, const TimeGrid& grid) {
    DriftSamples s;
    s.kind = m.drift;
    s.dim = m.dim;
    s.spec = &m;
    const auto steps = static_cast<size_t>(grid.steps);
    const auto vec = steps * static_cast<size_t>(m.dim);
    s.r.assign(steps, 0.0);
    for (int i = 0; i < grid.steps; ++i) s.r[static_cast<size_t>(i)] = m.rate_r(grid.knot(i));
    switch (m.drift) {
        case DriftCase::linear:
        case DriftCase::higher_rate:
        case DriftCase::large_investor:
            s.b.assign(vec, 0.0);
            for (int i = 0; i < grid.steps; ++i)
                for (int c = 0; c < m.dim; ++c)
                    s.b[static_cast<size_t>(i) * static_cast<size_t>(m.dim) + static_cast<size_t>(c)] =
                        m.appreciation.component(c)(grid.knot(i));
            break;
        default:
            break;
    }
    if (m.drift == DriftCase::higher_rate) {
        s.rb.assign(steps, 0.0);
        for (int i = 0; i < grid.steps; ++i) s.rb[static_cast<size_t>(i)] = m.rate_borrow(grid.knot(i));
    }
    if (m.drift == DriftCase::large_investor) s.eps = m.impact;
    if (m.drift == DriftCase::long_short) {
        s.theta_lo.assign(vec, 0.0);
        s.theta_hi.assign(vec, 0.0);
        for (int i = 0; i < grid.steps; ++i)
            for (int c = 0; c < m.dim; ++c) {
                const size_t at = static_cast<size_t>(i) * static_cast<size_t>(m.dim) + static_cast<size_t>(c);
                s.theta_lo[at] = m.short_rate.component(c)(grid.knot(i));
                s.theta_hi[at] = m.long_rate.component(c)(grid.knot(i));
            }
    }
    return s;
}

void throw_nonfinite_strategy() {
    throw std::runtime_error("strategy returned a non-finite position");
}

}  // namespace detail

long write_path_csv(std::ostream& os, const MarketSpec& m, const PathBatch& batch,
                    const std::function<void(double, double, std::span<double>)>& strategy,
                    double x0, int stride) {
    if (stride < 1) throw std::invalid_argument("stride must be >= 1");
    const TimeGrid& grid = batch.grid();
    const auto drift = detail::sample_drift(m, grid);
    const double dt = grid.dt();
    const int dim = batch.dim();

    os << "path_id,t";
    for (int c = 1; c <= dim; ++c) os << ",W_" << c;
    os << ",X";
    for (int c = 1; c <= dim; ++c) os << ",pi_" << c;
    os << "\n";

    char buf[32];
    const auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << ',' << buf;
    };

    long rows = 0;
    std::vector<double> w(static_cast<size_t>(dim), 0.0);
    std::vector<double> pi(static_cast<size_t>(dim), 0.0);
    for (int p = 0; p < batch.n_paths(); ++p) {
        std::fill(w.begin(), w.end(), 0.0);
        double x = x0;
        for (int i = 0; i <= grid.steps; ++i) {
            const double t = grid.knot(i);
            strategy(t, x, std::span<double>(pi));
            if (i % stride == 0 || i == grid.steps) {
                os << p;
                put(t);
                for (int c = 0; c < dim; ++c) put(w[static_cast<size_t>(c)]);
                put(x);
                for (int c = 0; c < dim; ++c) put(pi[static_cast<size_t>(c)]);
                os << "\n";
                ++rows;
            }
            if (i == grid.steps) break;
            double dx = drift.eval(i, t, x, pi) * dt;
            for (int c = 0; c < dim; ++c) {
                const double dw = batch.increment(p, i, c);
                dx += pi[static_cast<size_t>(c)] * dw;
                w[static_cast<size_t>(c)] += dw;
            }
            x = std::max(0.0, x + dx);
        }
    }
    return rows;
}

}  // namespace recdual
