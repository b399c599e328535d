#include "solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace recdual {

namespace {

double clip(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

struct GenCoeffs {
    double c1, c3, c4;  // alpha/(2(1-a)^2), 1/(1-a), a/(1-a)
    explicit GenCoeffs(double alpha)
        : c1(alpha / (2.0 * (1.0 - alpha) * (1.0 - alpha))),
          c3(1.0 / (1.0 - alpha)),
          c4(alpha / (1.0 - alpha)) {}
};

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("alpha must lie in (0, 1)");
}

}  // namespace

std::vector<double> gamma_hat_linear(std::span<const double> b, std::span<const double> K,
                                     double alpha, std::span<const double> z) {
    check_alpha(alpha);
    if (b.size() != K.size() || b.size() != z.size())
        throw std::invalid_argument("dimension mismatch");
    const double slope = (1.0 - alpha) / alpha;
    std::vector<double> g(b.size());
    for (size_t i = 0; i < b.size(); ++i) g[i] = clip(-b[i] - slope * z[i], -K[i], K[i]);
    return g;
}

GeneratorPoint generator_linear(std::span<const double> b, std::span<const double> K,
                                double alpha, std::span<const double> z) {
    GenCoeffs c(alpha);
    GeneratorPoint out;
    out.gamma = gamma_hat_linear(b, K, alpha, z);
    double v = 0.0;
    for (size_t i = 0; i < b.size(); ++i) {
        const double s = b[i] + out.gamma[i];
        v += c.c1 * s * s + c.c3 * out.gamma[i] * z[i] + c.c4 * b[i] * z[i] + 0.5 * z[i] * z[i];
    }
    out.value = v;
    return out;
}

GeneratorPoint generator_higher(double b, double K, double r, double R, double alpha, double z) {
    check_alpha(alpha);
    if (r > R) throw std::invalid_argument("borrowing rate must dominate the riskless rate");
    if (K < 0.0) throw std::invalid_argument("ambiguity bound must be >= 0");
    GenCoeffs c(alpha);
    const auto f = [&](double mu, double g) {
        const double s = b + g - mu;
        return c.c1 * s * s + c.c4 * mu + c.c3 * z * (g + alpha * (b - mu)) + 0.5 * z * z;
    };
    // The objective is convex with a rank-one Hessian; away from the single
    // degenerate z the minimum is on the boundary, and on that z the
    // boundary still attains it. Each edge is a clipped 1-d quadratic.
    const double mu_star_offset = (c.c4 - c.c3 * alpha * z) / (2.0 * c.c1);
    const double gamma_star_offset = c.c3 * z / (2.0 * c.c1);
    const double cand[4][2] = {
        {r, clip(-(b - r) - gamma_star_offset, -K, K)},
        {R, clip(-(b - R) - gamma_star_offset, -K, K)},
        {clip(b - K - mu_star_offset, r, R), -K},
        {clip(b + K - mu_star_offset, r, R), K},
    };
    GeneratorPoint out;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& mg : cand) {
        const double v = f(mg[0], mg[1]);
        if (v < best) {
            best = v;
            out.partner = {mg[0]};
            out.gamma = {mg[1]};
        }
    }
    out.value = best;
    return out;
}

GeneratorPoint generator_large(std::span<const double> b, std::span<const double> K,
                               std::span<const double> eps, double alpha,
                               std::span<const double> z) {
    check_alpha(alpha);
    if (b.size() != K.size() || b.size() != eps.size() || b.size() != z.size())
        throw std::invalid_argument("dimension mismatch");
    GenCoeffs c(alpha);
    GeneratorPoint out;
    out.gamma.resize(b.size());
    out.partner.resize(b.size());
    double total = 0.0;
    for (size_t i = 0; i < b.size(); ++i) {
        double gi, di;
        if (z[i] == 0.0) {
            // Minimum of (b + gamma - delta)^2 over the product box; the
            // minimizer is non-unique when |b| <= K + eps, in which case the
            // deterministic tie-break delta = clip(b), gamma = delta - b is
            // used (only b + gamma - delta matters downstream).
            if (b[i] > K[i] + eps[i]) {
                di = eps[i];
                gi = -K[i];
            } else if (b[i] < -(K[i] + eps[i])) {
                di = -eps[i];
                gi = K[i];
            } else {
                di = clip(b[i], -eps[i], eps[i]);
                gi = di - b[i];
            }
        } else {
            const auto h = [&](double g, double d) {
                const double s = b[i] + g - d;
                return c.c1 * s * s + c.c3 * z[i] * g + c.c4 * (b[i] - d) * z[i];
            };
            const double g_off = c.c3 * z[i] / (2.0 * c.c1);
            const double d_off = c.c4 * z[i] / (2.0 * c.c1);
            const double cand[4][2] = {
                {clip(-(b[i] - eps[i]) - g_off, -K[i], K[i]), eps[i]},
                {clip(-(b[i] + eps[i]) - g_off, -K[i], K[i]), -eps[i]},
                {K[i], clip(b[i] + K[i] + d_off, -eps[i], eps[i])},
                {-K[i], clip(b[i] - K[i] + d_off, -eps[i], eps[i])},
            };
            double best = std::numeric_limits<double>::infinity();
            gi = cand[0][0];
            di = cand[0][1];
            for (const auto& gd : cand) {
                const double v = h(gd[0], gd[1]);
                if (v < best) {
                    best = v;
                    gi = gd[0];
                    di = gd[1];
                }
            }
        }
        out.gamma[i] = gi;
        out.partner[i] = di;
        const double s = b[i] + gi - di;
        total += c.c1 * s * s + c.c3 * z[i] * gi + c.c4 * (b[i] - di) * z[i] + 0.5 * z[i] * z[i];
    }
    out.value = total;
    return out;
}

GeneratorPoint generator_minimum(const MarketSpec& m, const PreferenceSpec& pref, double t,
                                 std::span<const double> z) {
    const std::vector<double> b = m.appreciation.at(t);
    switch (m.drift) {
        case DriftCase::linear:
            return generator_linear(b, pref.ambiguity, pref.alpha, z);
        case DriftCase::higher_rate:
            return generator_higher(b[0], pref.ambiguity[0], m.rate_r(t), m.rate_borrow(t),
                                    pref.alpha, z[0]);
        case DriftCase::large_investor:
            return generator_large(b, pref.ambiguity, m.impact, pref.alpha, z);
        default:
            throw std::invalid_argument("no dual generator for this drift case");
    }
}

std::vector<double> integrate_y_tilde(std::span<const double> g0_per_step, const TimeGrid& grid) {
    if (static_cast<int>(g0_per_step.size()) != grid.steps)
        throw std::invalid_argument("generator samples must match the grid");
    std::vector<double> y(static_cast<size_t>(grid.steps) + 1, 0.0);
    const double dt = grid.dt();
    for (int i = grid.steps - 1; i >= 0; --i)
        y[static_cast<size_t>(i)] = y[static_cast<size_t>(i) + 1] + g0_per_step[static_cast<size_t>(i)] * dt;
    return y;
}

double zeta_hat_closed(double x, double alpha, double e_dual) {
    check_alpha(alpha);
    if (!(x > 0.0) || !(e_dual > 0.0)) throw std::domain_error("x and e_dual must be positive");
    return std::pow(x, alpha - 1.0) * std::pow(e_dual, 1.0 - alpha);
}

double v_tilde_closed(double zeta, double alpha, double e_dual) {
    check_alpha(alpha);
    if (!(zeta > 0.0)) throw std::domain_error("zeta must be positive");
    return (1.0 - alpha) / alpha * std::pow(zeta, alpha / (alpha - 1.0)) * e_dual;
}

double zeta_hat_bisect(double x, const std::function<McEstimate(double)>& v_tilde_prime,
                       const BisectOptions& opts) {
    if (!(x > 0.0)) throw std::domain_error("x must be positive");

    // f(zeta) = v_tilde'(zeta) + x is nondecreasing; bracket its sign change.
    double lo = 1.0, hi = 1.0;
    double flo = v_tilde_prime(lo).mean + x;
    double fhi = flo;
    int n = 0;
    while (flo > 0.0) {
        if (++n > opts.max_doublings)
            throw std::runtime_error("no sign change found while bracketing the multiplier");
        hi = lo;
        fhi = flo;
        lo *= 0.5;
        flo = v_tilde_prime(lo).mean + x;
    }
    n = 0;
    while (fhi < 0.0) {
        if (++n > opts.max_doublings)
            throw std::runtime_error("no sign change found while bracketing the multiplier");
        lo = hi;
        hi *= 2.0;
        fhi = v_tilde_prime(hi).mean + x;
    }

    while (hi - lo > opts.rel_tol * 0.5 * (hi + lo)) {
        const double mid = 0.5 * (lo + hi);
        const McEstimate est = v_tilde_prime(mid);
        const double fm = est.mean + x;
        if (opts.se_aware && std::abs(fm) <= est.std_error) return mid;
        (fm < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

DualPoint solve_dual(const MarketSpec& m, const PreferenceSpec& pref, double x,
                     const TimeGrid& grid) {
    m.validate();
    pref.validate();
    if (!(x > 0.0)) throw std::domain_error("initial wealth must be positive");
    if (static_cast<int>(pref.ambiguity.size()) != m.dim)
        throw std::invalid_argument("ambiguity bound dimension mismatch");
    if (m.drift != DriftCase::linear && m.drift != DriftCase::higher_rate &&
        m.drift != DriftCase::large_investor)
        throw std::invalid_argument("no dual solver for this drift case");
    if (m.drift == DriftCase::linear && !m.rate_r.is_identically(0.0))
        throw std::invalid_argument("the linear dual solution requires a zero riskless rate");

    DualPoint d;
    d.drift = m.drift;
    d.steps = grid.steps;
    d.dim = m.dim;
    d.alpha = pref.alpha;
    d.x0 = x;
    d.gamma_hat.assign(static_cast<size_t>(grid.steps) * static_cast<size_t>(m.dim), 0.0);
    d.g0.assign(static_cast<size_t>(grid.steps), 0.0);
    const bool has_partner = m.drift != DriftCase::linear;
    const size_t partner_width = m.drift == DriftCase::higher_rate ? 1 : static_cast<size_t>(m.dim);
    if (has_partner) d.partner_hat.assign(static_cast<size_t>(grid.steps) * partner_width, 0.0);

    const std::vector<double> z0(static_cast<size_t>(m.dim), 0.0);
    for (int i = 0; i < grid.steps; ++i) {
        const GeneratorPoint g = generator_minimum(m, pref, grid.knot(i), z0);
        d.g0[static_cast<size_t>(i)] = g.value;
        for (int c = 0; c < m.dim; ++c)
            d.gamma_hat[static_cast<size_t>(i) * static_cast<size_t>(m.dim) + static_cast<size_t>(c)] =
                g.gamma[static_cast<size_t>(c)];
        if (has_partner)
            for (size_t c = 0; c < partner_width; ++c)
                d.partner_hat[static_cast<size_t>(i) * partner_width + c] = g.partner[c];
    }
    d.y_tilde = integrate_y_tilde(d.g0, grid);
    d.y_tilde_0 = d.y_tilde.front();
    d.e_dual = std::exp(d.y_tilde_0);
    d.zeta_hat = zeta_hat_closed(x, pref.alpha, d.e_dual);
    d.dual_value = v_tilde_closed(d.zeta_hat, pref.alpha, d.e_dual) + d.zeta_hat * x;
    return d;
}

ControlPath dual_n_controls(const MarketSpec& m, const DualPoint& dual, const TimeGrid& grid) {
    ControlPath c;
    c.steps = grid.steps;
    c.dim = m.dim;
    c.nu.assign(static_cast<size_t>(grid.steps) * static_cast<size_t>(m.dim), 0.0);
    for (int i = 0; i < grid.steps; ++i) {
        const std::vector<double> b = m.appreciation.at(grid.knot(i));
        for (int k = 0; k < m.dim; ++k) {
            const size_t at = static_cast<size_t>(i) * static_cast<size_t>(m.dim) + static_cast<size_t>(k);
            switch (dual.drift) {
                case DriftCase::linear:
                    c.nu[at] = b[static_cast<size_t>(k)];
                    break;
                case DriftCase::higher_rate:
                    c.nu[at] = b[static_cast<size_t>(k)] - dual.partner_hat[static_cast<size_t>(i)];
                    break;
                case DriftCase::large_investor:
                    c.nu[at] = b[static_cast<size_t>(k)] - dual.partner_hat[at];
                    break;
                default:
                    throw std::logic_error("unexpected drift case");
            }
        }
    }
    if (dual.drift == DriftCase::higher_rate) c.mu = dual.partner_hat;
    return c;
}

ControlPath dual_gamma_controls(const DualPoint& dual) {
    ControlPath c;
    c.steps = dual.steps;
    c.dim = dual.dim;
    c.gamma = dual.gamma_hat;
    return c;
}

SaddlePoint assemble_saddle(const MarketSpec& m, const PreferenceSpec& pref, double x,
                            const PathBatch& batch, int threads) {
    if (batch.dim() != m.dim) throw std::invalid_argument("batch dimension mismatch");
    SaddlePoint s;
    s.dual = solve_dual(m, pref, x, batch.grid());
    s.x0 = x;

    const ControlPath nc = dual_n_controls(m, s.dual, batch.grid());
    const ControlPath gc = dual_gamma_controls(s.dual);
    const int terminal[] = {batch.grid().steps};
    PathExponentials logs = log_exponentials_at(batch, nc, gc, terminal, threads);
    s.log_n_T = std::move(logs.log_n);
    s.log_gamma_T = std::move(logs.log_gamma);

    const double log_zeta = std::log(s.dual.zeta_hat);
    const double inv = 1.0 / (pref.alpha - 1.0);
    s.xi_hat.resize(s.log_n_T.size());
    for (size_t p = 0; p < s.xi_hat.size(); ++p)
        s.xi_hat[p] = std::exp(inv * (log_zeta + s.log_n_T[p] - s.log_gamma_T[p]));
    return s;
}

LargeInvestorSolution::LargeInvestorSolution(const MarketSpec& m, const PreferenceSpec& pref,
                                             const TimeGrid& grid)
    : grid_(grid), alpha_(pref.alpha), dim_(m.dim) {
    if (m.drift != DriftCase::large_investor)
        throw std::invalid_argument("closed-form dynamic solution requires the large-investor drift");
    m.validate();
    pref.validate();
    kappa_.assign(static_cast<size_t>(grid.steps) * static_cast<size_t>(dim_), 0.0);
    gamma_hat_.assign(kappa_.size(), 0.0);
    kappa_sq_.assign(static_cast<size_t>(grid.steps), 0.0);
    const std::vector<double> z0(static_cast<size_t>(dim_), 0.0);
    for (int i = 0; i < grid.steps; ++i) {
        const std::vector<double> b = m.appreciation.at(grid.knot(i));
        const GeneratorPoint g = generator_large(b, pref.ambiguity, m.impact, alpha_, z0);
        double sq = 0.0;
        for (int c = 0; c < dim_; ++c) {
            const size_t at = static_cast<size_t>(i) * static_cast<size_t>(dim_) + static_cast<size_t>(c);
            const double k = b[static_cast<size_t>(c)] + g.gamma[static_cast<size_t>(c)] -
                             g.partner[static_cast<size_t>(c)];
            kappa_[at] = k;
            gamma_hat_[at] = g.gamma[static_cast<size_t>(c)];
            sq += k * k;
        }
        kappa_sq_[static_cast<size_t>(i)] = sq;
    }
    suffix_.assign(static_cast<size_t>(grid.steps) + 1, 0.0);
    const double dt = grid.dt();
    for (int i = grid.steps - 1; i >= 0; --i)
        suffix_[static_cast<size_t>(i)] = suffix_[static_cast<size_t>(i) + 1] + kappa_sq_[static_cast<size_t>(i)] * dt;
}

double LargeInvestorSolution::kappa_sq_tail(double t) const {
    if (t >= grid_.horizon) return 0.0;
    if (t <= 0.0) return suffix_.front();
    const double dt = grid_.dt();
    const int k = std::min(grid_.steps - 1, static_cast<int>(t / dt));
    return suffix_[static_cast<size_t>(k)] - (t - grid_.knot(k)) * kappa_sq_[static_cast<size_t>(k)];
}

double LargeInvestorSolution::value(double t, double x) const {
    if (x < 0.0) throw std::domain_error("wealth must be >= 0");
    const double growth = alpha_ / (2.0 * (1.0 - alpha_)) * kappa_sq_tail(t);
    return std::pow(x, alpha_) / alpha_ * std::exp(growth);
}

double LargeInvestorSolution::value_time_derivative(double t, double x) const {
    const double dt = grid_.dt();
    const int k = std::min(grid_.steps - 1, std::max(0, static_cast<int>(t / dt)));
    return -alpha_ / (2.0 * (1.0 - alpha_)) * kappa_sq_[static_cast<size_t>(k)] * value(t, x);
}

std::vector<double> LargeInvestorSolution::kappa(double t) const {
    const double dt = grid_.dt();
    const int k = std::min(grid_.steps - 1, std::max(0, static_cast<int>(t / dt)));
    std::vector<double> out(static_cast<size_t>(dim_));
    for (int c = 0; c < dim_; ++c)
        out[static_cast<size_t>(c)] = kappa_[static_cast<size_t>(k) * static_cast<size_t>(dim_) + static_cast<size_t>(c)];
    return out;
}

std::vector<double> LargeInvestorSolution::pi_fraction(double t) const {
    std::vector<double> out = kappa(t);
    for (double& v : out) v /= 1.0 - alpha_;
    return out;
}

std::vector<double> LargeInvestorSolution::pi_hat(double t, double x) const {
    std::vector<double> out = pi_fraction(t);
    for (double& v : out) v *= x;
    return out;
}

std::vector<double> LargeInvestorSolution::z_hat(double s, double wealth) const {
    const double factor = std::pow(wealth, alpha_) / (1.0 - alpha_) *
                          std::exp(alpha_ / (2.0 * (1.0 - alpha_)) * kappa_sq_tail(s));
    std::vector<double> out = kappa(s);
    for (double& v : out) v *= factor;
    return out;
}

std::vector<double> LargeInvestorSolution::x_hat_at(const PathBatch& batch, double x0,
                                                    std::span<const int> knots, int threads) const {
    if (!(x0 > 0.0)) throw std::domain_error("initial wealth must be positive");
    if (batch.dim() != dim_) throw std::invalid_argument("batch dimension mismatch");

    // X_hat_t = x0 exp(-a/(2(1-a)^2) int_0^t |kappa|^2) (Gamma/N)^{1/(1-a)}
    // with nu = b - delta_hat = kappa - gamma_hat.
    ControlPath nc, gc;
    nc.steps = gc.steps = grid_.steps;
    nc.dim = gc.dim = dim_;
    gc.gamma = gamma_hat_;
    nc.nu.resize(kappa_.size());
    for (size_t i = 0; i < kappa_.size(); ++i) nc.nu[i] = kappa_[i] - gamma_hat_[i];

    const PathExponentials logs = log_exponentials_at(batch, nc, gc, knots, threads);
    const double c1 = alpha_ / (2.0 * (1.0 - alpha_) * (1.0 - alpha_));
    const double inv = 1.0 / (1.0 - alpha_);
    const size_t n_knots = knots.size();
    std::vector<double> prefix(n_knots);
    for (size_t j = 0; j < n_knots; ++j)
        prefix[j] = suffix_.front() - suffix_[static_cast<size_t>(knots[j])];

    std::vector<double> out(logs.log_n.size());
    for (size_t p = 0; p < static_cast<size_t>(batch.n_paths()); ++p)
        for (size_t j = 0; j < n_knots; ++j) {
            const size_t at = p * n_knots + j;
            out[at] = x0 * std::exp(-c1 * prefix[j] + inv * (logs.log_gamma[at] - logs.log_n[at]));
        }
    return out;
}

}  // namespace recdual
