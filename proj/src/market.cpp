#include "market.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace recdual {

namespace {

constexpr double kDomainSlack = 1e-9;

double positive_part(double v) { return v > 0.0 ? v : 0.0; }
double negative_part(double v) { return v < 0.0 ? -v : 0.0; }

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

// Merged knot times of a set of curves; piecewise-constant invariants only
// need to be checked there.
std::vector<double> merged_knot_times(std::initializer_list<const TimeCurve*> curves) {
    std::vector<double> ts;
    for (const TimeCurve* c : curves)
        for (const auto& [t, v] : c->knots()) ts.push_back(t);
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    return ts;
}

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double unit_uniform(uint64_t h) { return ((h >> 11) + 0.5) * 0x1.0p-53; }

}  // namespace

TimeCurve::TimeCurve(std::vector<std::pair<double, double>> knots) : knots_(std::move(knots)) {
    require(!knots_.empty(), "time curve needs at least one knot");
    for (size_t i = 0; i < knots_.size(); ++i) {
        require(std::isfinite(knots_[i].first) && std::isfinite(knots_[i].second),
                "time curve knots must be finite");
        if (i > 0)
            require(knots_[i].first > knots_[i - 1].first,
                    "time curve knots must be strictly increasing in time");
    }
}

double TimeCurve::operator()(double t) const {
    if (knots_.size() == 1) return knots_.front().second;
    // Latest knot with time <= t.
    auto it = std::upper_bound(knots_.begin(), knots_.end(), t,
                               [](double lhs, const auto& k) { return lhs < k.first; });
    if (it == knots_.begin()) return knots_.front().second;
    return std::prev(it)->second;
}

bool TimeCurve::is_identically(double v) const {
    return std::all_of(knots_.begin(), knots_.end(),
                       [&](const auto& k) { return k.second == v; });
}

double TimeCurve::max_abs() const {
    double m = 0.0;
    for (const auto& [t, v] : knots_) m = std::max(m, std::abs(v));
    return m;
}

double TimeCurve::min_value() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& [t, v] : knots_) m = std::min(m, v);
    return m;
}

double TimeCurve::max_value() const {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& [t, v] : knots_) m = std::max(m, v);
    return m;
}

VectorCurve VectorCurve::constant(const std::vector<double>& values) {
    std::vector<TimeCurve> comp;
    comp.reserve(values.size());
    for (double v : values) comp.emplace_back(v);
    return VectorCurve(std::move(comp));
}

void VectorCurve::eval(double t, std::span<double> out) const {
    if (out.size() != comp_.size()) throw std::invalid_argument("vector curve output size mismatch");
    for (size_t i = 0; i < comp_.size(); ++i) out[i] = comp_[i](t);
}

std::vector<double> VectorCurve::at(double t) const {
    std::vector<double> out(comp_.size());
    eval(t, out);
    return out;
}

const char* drift_case_name(DriftCase c) {
    switch (c) {
        case DriftCase::linear: return "linear";
        case DriftCase::higher_rate: return "higher-rate";
        case DriftCase::large_investor: return "large-investor";
        case DriftCase::long_short: return "long-short";
        case DriftCase::custom_concave: return "custom-concave";
    }
    return "?";
}

void MarketSpec::validate() const {
    require(dim >= 1, "dim must be >= 1");
    require(std::isfinite(horizon) && horizon > 0.0, "horizon must be positive");
    switch (drift) {
        case DriftCase::linear:
            require(appreciation.dim() == dim, "appreciation must have one component per dimension");
            break;
        case DriftCase::higher_rate: {
            require(dim == 1, "higher-rate drift is scalar only");
            require(appreciation.dim() == 1, "appreciation must be scalar for higher-rate");
            for (double t : merged_knot_times({&rate_r, &rate_borrow}))
                require(rate_borrow(t) >= rate_r(t), "borrowing rate must dominate the riskless rate");
            break;
        }
        case DriftCase::large_investor:
            require(appreciation.dim() == dim, "appreciation must have one component per dimension");
            require(static_cast<int>(impact.size()) == dim, "impact must have one entry per dimension");
            for (double e : impact) require(e >= 0.0 && std::isfinite(e), "impact entries must be >= 0");
            require(rate_r.is_identically(0.0), "large-investor drift fixes the riskless rate to zero");
            break;
        case DriftCase::long_short:
            require(long_rate.dim() == dim && short_rate.dim() == dim,
                    "long/short rates must have one component per dimension");
            for (int i = 0; i < dim; ++i)
                for (double t : merged_knot_times({&long_rate.component(i), &short_rate.component(i)}))
                    require(long_rate.component(i)(t) >= short_rate.component(i)(t),
                            "long rate must dominate short rate componentwise");
            break;
        case DriftCase::custom_concave:
            require(static_cast<bool>(custom), "custom drift sampler missing");
            require(custom_lipschitz > 0.0, "custom drift needs a positive Lipschitz bound");
            break;
    }
}

double MarketSpec::conjugate_box_bound() const {
    const double r_abs = rate_r.max_abs();
    double c = 0.0;
    switch (drift) {
        case DriftCase::linear:
            c = r_abs;
            for (int i = 0; i < appreciation.dim(); ++i)
                c = std::max(c, appreciation.component(i).max_abs() + r_abs);
            break;
        case DriftCase::higher_rate: {
            const double rb = rate_borrow.max_abs();
            c = std::max(r_abs, rb);
            c = std::max(c, appreciation.component(0).max_abs() + std::max(r_abs, rb));
            break;
        }
        case DriftCase::large_investor:
            for (int i = 0; i < dim; ++i)
                c = std::max(c, appreciation.component(i).max_abs() + impact[static_cast<size_t>(i)]);
            break;
        case DriftCase::long_short:
            c = r_abs;
            for (int i = 0; i < dim; ++i) {
                c = std::max(c, long_rate.component(i).max_abs());
                c = std::max(c, short_rate.component(i).max_abs());
            }
            break;
        case DriftCase::custom_concave:
            c = custom_lipschitz;
            break;
    }
    return c;
}

void PreferenceSpec::validate() const {
    require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    require(!ambiguity.empty(), "ambiguity bound vector must not be empty");
    for (double k : ambiguity)
        require(k >= 0.0 && std::isfinite(k), "ambiguity bounds must be >= 0");
}

double PreferenceSpec::utility(double x) const {
    if (x < 0.0) throw std::domain_error("utility is defined for x >= 0");
    return std::pow(x, alpha) / alpha;
}

double PreferenceSpec::marginal_inverse(double zeta) const {
    if (zeta <= 0.0) throw std::domain_error("marginal inverse is defined for zeta > 0");
    return std::pow(zeta, 1.0 / (alpha - 1.0));
}

double PreferenceSpec::utility_conjugate(double zeta) const {
    if (zeta <= 0.0) throw std::domain_error("utility conjugate is defined for zeta > 0");
    return (1.0 - alpha) / alpha * std::pow(zeta, alpha / (alpha - 1.0));
}

double PreferenceSpec::driver(std::span<const double> z) const {
    if (z.size() != ambiguity.size()) throw std::invalid_argument("driver dimension mismatch");
    double s = 0.0;
    for (size_t i = 0; i < z.size(); ++i) s += ambiguity[i] * std::abs(z[i]);
    return -s;
}

bool PreferenceSpec::conjugate_domain_contains(double beta, std::span<const double> gamma,
                                               double slack) const {
    if (gamma.size() != ambiguity.size()) throw std::invalid_argument("domain dimension mismatch");
    if (std::abs(beta) > slack) return false;
    for (size_t i = 0; i < gamma.size(); ++i)
        if (std::abs(gamma[i]) > ambiguity[i] + slack) return false;
    return true;
}

namespace {

void check_point(const MarketSpec& m, double t, std::span<const double> q_or_nu) {
    if (t < 0.0 || t > m.horizon) throw std::out_of_range("time outside [0, horizon]");
    if (static_cast<int>(q_or_nu.size()) != m.dim)
        throw std::invalid_argument("point dimension mismatch");
}

}  // namespace

double drift_eval(const MarketSpec& m, double t, double x, std::span<const double> q) {
    check_point(m, t, q);
    switch (m.drift) {
        case DriftCase::linear: {
            const double r = m.rate_r(t);
            double s = r * x;
            for (int i = 0; i < m.dim; ++i) s += q[i] * (m.appreciation.component(i)(t) - r);
            return s;
        }
        case DriftCase::higher_rate: {
            const double r = m.rate_r(t);
            const double R = m.rate_borrow(t);
            const double b = m.appreciation.component(0)(t);
            return r * x + q[0] * (b - r) - (R - r) * negative_part(x - q[0]);
        }
        case DriftCase::large_investor: {
            double s = 0.0;
            for (int i = 0; i < m.dim; ++i)
                s += q[i] * m.appreciation.component(i)(t) - m.impact[static_cast<size_t>(i)] * std::abs(q[i]);
            return s;
        }
        case DriftCase::long_short: {
            double s = m.rate_r(t) * x;
            for (int i = 0; i < m.dim; ++i)
                s += m.short_rate.component(i)(t) * positive_part(q[i]) -
                     m.long_rate.component(i)(t) * negative_part(q[i]);
            return s;
        }
        case DriftCase::custom_concave:
            return m.custom(t, x, q);
    }
    throw std::logic_error("unknown drift case");
}

ExtReal drift_conjugate(const MarketSpec& m, double t, double mu, std::span<const double> nu) {
    check_point(m, t, nu);
    switch (m.drift) {
        case DriftCase::linear: {
            const double r = m.rate_r(t);
            if (std::abs(mu - r) > kDomainSlack) return ExtReal::infinity();
            for (int i = 0; i < m.dim; ++i)
                if (std::abs(nu[i] - (m.appreciation.component(i)(t) - r)) > kDomainSlack)
                    return ExtReal::infinity();
            return ExtReal::of(0.0);
        }
        case DriftCase::higher_rate: {
            const double r = m.rate_r(t);
            const double R = m.rate_borrow(t);
            const double b = m.appreciation.component(0)(t);
            if (mu < r - kDomainSlack || mu > R + kDomainSlack) return ExtReal::infinity();
            if (std::abs(mu + nu[0] - b) > kDomainSlack) return ExtReal::infinity();
            return ExtReal::of(0.0);
        }
        case DriftCase::large_investor: {
            if (std::abs(mu) > kDomainSlack) return ExtReal::infinity();
            for (int i = 0; i < m.dim; ++i)
                if (std::abs(m.appreciation.component(i)(t) - nu[i]) >
                    m.impact[static_cast<size_t>(i)] + kDomainSlack)
                    return ExtReal::infinity();
            return ExtReal::of(0.0);
        }
        case DriftCase::long_short: {
            if (std::abs(mu - m.rate_r(t)) > kDomainSlack) return ExtReal::infinity();
            for (int i = 0; i < m.dim; ++i) {
                if (nu[i] < m.short_rate.component(i)(t) - kDomainSlack ||
                    nu[i] > m.long_rate.component(i)(t) + kDomainSlack)
                    return ExtReal::infinity();
            }
            return ExtReal::of(0.0);
        }
        case DriftCase::custom_concave:
            throw std::domain_error(
                "no closed-form conjugate for custom drifts; use drift_conjugate_numeric");
    }
    throw std::logic_error("unknown drift case");
}

ExtReal drift_conjugate_numeric(const MarketSpec& m, double t, double mu,
                                std::span<const double> nu, const GridBox& grid) {
    check_point(m, t, nu);
    if (grid.step <= 0.0 || grid.half_width < grid.step)
        throw std::invalid_argument("empty conjugate grid");

    const int n_per_axis = 2 * static_cast<int>(std::floor(grid.half_width / grid.step)) + 1;
    const int axes = 1 + m.dim;  // (x, q_1 .. q_d)
    std::vector<int> idx(static_cast<size_t>(axes), 0);
    std::vector<double> point(static_cast<size_t>(axes));
    const double lo = -std::floor(grid.half_width / grid.step) * grid.step;

    double best_interior = -std::numeric_limits<double>::infinity();
    double best_boundary = -std::numeric_limits<double>::infinity();
    while (true) {
        bool boundary = false;
        for (int a = 0; a < axes; ++a) {
            point[static_cast<size_t>(a)] = lo + idx[static_cast<size_t>(a)] * grid.step;
            if (idx[static_cast<size_t>(a)] == 0 || idx[static_cast<size_t>(a)] == n_per_axis - 1)
                boundary = true;
        }
        const double x = point[0];
        std::span<const double> q(point.data() + 1, static_cast<size_t>(m.dim));
        double v = drift_eval(m, t, x, q) - x * mu;
        for (int i = 0; i < m.dim; ++i) v -= q[i] * nu[i];
        (boundary ? best_boundary : best_interior) = std::max(boundary ? best_boundary : best_interior, v);

        int a = 0;
        for (; a < axes; ++a) {
            if (++idx[static_cast<size_t>(a)] < n_per_axis) break;
            idx[static_cast<size_t>(a)] = 0;
        }
        if (a == axes) break;
    }
    if (best_boundary > best_interior + grid.growth_margin) return ExtReal::infinity();
    return ExtReal::of(std::max(best_interior, best_boundary));
}

namespace {

// Grid over [lo, hi] with step at most `step`; both endpoints included.
std::vector<double> cover_interval(double lo, double hi, double step) {
    std::vector<double> pts;
    if (hi <= lo) {
        pts.push_back(lo);
        return pts;
    }
    const int n = std::max(1, static_cast<int>(std::ceil((hi - lo) / step)));
    pts.reserve(static_cast<size_t>(n) + 1);
    for (int k = 0; k <= n; ++k) pts.push_back(lo + (hi - lo) * k / n);
    return pts;
}

double roundtrip_custom(const MarketSpec& m, double t, double x, std::span<const double> q,
                        const GridBox& grid) {
    // Pre-sample the drift on the (x, q) box once, then scan conjugate
    // candidates over the Lipschitz box.
    const int axes = 1 + m.dim;
    std::vector<double> axis_pts = cover_interval(-grid.half_width, grid.half_width, grid.step);
    const int n_axis = static_cast<int>(axis_pts.size());

    std::vector<std::vector<double>> samples;  // (x, q..., b) per sample
    std::vector<int> idx(static_cast<size_t>(axes), 0);
    std::vector<double> point(static_cast<size_t>(axes));
    while (true) {
        for (int a = 0; a < axes; ++a) point[static_cast<size_t>(a)] = axis_pts[static_cast<size_t>(idx[static_cast<size_t>(a)])];
        std::vector<double> row = point;
        row.push_back(drift_eval(m, t, point[0], std::span<const double>(point.data() + 1, static_cast<size_t>(m.dim))));
        samples.push_back(std::move(row));
        int a = 0;
        for (; a < axes; ++a) {
            if (++idx[static_cast<size_t>(a)] < n_axis) break;
            idx[static_cast<size_t>(a)] = 0;
        }
        if (a == axes) break;
    }

    const double c1 = m.conjugate_box_bound();
    std::vector<double> dual_pts = cover_interval(-c1, c1, grid.step);
    const int n_dual = static_cast<int>(dual_pts.size());
    std::vector<int> didx(static_cast<size_t>(axes), 0);

    double best = std::numeric_limits<double>::infinity();
    bool any_finite = false;
    while (true) {
        const double mu = dual_pts[static_cast<size_t>(didx[0])];
        // sup over samples of b - x mu - q'nu; boundary growth marks the
        // point as outside the effective domain.
        double sup_interior = -std::numeric_limits<double>::infinity();
        double sup_boundary = -std::numeric_limits<double>::infinity();
        for (const auto& row : samples) {
            double v = row.back() - row[0] * mu;
            bool boundary = std::abs(row[0]) >= grid.half_width - 1e-12;
            for (int i = 0; i < m.dim; ++i) {
                v -= row[static_cast<size_t>(1 + i)] * dual_pts[static_cast<size_t>(didx[static_cast<size_t>(1 + i)])];
                if (std::abs(row[static_cast<size_t>(1 + i)]) >= grid.half_width - 1e-12) boundary = true;
            }
            (boundary ? sup_boundary : sup_interior) = std::max(boundary ? sup_boundary : sup_interior, v);
        }
        if (sup_boundary <= sup_interior + grid.growth_margin) {
            any_finite = true;
            double cand = std::max(sup_interior, sup_boundary) + x * mu;
            for (int i = 0; i < m.dim; ++i)
                cand += q[i] * dual_pts[static_cast<size_t>(didx[static_cast<size_t>(1 + i)])];
            best = std::min(best, cand);
        }
        int a = 0;
        for (; a < axes; ++a) {
            if (++didx[static_cast<size_t>(a)] < n_dual) break;
            didx[static_cast<size_t>(a)] = 0;
        }
        if (a == axes) break;
    }
    if (!any_finite) throw std::runtime_error("empty effective-domain grid");
    return best;
}

}  // namespace

double duality_roundtrip(const MarketSpec& m, double t, double x, std::span<const double> q,
                         const GridBox& grid) {
    check_point(m, t, q);
    switch (m.drift) {
        case DriftCase::linear: {
            // Singleton effective domain.
            const double r = m.rate_r(t);
            double s = x * r;
            for (int i = 0; i < m.dim; ++i) s += q[i] * (m.appreciation.component(i)(t) - r);
            return s;
        }
        case DriftCase::higher_rate: {
            const double r = m.rate_r(t);
            const double R = m.rate_borrow(t);
            const double b = m.appreciation.component(0)(t);
            double best = std::numeric_limits<double>::infinity();
            for (double mu : cover_interval(r, R, grid.step))
                best = std::min(best, x * mu + q[0] * (b - mu));
            return best;
        }
        case DriftCase::large_investor: {
            double s = 0.0;  // mu = 0 on the whole domain
            for (int i = 0; i < m.dim; ++i) {
                const double b = m.appreciation.component(i)(t);
                const double e = m.impact[static_cast<size_t>(i)];
                double best = std::numeric_limits<double>::infinity();
                for (double nu : cover_interval(b - e, b + e, grid.step))
                    best = std::min(best, q[i] * nu);
                s += best;
            }
            return s;
        }
        case DriftCase::long_short: {
            double s = x * m.rate_r(t);
            for (int i = 0; i < m.dim; ++i) {
                const double lo = m.short_rate.component(i)(t);
                const double hi = m.long_rate.component(i)(t);
                double best = std::numeric_limits<double>::infinity();
                for (double nu : cover_interval(lo, hi, grid.step)) best = std::min(best, q[i] * nu);
                s += best;
            }
            return s;
        }
        case DriftCase::custom_concave:
            return roundtrip_custom(m, t, x, q, grid);
    }
    throw std::logic_error("unknown drift case");
}

bool probe_concavity(const MarketSpec& m, double t, const GridBox& box, int n_pairs,
                     uint64_t seed, double tol) {
    const int axes = 1 + m.dim;
    std::vector<double> p1(static_cast<size_t>(axes)), p2(static_cast<size_t>(axes)),
        mid(static_cast<size_t>(axes));
    for (int k = 0; k < n_pairs; ++k) {
        for (int a = 0; a < 2 * axes; ++a) {
            const uint64_t h = splitmix64(splitmix64(seed ^ (0x51ULL + static_cast<uint64_t>(k))) ^
                                          static_cast<uint64_t>(a));
            const double u = (2.0 * unit_uniform(h) - 1.0) * box.half_width;
            (a < axes ? p1 : p2)[static_cast<size_t>(a % axes)] = u;
        }
        for (int a = 0; a < axes; ++a)
            mid[static_cast<size_t>(a)] = 0.5 * (p1[static_cast<size_t>(a)] + p2[static_cast<size_t>(a)]);
        const auto qspan = [&](std::vector<double>& p) {
            return std::span<const double>(p.data() + 1, static_cast<size_t>(m.dim));
        };
        const double v1 = drift_eval(m, t, p1[0], qspan(p1));
        const double v2 = drift_eval(m, t, p2[0], qspan(p2));
        const double vm = drift_eval(m, t, mid[0], qspan(mid));
        if (vm < 0.5 * (v1 + v2) - tol) return false;
    }
    return true;
}

}  // namespace recdual
