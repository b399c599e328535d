#include "scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace recdual {

namespace {

using nlohmann::json;

[[noreturn]] void bad_config(const std::string& msg) {
    throw std::invalid_argument("config: " + msg);
}

double get_number(const json& j, const std::string& key) {
    if (!j.at(key).is_number()) bad_config("'" + key + "' must be a number");
    return j.at(key).get<double>();
}

// A coefficient is either a constant or a knot list [[t, value], ...] with
// left-value evaluation between knots.
TimeCurve parse_curve(const json& v, const std::string& key) {
    if (v.is_number()) return TimeCurve(v.get<double>());
    if (!v.is_array() || v.empty()) bad_config("'" + key + "' must be a number or a knot list");
    std::vector<std::pair<double, double>> knots;
    for (const auto& k : v) {
        if (!k.is_array() || k.size() != 2 || !k[0].is_number() || !k[1].is_number())
            bad_config("'" + key + "' knots must be [t, value] pairs");
        knots.emplace_back(k[0].get<double>(), k[1].get<double>());
    }
    if (knots.front().first != 0.0) bad_config("'" + key + "' must start with a knot at t = 0");
    try {
        return TimeCurve(std::move(knots));
    } catch (const std::exception& e) {
        bad_config("'" + key + "': " + e.what());
    }
}

// A vector coefficient: scalar (broadcast), array of dim numbers, or a knot
// list whose values are scalars (broadcast) or arrays of dim numbers.
VectorCurve parse_vector_curve(const json& v, const std::string& key, int dim) {
    const auto broadcast = [&](const TimeCurve& c) {
        return VectorCurve(std::vector<TimeCurve>(static_cast<size_t>(dim), c));
    };
    if (v.is_number()) return broadcast(TimeCurve(v.get<double>()));
    if (!v.is_array() || v.empty()) bad_config("'" + key + "' must be a number or an array");
    if (v[0].is_number() && v.size() == static_cast<size_t>(dim) &&
        std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number(); })) {
        std::vector<TimeCurve> comp;
        for (const auto& e : v) comp.emplace_back(e.get<double>());
        return VectorCurve(std::move(comp));
    }
    // knot list
    std::vector<std::vector<std::pair<double, double>>> per_comp(static_cast<size_t>(dim));
    for (const auto& k : v) {
        if (!k.is_array() || k.size() != 2 || !k[0].is_number())
            bad_config("'" + key + "' knots must be [t, value] pairs");
        const double t = k[0].get<double>();
        if (k[1].is_number()) {
            for (auto& pc : per_comp) pc.emplace_back(t, k[1].get<double>());
        } else if (k[1].is_array() && k[1].size() == static_cast<size_t>(dim)) {
            for (int c = 0; c < dim; ++c) {
                if (!k[1][static_cast<size_t>(c)].is_number())
                    bad_config("'" + key + "' knot values must be numbers");
                per_comp[static_cast<size_t>(c)].emplace_back(
                    t, k[1][static_cast<size_t>(c)].get<double>());
            }
        } else {
            bad_config("'" + key + "' knot values must be scalars or length-" +
                       std::to_string(dim) + " arrays");
        }
    }
    if (per_comp[0].front().first != 0.0)
        bad_config("'" + key + "' must start with a knot at t = 0");
    std::vector<TimeCurve> comp;
    for (auto& pc : per_comp) {
        try {
            comp.emplace_back(std::move(pc));
        } catch (const std::exception& e) {
            bad_config("'" + key + "': " + e.what());
        }
    }
    return VectorCurve(std::move(comp));
}

std::vector<double> parse_vector(const json& v, const std::string& key, int dim) {
    if (v.is_number()) return std::vector<double>(static_cast<size_t>(dim), v.get<double>());
    if (!v.is_array() || v.size() != static_cast<size_t>(dim))
        bad_config("'" + key + "' must be a number or a length-" + std::to_string(dim) + " array");
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number()) bad_config("'" + key + "' entries must be numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

json curve_to_json(const TimeCurve& c) {
    if (c.is_constant()) return c.knots().front().second;
    json arr = json::array();
    for (const auto& [t, v] : c.knots()) arr.push_back(json::array({t, v}));
    return arr;
}

json vector_curve_to_json(const VectorCurve& c) {
    // Canonical form: constants collapse to a scalar (all components equal)
    // or a plain array; otherwise a knot list with per-component values.
    bool all_constant = true;
    for (int i = 0; i < c.dim(); ++i) all_constant = all_constant && c.component(i).is_constant();
    if (all_constant) {
        bool all_equal = true;
        const double v0 = c.component(0).knots().front().second;
        for (int i = 1; i < c.dim(); ++i)
            all_equal = all_equal && c.component(i).knots().front().second == v0;
        if (all_equal) return v0;
        json arr = json::array();
        for (int i = 0; i < c.dim(); ++i) arr.push_back(c.component(i).knots().front().second);
        return arr;
    }
    std::set<double> times;
    for (int i = 0; i < c.dim(); ++i)
        for (const auto& [t, v] : c.component(i).knots()) times.insert(t);
    json arr = json::array();
    for (double t : times) {
        json vals = json::array();
        for (int i = 0; i < c.dim(); ++i) vals.push_back(c.component(i)(t));
        arr.push_back(json::array({t, vals}));
    }
    return arr;
}

json vector_to_json(const std::vector<double>& v) {
    if (std::all_of(v.begin(), v.end(), [&](double e) { return e == v.front(); }))
        return v.front();
    return json(v);
}

}  // namespace

std::string Scenario::description() const {
    std::ostringstream os;
    os << "case=" << case_name << " dim=" << market.dim << " horizon=" << market.horizon
       << " alpha=" << pref.alpha << " x0=" << x0 << " n_paths=" << n_paths
       << " n_steps=" << n_steps << " seed=" << seed;
    return os.str();
}

Scenario Scenario::from_json(const json& j) {
    if (!j.is_object()) bad_config("document must be a JSON object");
    Scenario s;
    if (!j.contains("case") || !j.at("case").is_string()) bad_config("'case' string is required");
    s.case_name = j.at("case").get<std::string>();

    DriftCase drift;
    if (s.case_name == "linear") drift = DriftCase::linear;
    else if (s.case_name == "higher-rate") drift = DriftCase::higher_rate;
    else if (s.case_name == "large-investor") drift = DriftCase::large_investor;
    else if (s.case_name == "long-short") drift = DriftCase::long_short;
    else bad_config("unknown case '" + s.case_name + "'");

    std::set<std::string> allowed = {"case", "dim",     "horizon", "alpha",   "K",   "x0",
                                     "n_paths", "n_steps", "seed",    "threads", "out"};
    std::set<std::string> required = {"case", "horizon", "alpha", "K", "x0"};
    switch (drift) {
        case DriftCase::linear:
            allowed.insert({"b", "r"});
            required.insert("b");
            break;
        case DriftCase::higher_rate:
            allowed.insert({"b", "r", "R"});
            required.insert({"b", "R"});
            break;
        case DriftCase::large_investor:
            allowed.insert({"b", "eps"});
            required.insert({"b", "eps"});
            break;
        case DriftCase::long_short:
            allowed.insert({"r", "theta_long", "theta_short"});
            required.insert({"theta_long", "theta_short"});
            break;
        default:
            break;
    }
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key)) bad_config("unknown key '" + key + "'");
    for (const auto& key : required)
        if (!j.contains(key)) bad_config("missing required key '" + key + "'");

    const int dim = j.contains("dim") ? static_cast<int>(get_number(j, "dim")) : 1;
    if (dim < 1) bad_config("'dim' must be >= 1");

    s.market.dim = dim;
    s.market.drift = drift;
    s.market.horizon = get_number(j, "horizon");
    if (j.contains("r")) s.market.rate_r = parse_curve(j.at("r"), "r");
    if (j.contains("R")) s.market.rate_borrow = parse_curve(j.at("R"), "R");
    if (j.contains("b")) s.market.appreciation = parse_vector_curve(j.at("b"), "b", dim);
    if (j.contains("eps")) s.market.impact = parse_vector(j.at("eps"), "eps", dim);
    if (j.contains("theta_long"))
        s.market.long_rate = parse_vector_curve(j.at("theta_long"), "theta_long", dim);
    if (j.contains("theta_short"))
        s.market.short_rate = parse_vector_curve(j.at("theta_short"), "theta_short", dim);

    s.pref.alpha = get_number(j, "alpha");
    s.pref.ambiguity = parse_vector(j.at("K"), "K", dim);

    s.x0 = get_number(j, "x0");
    if (!(s.x0 > 0.0)) bad_config("'x0' must be positive");
    if (j.contains("n_paths")) {
        s.n_paths = static_cast<int>(get_number(j, "n_paths"));
        if (s.n_paths < 1) bad_config("'n_paths' must be >= 1");
    }
    if (j.contains("n_steps")) {
        s.n_steps = static_cast<int>(get_number(j, "n_steps"));
        if (s.n_steps < 1) bad_config("'n_steps' must be >= 1");
    }
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_unsigned() && !j.at("seed").is_number_integer())
            bad_config("'seed' must be an integer");
        s.seed = j.at("seed").get<uint64_t>();
    }
    if (j.contains("threads")) s.threads = static_cast<int>(get_number(j, "threads"));
    if (j.contains("out")) {
        if (!j.at("out").is_string()) bad_config("'out' must be a string");
        s.out_path = j.at("out").get<std::string>();
    }

    try {
        s.market.validate();
        s.pref.validate();
    } catch (const std::exception& e) {
        bad_config(e.what());
    }
    if (static_cast<int>(s.pref.ambiguity.size()) != dim) bad_config("'K' dimension mismatch");
    return s;
}

Scenario Scenario::from_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        bad_config(std::string("invalid JSON: ") + e.what());
    }
    return from_json(j);
}

Scenario Scenario::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_text(ss.str());
}

nlohmann::json Scenario::to_json() const {
    json j;
    j["case"] = case_name;
    j["dim"] = market.dim;
    j["horizon"] = market.horizon;
    j["alpha"] = pref.alpha;
    j["K"] = vector_to_json(pref.ambiguity);
    switch (market.drift) {
        case DriftCase::linear:
            j["b"] = vector_curve_to_json(market.appreciation);
            j["r"] = curve_to_json(market.rate_r);
            break;
        case DriftCase::higher_rate:
            j["b"] = vector_curve_to_json(market.appreciation);
            j["r"] = curve_to_json(market.rate_r);
            j["R"] = curve_to_json(market.rate_borrow);
            break;
        case DriftCase::large_investor:
            j["b"] = vector_curve_to_json(market.appreciation);
            j["eps"] = vector_to_json(market.impact);
            break;
        case DriftCase::long_short:
            j["r"] = curve_to_json(market.rate_r);
            j["theta_long"] = vector_curve_to_json(market.long_rate);
            j["theta_short"] = vector_curve_to_json(market.short_rate);
            break;
        default:
            break;
    }
    j["x0"] = x0;
    j["n_paths"] = n_paths;
    j["n_steps"] = n_steps;
    j["seed"] = seed;
    if (threads != 0) j["threads"] = threads;
    if (out_path) j["out"] = *out_path;
    return j;
}

}  // namespace recdual
