#include "recdual/recdual.h"

#include "commands.hpp"
#include "scenario.hpp"

#include <cstring>
#include <fstream>
#include <new>
#include <string>

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(::operator new(s.size() + 1, std::nothrow));
    if (!out) return nullptr;
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

rd_status fail(rd_status code, const std::string& msg) {
    g_last_error = msg;
    return code;
}

// Runs fn, mapping exceptions onto status codes.
template <class Fn>
rd_status guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const std::invalid_argument& e) {
        return fail(RD_ERR_INVALID_ARGUMENT, e.what());
    } catch (const std::domain_error& e) {
        return fail(RD_ERR_INVALID_ARGUMENT, e.what());
    } catch (const std::out_of_range& e) {
        return fail(RD_ERR_INVALID_ARGUMENT, e.what());
    } catch (const std::runtime_error& e) {
        return fail(RD_ERR_NUMERIC, e.what());
    } catch (const std::bad_alloc&) {
        return fail(RD_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(RD_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(RD_ERR_INTERNAL, "unknown error");
    }
}

}  // namespace

struct rd_scenario {
    recdual::Scenario value;
};
struct rd_solution {
    recdual::Scenario scenario;
    recdual::SolveResult result;
};
struct rd_report {
    recdual::VerificationReport report;
};

extern "C" {

const char* rd_status_name(rd_status status) {
    switch (status) {
        case RD_OK: return "ok";
        case RD_ERR_INVALID_ARGUMENT: return "invalid argument";
        case RD_ERR_PARSE: return "parse error";
        case RD_ERR_UNSUPPORTED: return "unsupported case";
        case RD_ERR_NUMERIC: return "numeric error";
        case RD_ERR_IO: return "i/o error";
        case RD_ERR_INTERNAL: return "internal error";
    }
    return "?";
}

const char* rd_last_error(void) { return g_last_error.c_str(); }

void rd_string_free(char* s) { ::operator delete(s); }

rd_status rd_scenario_parse(const char* json_text, rd_scenario** out) {
    if (!json_text || !out) return fail(RD_ERR_INVALID_ARGUMENT, "null argument");
    *out = nullptr;
    return guarded([&]() -> rd_status {
        try {
            *out = new rd_scenario{recdual::Scenario::from_text(json_text)};
        } catch (const std::invalid_argument& e) {
            return fail(RD_ERR_PARSE, e.what());
        }
        return RD_OK;
    });
}

rd_status rd_scenario_load(const char* path, rd_scenario** out) {
    if (!path || !out) return fail(RD_ERR_INVALID_ARGUMENT, "null argument");
    *out = nullptr;
    return guarded([&]() -> rd_status {
        std::ifstream in(path);
        if (!in) return fail(RD_ERR_IO, std::string("cannot open config file: ") + path);
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        try {
            *out = new rd_scenario{recdual::Scenario::from_text(text)};
        } catch (const std::invalid_argument& e) {
            return fail(RD_ERR_PARSE, e.what());
        }
        return RD_OK;
    });
}

rd_status rd_scenario_dump(const rd_scenario* s, char** json_out) {
    if (!s || !json_out) return fail(RD_ERR_INVALID_ARGUMENT, "null argument");
    return guarded([&]() -> rd_status {
        *json_out = dup_string(s->value.to_json().dump(2) + "\n");
        return *json_out ? RD_OK : fail(RD_ERR_INTERNAL, "out of memory");
    });
}

rd_status rd_scenario_set_seed(rd_scenario* s, uint64_t seed) {
    if (!s) return fail(RD_ERR_INVALID_ARGUMENT, "null scenario");
    s->value.seed = seed;
    return RD_OK;
}

rd_status rd_scenario_set_paths(rd_scenario* s, int n_paths) {
    if (!s) return fail(RD_ERR_INVALID_ARGUMENT, "null scenario");
    if (n_paths < 1) return fail(RD_ERR_INVALID_ARGUMENT, "n_paths must be >= 1");
    s->value.n_paths = n_paths;
    return RD_OK;
}

rd_status rd_scenario_set_steps(rd_scenario* s, int n_steps) {
    if (!s) return fail(RD_ERR_INVALID_ARGUMENT, "null scenario");
    if (n_steps < 1) return fail(RD_ERR_INVALID_ARGUMENT, "n_steps must be >= 1");
    s->value.n_steps = n_steps;
    return RD_OK;
}

rd_status rd_scenario_set_threads(rd_scenario* s, int threads) {
    if (!s) return fail(RD_ERR_INVALID_ARGUMENT, "null scenario");
    s->value.threads = threads;
    return RD_OK;
}

rd_status rd_scenario_out_path(const rd_scenario* s, char** path_out) {
    if (!s || !path_out) return fail(RD_ERR_INVALID_ARGUMENT, "null argument");
    *path_out = dup_string(s->value.out_path.value_or(""));
    return *path_out ? RD_OK : fail(RD_ERR_INTERNAL, "out of memory");
}

void rd_scenario_free(rd_scenario* s) { delete s; }

rd_status rd_drift_eval(const rd_scenario* s, double t, double x, const double* q, size_t dim,
                        double* value_out) {
    if (!s || !q || !value_out) return fail(RD_ERR_INVALID_ARGUMENT, "null argument");
    return guarded([&]() -> rd_status {
        *value_out = recdual::drift_eval(s->value.market, t, x, {q, dim});
        return RD_OK;
    });
}

rd_status rd_drift_conjugate(const rd_scenario* s, double t, double mu, const double* nu,
                             size_t dim, double* value_out, int* finite_out) {
    if (!s || !nu || !value_out || !finite_out)
        return fail(RD_ERR_INVALID_ARGUMENT, "null argument");
    return guarded([&]() -> rd_status {
        const recdual::ExtReal v = recdual::drift_conjugate(s->value.market, t, mu, {nu, dim});
        *value_out = v.finite ? v.value : 0.0;
        *finite_out = v.finite ? 1 : 0;
        return RD_OK;
    });
}

rd_status rd_duality_roundtrip(const rd_scenario* s, double t, double x, const double* q,
                               size_t dim, double* value_out) {
    if (!s || !q || !value_out) return fail(RD_ERR_INVALID_ARGUMENT, "null argument");
    return guarded([&]() -> rd_status {
        *value_out = recdual::duality_roundtrip(s->value.market, t, x, {q, dim});
        return RD_OK;
    });
}

rd_status rd_solve(const rd_scenario* s, rd_solution** out) {
    if (!s || !out) return fail(RD_ERR_INVALID_ARGUMENT, "null argument");
    *out = nullptr;
    return guarded([&]() -> rd_status {
        try {
            *out = new rd_solution{s->value, recdual::run_solve(s->value)};
        } catch (const std::invalid_argument& e) {
            return fail(RD_ERR_UNSUPPORTED, e.what());
        }
        return RD_OK;
    });
}

rd_status rd_solution_dump(const rd_solution* sol, char** json_out) {
    if (!sol || !json_out) return fail(RD_ERR_INVALID_ARGUMENT, "null argument");
    return guarded([&]() -> rd_status {
        *json_out = dup_string(sol->result.document.dump(2) + "\n");
        return *json_out ? RD_OK : fail(RD_ERR_INTERNAL, "out of memory");
    });
}

rd_status rd_solution_summary(const rd_solution* sol, char** text_out) {
    if (!sol || !text_out) return fail(RD_ERR_INVALID_ARGUMENT, "null argument");
    *text_out = dup_string(sol->result.summary);
    return *text_out ? RD_OK : fail(RD_ERR_INTERNAL, "out of memory");
}

double rd_solution_zeta_hat(const rd_solution* sol) {
    return sol ? sol->result.dual.zeta_hat : 0.0;
}

double rd_solution_dual_value(const rd_solution* sol) {
    return sol ? sol->result.dual.dual_value : 0.0;
}

void rd_solution_free(rd_solution* sol) { delete sol; }

rd_status rd_simulate(const rd_scenario* s, const rd_solution* sol, const char* csv_path,
                      int stride, char** summary_json_out) {
    if (!s || !sol || !csv_path || !summary_json_out)
        return fail(RD_ERR_INVALID_ARGUMENT, "null argument");
    return guarded([&]() -> rd_status {
        std::ofstream csv(csv_path, std::ios::binary);
        if (!csv) return fail(RD_ERR_IO, std::string("cannot open csv output: ") + csv_path);
        const recdual::SimulateResult r =
            recdual::run_simulate(s->value, sol->result, csv, stride);
        csv.flush();
        if (!csv) return fail(RD_ERR_IO, std::string("failed writing csv: ") + csv_path);
        *summary_json_out = dup_string(r.summary.dump(2) + "\n");
        return *summary_json_out ? RD_OK : fail(RD_ERR_INTERNAL, "out of memory");
    });
}

rd_status rd_verify(const rd_scenario* s, rd_report** out) {
    if (!s || !out) return fail(RD_ERR_INVALID_ARGUMENT, "null argument");
    *out = nullptr;
    return guarded([&]() -> rd_status {
        try {
            *out = new rd_report{recdual::verify_scenario(s->value)};
        } catch (const std::invalid_argument& e) {
            return fail(RD_ERR_UNSUPPORTED, e.what());
        }
        return RD_OK;
    });
}

rd_status rd_report_dump(const rd_report* r, char** json_out) {
    if (!r || !json_out) return fail(RD_ERR_INVALID_ARGUMENT, "null argument");
    return guarded([&]() -> rd_status {
        *json_out = dup_string(recdual::report_to_json(r->report).dump(2) + "\n");
        return *json_out ? RD_OK : fail(RD_ERR_INTERNAL, "out of memory");
    });
}

rd_status rd_report_summary(const rd_report* r, char** text_out) {
    if (!r || !text_out) return fail(RD_ERR_INVALID_ARGUMENT, "null argument");
    *text_out = dup_string(recdual::report_summary_text(r->report));
    return *text_out ? RD_OK : fail(RD_ERR_INTERNAL, "out of memory");
}

int rd_report_passed(const rd_report* r) { return r && r->report.overall_pass ? 1 : 0; }

void rd_report_free(rd_report* r) { delete r; }

}  // extern "C"
