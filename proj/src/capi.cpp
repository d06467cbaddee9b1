#include "fedpoe/fedpoe.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "fedpoe/config.hpp"
#include "fedpoe/errors.hpp"
#include "fedpoe/experiment.hpp"

struct fedpoe_config {
    fedpoe::RunConfig config;
    std::string output_dir;
};

struct fedpoe_result {
    fedpoe::ExperimentResult result;
    std::string summary;
    std::string oracle;
    std::string bounds;
    std::string notes;
};

namespace {

thread_local std::string last_error;

fedpoe_status fail(fedpoe_status status, std::string message) {
    last_error = std::move(message);
    return status;
}

template <class Fn>
fedpoe_status guarded(Fn&& fn) {
    try {
        last_error.clear();
        return fn();
    } catch (const fedpoe::ConfigError& e) {
        std::string msg;
        for (const auto& issue : e.issues()) msg += issue + "\n";
        return fail(FEDPOE_ERR_CONFIG, msg);
    } catch (const fedpoe::NumericError& e) {
        return fail(FEDPOE_ERR_NUMERIC, e.what());
    } catch (const fedpoe::IoError& e) {
        return fail(FEDPOE_ERR_IO, e.what());
    } catch (const std::invalid_argument& e) {
        return fail(FEDPOE_ERR_ARGUMENT, e.what());
    } catch (const std::bad_alloc&) {
        return fail(FEDPOE_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(FEDPOE_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(FEDPOE_ERR_INTERNAL, "unknown error");
    }
}

fedpoe_status make_result(const fedpoe_config* config, fedpoe_result** out, const fedpoe::ExperimentOptions& opts) {
    if (!config || !out) return fail(FEDPOE_ERR_ARGUMENT, "null argument");
    return guarded([&] {
        auto res = std::make_unique<fedpoe_result>();
        res->result = fedpoe::run_experiment(config->config, opts);
        res->summary = fedpoe::summary_json(res->result);
        res->oracle = fedpoe::oracle_json(res->result);
        if (res->result.summary) res->bounds = fedpoe::bound_table(res->result.summary->bounds);
        for (const auto& n : res->result.notes) res->notes += n + "\n";
        *out = res.release();
        return FEDPOE_OK;
    });
}

void refresh_output(fedpoe_config* c) { c->output_dir = fedpoe::output_directory(c->config).string(); }

}  // namespace

extern "C" {

const char* fedpoe_version(void) { return "1.0.0"; }

const char* fedpoe_last_error(void) { return last_error.c_str(); }

fedpoe_status fedpoe_config_load(const char* path, fedpoe_config** out) {
    if (!path || !out) return fail(FEDPOE_ERR_ARGUMENT, "null argument");
    return guarded([&] {
        auto c = std::make_unique<fedpoe_config>();
        c->config = fedpoe::load_config(path);
        refresh_output(c.get());
        *out = c.release();
        return FEDPOE_OK;
    });
}

fedpoe_status fedpoe_config_parse(const char* text, fedpoe_config** out) {
    if (!text || !out) return fail(FEDPOE_ERR_ARGUMENT, "null argument");
    return guarded([&] {
        auto c = std::make_unique<fedpoe_config>();
        c->config = fedpoe::parse_config(text);
        refresh_output(c.get());
        *out = c.release();
        return FEDPOE_OK;
    });
}

void fedpoe_config_free(fedpoe_config* config) { delete config; }

fedpoe_status fedpoe_config_set_seed(fedpoe_config* config, uint64_t seed) {
    if (!config) return fail(FEDPOE_ERR_ARGUMENT, "null config");
    config->config.seed = seed;
    return FEDPOE_OK;
}

fedpoe_status fedpoe_config_set_mode(fedpoe_config* config, const char* mode) {
    if (!config || !mode) return fail(FEDPOE_ERR_ARGUMENT, "null argument");
    auto m = fedpoe::parse_mode(mode);
    if (!m) {
        return fail(FEDPOE_ERR_CONFIG,
                    std::string("mode: expected fed-poe, ensemble-only, fed-ogd or local-ogd, got '") + mode + "'\n");
    }
    config->config.mode = *m;
    return guarded([&] {
        fedpoe::validate(config->config);
        return FEDPOE_OK;
    });
}

fedpoe_status fedpoe_config_set_threads(fedpoe_config* config, size_t threads) {
    if (!config) return fail(FEDPOE_ERR_ARGUMENT, "null config");
    if (threads == 0) return fail(FEDPOE_ERR_CONFIG, "threads: must be at least 1\n");
    config->config.threads = threads;
    return FEDPOE_OK;
}

fedpoe_status fedpoe_config_set_output(fedpoe_config* config, const char* dir) {
    if (!config || !dir) return fail(FEDPOE_ERR_ARGUMENT, "null argument");
    config->config.output = std::filesystem::path(dir);
    refresh_output(config);
    return FEDPOE_OK;
}

const char* fedpoe_config_output_dir(const fedpoe_config* config) {
    return config ? config->output_dir.c_str() : "";
}

fedpoe_status fedpoe_run(const fedpoe_config* config, fedpoe_result** out) {
    return make_result(config, out, fedpoe::ExperimentOptions{true, true});
}

fedpoe_status fedpoe_oracle(const fedpoe_config* config, fedpoe_result** out) {
    return make_result(config, out, fedpoe::ExperimentOptions{true, false});
}

void fedpoe_result_free(fedpoe_result* result) { delete result; }

fedpoe_status fedpoe_result_write(const fedpoe_result* result, const char* dir) {
    if (!result || !dir) return fail(FEDPOE_ERR_ARGUMENT, "null argument");
    return guarded([&] {
        fedpoe::write_run_artifacts(result->result, dir);
        return FEDPOE_OK;
    });
}

fedpoe_status fedpoe_result_write_oracle(const fedpoe_result* result, const char* dir) {
    if (!result || !dir) return fail(FEDPOE_ERR_ARGUMENT, "null argument");
    return guarded([&] {
        fedpoe::write_text(std::filesystem::path(dir) / "oracle.json", result->oracle);
        return FEDPOE_OK;
    });
}

const char* fedpoe_result_summary_json(const fedpoe_result* result) { return result ? result->summary.c_str() : ""; }
const char* fedpoe_result_oracle_json(const fedpoe_result* result) { return result ? result->oracle.c_str() : ""; }
const char* fedpoe_result_bound_table(const fedpoe_result* result) { return result ? result->bounds.c_str() : ""; }
const char* fedpoe_result_notes(const fedpoe_result* result) { return result ? result->notes.c_str() : ""; }

size_t fedpoe_result_bound_count(const fedpoe_result* result) {
    if (!result || !result->result.summary) return 0;
    return result->result.summary->bounds.size();
}

size_t fedpoe_result_bounds_violated(const fedpoe_result* result) {
    return result ? result->result.violated_bounds() : 0;
}

double fedpoe_result_mean_mse(const fedpoe_result* result) {
    if (!result || !result->result.summary) return 0.0;
    return result->result.summary->mse.mean;
}

fedpoe_status fedpoe_report(const char* summary_path, char** text) {
    if (!summary_path || !text) return fail(FEDPOE_ERR_ARGUMENT, "null argument");
    return guarded([&] {
        const std::string body = fedpoe::report_from_summary(fedpoe::read_text(summary_path));
        char* buf = static_cast<char*>(std::malloc(body.size() + 1));
        if (!buf) throw std::bad_alloc();
        std::memcpy(buf, body.c_str(), body.size() + 1);
        *text = buf;
        return FEDPOE_OK;
    });
}

void fedpoe_string_free(char* text) { std::free(text); }

}  // extern "C"
