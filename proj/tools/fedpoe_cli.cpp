// fedpoe command-line front end; talks to the library only through fedpoe.h.
#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "fedpoe/fedpoe.h"

namespace {

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> mode;
    std::optional<std::size_t> threads;
};

int exit_code(fedpoe_status s) {
    switch (s) {
        case FEDPOE_OK: return 0;
        case FEDPOE_ERR_CONFIG: return 1;
        case FEDPOE_ERR_NUMERIC: return 2;
        case FEDPOE_ERR_BOUND: return 3;
        case FEDPOE_ERR_IO: return 4;
        default: return 5;
    }
}

int report_error(const char* what, fedpoe_status s) {
    std::cerr << "fedpoe " << what << ": ";
    switch (s) {
        case FEDPOE_ERR_CONFIG: std::cerr << "invalid configuration\n"; break;
        case FEDPOE_ERR_NUMERIC: std::cerr << "numeric failure\n"; break;
        case FEDPOE_ERR_IO: std::cerr << "i/o failure\n"; break;
        default: std::cerr << "error\n"; break;
    }
    std::string msg = fedpoe_last_error();
    if (!msg.empty() && msg.back() != '\n') msg += '\n';
    std::cerr << msg;
    return exit_code(s);
}

struct ConfigHandle {
    fedpoe_config* ptr = nullptr;
    ~ConfigHandle() { fedpoe_config_free(ptr); }
};

struct ResultHandle {
    fedpoe_result* ptr = nullptr;
    ~ResultHandle() { fedpoe_result_free(ptr); }
};

fedpoe_status load(const Flags& f, ConfigHandle& h) {
    fedpoe_status s = fedpoe_config_load(f.config.c_str(), &h.ptr);
    if (s != FEDPOE_OK) return s;
    if (f.seed) fedpoe_config_set_seed(h.ptr, *f.seed);
    if (f.threads && (s = fedpoe_config_set_threads(h.ptr, *f.threads)) != FEDPOE_OK) return s;
    if (f.out) fedpoe_config_set_output(h.ptr, f.out->c_str());
    if (f.mode && (s = fedpoe_config_set_mode(h.ptr, f.mode->c_str())) != FEDPOE_OK) return s;
    return FEDPOE_OK;
}

void print_notes(const fedpoe_result* r) {
    const std::string notes = fedpoe_result_notes(r);
    if (!notes.empty()) std::cerr << notes;
}

int cmd_run(const Flags& f) {
    ConfigHandle cfg;
    if (auto s = load(f, cfg); s != FEDPOE_OK) return report_error("run", s);
    ResultHandle res;
    if (auto s = fedpoe_run(cfg.ptr, &res.ptr); s != FEDPOE_OK) return report_error("run", s);
    const std::string dir = fedpoe_config_output_dir(cfg.ptr);
    if (auto s = fedpoe_result_write(res.ptr, dir.c_str()); s != FEDPOE_OK) return report_error("run", s);
    print_notes(res.ptr);
    std::printf("wrote %s/{summary.json,ledger.jsonl,trace.csv}\n", dir.c_str());
    std::printf("mean MSE %.6g\n", fedpoe_result_mean_mse(res.ptr));
    return 0;
}

int cmd_oracle(const Flags& f) {
    ConfigHandle cfg;
    if (auto s = load(f, cfg); s != FEDPOE_OK) return report_error("oracle", s);
    ResultHandle res;
    if (auto s = fedpoe_oracle(cfg.ptr, &res.ptr); s != FEDPOE_OK) return report_error("oracle", s);
    const std::string dir = fedpoe_config_output_dir(cfg.ptr);
    if (auto s = fedpoe_result_write_oracle(res.ptr, dir.c_str()); s != FEDPOE_OK) return report_error("oracle", s);
    print_notes(res.ptr);
    std::printf("wrote %s/oracle.json\n", dir.c_str());
    return 0;
}

int cmd_verify(const Flags& f) {
    ConfigHandle cfg;
    if (auto s = load(f, cfg); s != FEDPOE_OK) return report_error("verify", s);
    ResultHandle res;
    if (auto s = fedpoe_run(cfg.ptr, &res.ptr); s != FEDPOE_OK) return report_error("verify", s);
    const std::string dir = fedpoe_config_output_dir(cfg.ptr);
    if (auto s = fedpoe_result_write(res.ptr, dir.c_str()); s != FEDPOE_OK) return report_error("verify", s);
    if (auto s = fedpoe_result_write_oracle(res.ptr, dir.c_str()); s != FEDPOE_OK) return report_error("verify", s);
    print_notes(res.ptr);
    if (fedpoe_result_bound_count(res.ptr) == 0) {
        std::printf("no applicable bounds\n");
        return 0;
    }
    std::fputs(fedpoe_result_bound_table(res.ptr), stdout);
    const std::size_t bad = fedpoe_result_bounds_violated(res.ptr);
    if (bad > 0) {
        std::fprintf(stderr, "%zu of %zu bounds violated\n", bad, fedpoe_result_bound_count(res.ptr));
        return exit_code(FEDPOE_ERR_BOUND);
    }
    std::printf("all %zu bounds satisfied\n", fedpoe_result_bound_count(res.ptr));
    return 0;
}

int cmd_report(const Flags& f) {
    std::string dir;
    if (f.out) {
        dir = *f.out;
    } else {
        if (f.config.empty()) {
            std::cerr << "fedpoe report: give --out or --config\n";
            return 1;
        }
        ConfigHandle cfg;
        if (auto s = load(f, cfg); s != FEDPOE_OK) return report_error("report", s);
        dir = fedpoe_config_output_dir(cfg.ptr);
    }
    const std::string path = dir + "/summary.json";
    char* text = nullptr;
    if (auto s = fedpoe_report(path.c_str(), &text); s != FEDPOE_OK) return report_error("report", s);
    std::fputs(text, stdout);
    fedpoe_string_free(text);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated online learning simulator with personalized ensembles"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(fedpoe_version()));

    Flags flags;
    auto add_common = [&](CLI::App* sub, bool config_required) {
        auto* opt = sub->add_option("--config", flags.config, "Run configuration (YAML)");
        if (config_required) opt->required();
        sub->add_option("--seed", flags.seed, "Override the configured seed");
        sub->add_option("--out", flags.out, "Output directory");
        sub->add_option("--mode", flags.mode, "fed-poe, ensemble-only, fed-ogd or local-ogd");
        sub->add_option("--threads", flags.threads, "Client worker threads");
    };
    auto* run = app.add_subcommand("run", "Run the experiment and write summary, ledger and trace");
    auto* oracle = app.add_subcommand("oracle", "Compute the hindsight comparators");
    auto* verify = app.add_subcommand("verify", "Run and check the regret bounds (exit 3 on violation)");
    auto* report = app.add_subcommand("report", "Print a digest of a previous run's summary");
    add_common(run, true);
    add_common(oracle, true);
    add_common(verify, true);
    add_common(report, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    if (*run) return cmd_run(flags);
    if (*oracle) return cmd_oracle(flags);
    if (*verify) return cmd_verify(flags);
    return cmd_report(flags);
}
