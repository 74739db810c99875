#include <pthread.h>
#include <signal.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "escalate/diagnostics.hpp"
#include "escalate/error.hpp"
#include "escalate/report.hpp"
#include "escalate/scenario.hpp"
#include "escalate/service/http_server.hpp"

using namespace escalate;
using json = nlohmann::json;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

/// A model that failed to parse, validate or compile.
struct ValidationFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void print_findings(const ValidationReport& report, std::ostream& out) {
    for (const auto& f : report.findings) {
        out << to_string(f.severity) << ' ' << f.code << (f.path.empty() ? "" : " at " + f.path) << ": " << f.message
            << '\n';
    }
}

ModelSpec load_spec(const std::string& path) {
    try {
        return load_model(path);
    } catch (const Error& e) {
        throw ValidationFailure(path + ": " + e.code() + (e.path().empty() ? "" : " at " + e.path()) + ": " + e.what());
    }
}

ModelHandle load_compiled(const std::string& path) {
    auto spec = load_spec(path);
    const auto report = check_model(spec);
    if (report.has_errors()) {
        print_findings(report, std::cerr);
        throw ValidationFailure(path + ": model is invalid");
    }
    return CompiledModel::compile(std::move(spec));
}

struct Output {
    std::string format = "csv";
    std::string file;

    void add(CLI::App* cmd) {
        cmd->add_option("--out", format, "Output format")->check(CLI::IsMember({"csv", "json"}));
        cmd->add_option("-o,--output", file, "Write to this file instead of stdout");
    }
    bool json_mode() const { return format == "json"; }

    void write(const std::string& text) const {
        if (file.empty()) {
            std::cout << text;
            std::cout.flush();
            return;
        }
        std::ofstream out(file, std::ios::binary);
        if (!out) throw Error("IO_ERROR", "cannot write '" + file + "'");
        out << text;
    }
    void write(const json& doc) const { write(doc.dump(2) + "\n"); }
};

std::vector<std::int64_t> parse_int_list(const std::string& text) {
    std::vector<std::int64_t> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stoll(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::logic_error&) {
            throw Error("INVALID_ARGUMENT", "'" + item + "' is not an integer");
        }
    }
    return out;
}

int serve(const std::string& address, const std::string& data_dir) {
    // Signals go to a dedicated thread so shutdown runs outside a handler.
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    const auto [host, port] = service::parse_address(address);
    service::CaseService svc(data_dir);
    service::HttpServer server(svc);
    const int bound = server.bind(host, port);
    if (bound < 0) throw Error("IO_ERROR", "cannot bind " + address);
    std::cout << "listening on " << host << ':' << bound << " data " << data_dir << std::endl;

    std::thread waiter([&] {
        int sig = 0;
        sigwait(&set, &sig);
        server.stop();
    });
    const bool ok = server.run();
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    return ok ? 0 : kExitRuntime;
}

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v && *v ? v : fallback;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Escalation-stage inference over a semi-Markov staged model"};
    app.require_subcommand(1);
    std::function<int()> action;

    // validate
    std::string model_path;
    Output out;
    auto* validate = app.add_subcommand("validate", "Check a model document; exit 1 on errors");
    validate->add_option("model", model_path)->required();
    out.add(validate);
    validate->callback([&] {
        action = [&] {
            ModelSpec spec;
            try {
                spec = load_model(model_path);
            } catch (const Error& e) {
                ValidationReport r;
                r.findings.push_back({Severity::error, e.code(), e.what(), e.path()});
                if (out.json_mode()) out.write(json{{"valid", false}, {"findings", to_json(r)}});
                else print_findings(r, std::cout);
                return kExitValidation;
            }
            const auto report = check_model(spec);
            if (out.json_mode()) {
                out.write(json{{"valid", !report.has_errors()}, {"findings", to_json(report)}});
            } else {
                std::ostringstream text;
                print_findings(report, text);
                if (!report.has_errors()) text << "ok: " << spec.num_states() << " states, " << spec.tasks.size()
                                               << " tasks, " << spec.observables.size() << " observables\n";
                out.write(text.str());
            }
            return report.has_errors() ? kExitValidation : 0;
        };
    });

    // interp-table
    auto* interp = app.add_subcommand("interp-table", "Task-configuration probabilities per active state");
    interp->add_option("model", model_path)->required();
    out.add(interp);
    interp->callback([&] {
        action = [&] {
            auto model = load_compiled(model_path);
            if (out.json_mode()) out.write(interp_table_json(*model));
            else out.write(interp_table_csv(*model));
            return 0;
        };
    });

    // run
    std::string scenario_path;
    auto* run = app.add_subcommand("run", "Filter a scenario and print the posterior timeline");
    run->add_option("model", model_path)->required();
    run->add_option("scenario", scenario_path)->required();
    out.add(run);
    run->callback([&] {
        action = [&] {
            auto model = load_compiled(model_path);
            const auto scenario = load_scenario(scenario_path, model->spec());
            const auto timeline = run_scenario(model, scenario);
            if (out.json_mode()) {
                auto doc = to_json(timeline, model->spec());
                doc["scenario"] = scenario.label;
                out.write(doc);
            } else {
                out.write(timeline_csv(timeline, model->spec()));
            }
            return 0;
        };
    });

    // longrun
    std::size_t horizon = 1'000'000;
    std::size_t stride = 0;
    std::size_t jobs = 0;
    bool mobilised_absorbing = false;
    std::string mobilised_state;
    std::string rate_sweep;
    auto* longrun = app.add_subcommand("longrun", "Evolve the priors with no evidence");
    longrun->add_option("model", model_path)->required();
    longrun->add_option("--horizon", horizon, "Period cap")->check(CLI::PositiveNumber);
    longrun->add_flag("--mobilised-absorbing", mobilised_absorbing, "Make the mobilised state absorbing");
    longrun->add_option("--mobilised-state", mobilised_state, "Mobilised state id (default: last state)");
    longrun->add_option("--neutral-rate-sweep", rate_sweep, "lo:hi:steps per-period transient->neutral sweep");
    longrun->add_option("--stride", stride, "Trajectory sampling interval");
    longrun->add_option("-j,--jobs", jobs, "Worker threads (0: hardware)");
    out.add(longrun);
    longrun->callback([&] {
        action = [&] {
            auto model = load_compiled(model_path);
            LongrunOptions options;
            options.horizon = horizon;
            options.stride = stride;
            options.variant = mobilised_absorbing ? LongrunVariant::mobilised_absorbing : LongrunVariant::single_absorbing;
            if (!mobilised_state.empty()) options.mobilised_state = model->spec().state_index(mobilised_state);
            if (!rate_sweep.empty()) options.sweep = parse_neutral_rate_sweep(rate_sweep);
            const auto report = longrun_report(*model, options, jobs);
            if (out.json_mode()) out.write(longrun_json(report, model->spec()));
            else out.write(options.sweep ? longrun_sweep_csv(report, model->spec()) : longrun_csv(report, model->spec()));
            std::cerr << (report.converged ? "converged" : "horizon reached") << " after " << report.terminal_period
                      << " periods\n";
            return 0;
        };
    });

    // sensitivity
    std::string target;
    std::vector<double> values;
    std::string mode = "shift";
    std::string checkpoints;
    auto* sens = app.add_subcommand("sensitivity", "Re-run a scenario across prior or holding settings");
    sens->add_option("model", model_path)->required();
    sens->add_option("scenario", scenario_path)->required();
    sens->add_option("--target", target, "prior:<state> | equal | zeta | zeta:<state>")->required();
    sens->add_option("--values", values, "Settings, comma separated")->delimiter(',');
    sens->add_option("--mode", mode, "How prior values apply")->check(CLI::IsMember({"shift", "set"}));
    sens->add_option("--checkpoints", checkpoints, "Comma-separated checkpoint times");
    sens->add_option("-j,--jobs", jobs, "Worker threads (0: hardware)");
    out.add(sens);
    sens->callback([&] {
        action = [&] {
            const auto spec = load_spec(model_path);
            const auto report = check_model(spec);
            if (report.has_errors()) {
                print_findings(report, std::cerr);
                throw ValidationFailure(model_path + ": model is invalid");
            }
            const auto scenario = load_scenario(scenario_path, spec);
            auto sweep = parse_sweep_target(target, spec);
            sweep.values = values;
            sweep.rule = mode == "set" ? PriorRule::set : PriorRule::shift;
            const auto points = run_sweep(spec, scenario, sweep, jobs);
            const auto cps = checkpoints.empty() ? kDefaultCheckpoints : parse_int_list(checkpoints);
            if (out.json_mode()) out.write(checkpoint_json(points, spec, cps));
            else out.write(checkpoint_csv(points, spec, cps));
            return 0;
        };
    });

    // compare
    std::string variant_path;
    std::vector<std::string> mappings;
    auto* compare = app.add_subcommand("compare", "Per-period differences between two model structures");
    compare->add_option("base", model_path)->required();
    compare->add_option("variant", variant_path)->required();
    compare->add_option("scenario", scenario_path)->required();
    compare->add_option("--map", mappings, "VARIANT=BASE1+BASE2; unmapped states match by id");
    out.add(compare);
    compare->callback([&] {
        action = [&] {
            auto base = load_compiled(model_path);
            auto variant = load_compiled(variant_path);
            StateCorrespondence overrides;
            for (const auto& m : mappings) {
                const auto eq = m.find('=');
                if (eq == std::string::npos) throw Error("INVALID_ARGUMENT", "--map needs VARIANT=BASE1+BASE2");
                std::vector<std::string> members;
                std::stringstream in(m.substr(eq + 1));
                std::string id;
                while (std::getline(in, id, '+')) members.push_back(id);
                overrides[m.substr(0, eq)] = members;
            }
            const auto corr = default_correspondence(base->spec(), variant->spec(), overrides);
            const auto scenario = load_scenario(scenario_path, base->spec());
            const auto series = structure_robustness(base, variant, scenario, corr);
            if (out.json_mode()) out.write(robustness_json(series));
            else out.write(robustness_csv(series));
            return 0;
        };
    });

    // coarsen
    std::vector<std::string> merges;
    auto* coarse = app.add_subcommand("coarsen", "Merge states and print the coarser model");
    coarse->add_option("model", model_path)->required();
    coarse->add_option("--merge", merges, "OLD=NEW; states not listed keep their id")->required();
    coarse->add_option("-o,--output", out.file, "Write to this file instead of stdout");
    coarse->callback([&] {
        action = [&] {
            const auto spec = load_spec(model_path);
            std::map<std::string, std::string> merge_map;
            for (const auto& s : spec.states) merge_map[s.id] = s.id;
            for (const auto& m : merges) {
                const auto eq = m.find('=');
                if (eq == std::string::npos) throw Error("INVALID_ARGUMENT", "--merge needs OLD=NEW");
                merge_map[m.substr(0, eq)] = m.substr(eq + 1);
            }
            out.write(serialize_model(coarsen(spec, merge_map), 2) + "\n");
            return 0;
        };
    });

    // refine
    std::string request_path;
    auto* fine = app.add_subcommand("refine", "Split a state and print the finer model");
    fine->add_option("model", model_path)->required();
    fine->add_option("request", request_path, "JSON refine request")->required();
    fine->add_option("-o,--output", out.file, "Write to this file instead of stdout");
    fine->callback([&] {
        action = [&] {
            const auto spec = load_spec(model_path);
            const auto request = parse_refine_request(json::parse(read_file(request_path)));
            out.write(serialize_model(refine(spec, request), 2) + "\n");
            return 0;
        };
    });

    // serve
    std::string address = env_or("ESCALATE_ADDR", "127.0.0.1:8080");
    std::string data_dir = env_or("ESCALATE_DATA", "escalate-data");
    auto* srv = app.add_subcommand("serve", "Run the case service");
    srv->add_option("--addr", address, "host:port (env ESCALATE_ADDR)");
    srv->add_option("--data", data_dir, "Journal directory (env ESCALATE_DATA)");
    srv->callback([&] { action = [&] { return serve(address, data_dir); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitRuntime;
    }

    try {
        return action();
    } catch (const ValidationFailure& e) {
        std::cerr << "invalid model: " << e.what() << '\n';
        return kExitValidation;
    } catch (const Error& e) {
        std::cerr << "error " << e.code() << (e.path().empty() ? "" : " at " + e.path()) << ": " << e.what() << '\n';
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}
