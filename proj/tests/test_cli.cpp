#include <sys/wait.h>

#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "escalate/model_spec.hpp"
#include "escalate/scenario.hpp"
#include "json.hpp"
#include "server_process.hpp"

using json = nlohmann::json;

namespace {

const std::filesystem::path kRoot = ESCALATE_SOURCE_DIR;
const std::string kBin = ESCALATE_BIN;

struct Result {
    int code = -1;
    std::string out;
    std::string err;
};

// Runs the binary through the shell with stdout and stderr captured to files.
Result run(const std::string& args) {
    static const auto dir = fresh_temp_dir("cli");
    const auto out = dir / "out.txt", err = dir / "err.txt";
    const std::string cmd = "cd '" + kRoot.string() + "' && '" + kBin + "' " + args + " >'" + out.string() + "' 2>'" +
                            err.string() + "'";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = escalate::read_file(out);
    r.err = escalate::read_file(err);
    return r;
}

std::string first_line(const std::string& text) { return text.substr(0, text.find('\n')); }

std::size_t lines(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

}  // namespace

TEST_CASE("help and argument errors") {
    CHECK(run("--help").code == 0);
    CHECK(run("").code == 2);
    CHECK(run("frobnicate").code == 2);
    CHECK(run("run models/vehicle.json").code == 2);
    CHECK(run("validate models/vehicle.json --out xml").code == 2);
}

TEST_CASE("validate") {
    auto r = run("validate models/vehicle.json");
    CHECK(r.code == 0);
    CHECK(r.out.rfind("ok: 5 states", 0) == 0);

    r = run("validate models/murder_plot.json --out json");
    CHECK(r.code == 0);
    CHECK(json::parse(r.out)["valid"] == true);

    const auto dir = fresh_temp_dir("cli-validate");
    auto doc = json::parse(escalate::read_file(kRoot / "models/vehicle.json"));
    doc["priors"]["N"] = 0.5;
    std::ofstream(dir / "bad.json") << doc.dump();
    r = run("validate " + (dir / "bad.json").string() + " --out json");
    CHECK(r.code == 1);
    const auto report = json::parse(r.out);
    CHECK(report["valid"] == false);
    CHECK(report["findings"][0]["code"] == "PRIOR_SUM");

    std::ofstream(dir / "broken.json") << "{\"format\": 1";
    r = run("validate " + (dir / "broken.json").string());
    CHECK(r.code == 1);
    CHECK(r.out.find("SYNTAX") != std::string::npos);
    CHECK(run("validate " + (dir / "absent.json").string()).code == 1);
    std::filesystem::remove_all(dir);
}

TEST_CASE("interp-table and run") {
    auto r = run("interp-table models/vehicle.json");
    CHECK(r.code == 0);
    CHECK(first_line(r.out) == "config,A,T,P,M");
    CHECK(lines(r.out) == 1 + 16 + 3);
    CHECK(json::parse(run("interp-table models/vehicle.json --out json").out).is_object());

    r = run("run models/vehicle.json scenarios/escalation.csv");
    CHECK(r.code == 0);
    CHECK(first_line(r.out) == "t,kind,N,A,T,P,M,score,rho_A,rho_T,rho_P,rho_M");
    CHECK(lines(r.out) == 26);

    r = run("run models/vehicle.json scenarios/escalation_with_evidence.jsonl --out json");
    CHECK(r.code == 0);
    const auto doc = json::parse(r.out);
    CHECK(doc["entries"].size() == 24);
    CHECK(doc["entries"].back()["posterior"][4].get<double>() > 0.9);

    CHECK(run("run models/vehicle.json scenarios/none.csv").code == 2);
}

TEST_CASE("longrun") {
    auto r = run("longrun models/vehicle.json --horizon 200 --stride 50");
    CHECK(r.code == 0);
    CHECK(first_line(r.out) == "period,N,A,T,P,M");
    CHECK(r.err.find("horizon reached") != std::string::npos);

    r = run("longrun models/vehicle.json");
    CHECK(r.code == 0);
    CHECK(r.err.find("converged") != std::string::npos);

    r = run("longrun models/vehicle.json --mobilised-absorbing --neutral-rate-sweep 0.1:0.9:9 -j 2");
    CHECK(r.code == 0);
    CHECK(lines(r.out) == 10);

    CHECK(run("longrun models/vehicle.json --neutral-rate-sweep 2:1:3").code == 2);
    CHECK(run("longrun models/vehicle.json --mobilised-state Q").code == 2);
}

TEST_CASE("sensitivity and compare") {
    auto r = run("sensitivity models/vehicle.json scenarios/scenario_a.csv --target prior:A --values -0.3,0,0.3");
    CHECK(r.code == 0);
    CHECK(first_line(r.out) == "setting,state,prior,t0,t5,t10,t15,t20,t26");
    CHECK(lines(r.out) == 1 + 3 * 5);

    r = run("sensitivity models/vehicle.json scenarios/scenario_a.csv --target zeta --values 0.001,0.1 "
            "--checkpoints 0,10 --out json");
    CHECK(r.code == 0);
    const auto sweep = json::parse(r.out);
    CHECK_FALSE(sweep.empty());

    r = run("sensitivity models/vehicle.json scenarios/scenario_a.csv --target prior:N --values -0.3");
    CHECK(r.code == 2);
    CHECK(r.err.find("INVALID_SWEEP") != std::string::npos);

    const auto dir = fresh_temp_dir("cli-compare");
    const auto merged = (dir / "tp.json").string();
    CHECK(run("coarsen models/vehicle.json --merge T=TP --merge P=TP -o " + merged).code == 0);
    CHECK(run("validate " + merged).code == 0);
    r = run("compare models/vehicle.json " + merged + " scenarios/scenario_a.csv --map TP=T+P");
    CHECK(r.code == 0);
    CHECK(first_line(r.out).rfind("t,diff_", 0) == 0);
    CHECK(r.out.find("\n26,") != std::string::npos);
    CHECK(run("compare models/vehicle.json " + merged + " scenarios/scenario_a.csv").code == 2);
    std::filesystem::remove_all(dir);
}

TEST_CASE("coarsen and refine") {
    auto r = run("coarsen models/vehicle.json --merge T=TP --merge P=TP");
    CHECK(r.code == 0);
    const auto coarse = escalate::parse_model(r.out);
    CHECK(coarse.num_states() == 4);

    const auto dir = fresh_temp_dir("cli-refine");
    std::ofstream(dir / "tp.json") << r.out;
    std::ofstream(dir / "req.json") << R"({"split": "TP", "children": [
      {"id": "T", "prior_fraction": 0.5, "positive": ["RedPubEngInRad", "ObtainResources", "LearnToDrive", "ObtainVehicle"]},
      {"id": "P", "prior_fraction": 0.5, "positive": ["EngageInPublicThreats", "MakePersonalThreats", "ObtainVehicle", "ReconnoitreTargets"]}]})";
    r = run("refine " + (dir / "tp.json").string() + " " + (dir / "req.json").string());
    CHECK(r.code == 0);
    CHECK(escalate::parse_model(r.out).num_states() == 5);

    std::ofstream(dir / "bad.json") << R"({"split": "TP", "children": []})";
    CHECK(run("refine " + (dir / "tp.json").string() + " " + (dir / "bad.json").string()).code == 2);
    CHECK(run("coarsen models/vehicle.json --merge A=N").code == 2);
    std::filesystem::remove_all(dir);
}

TEST_CASE("serve prints its address and stops on SIGTERM") {
    const auto dir = fresh_temp_dir("cli-serve");
    ServerProcess server(kBin, dir);
    server.start();
    CHECK(server.port() > 0);
    server.kill(SIGTERM);
    CHECK(std::filesystem::exists(dir / "cases"));
    std::filesystem::remove_all(dir);
}
