#include "escalate/scenario.hpp"

#include <fstream>
#include <sstream>

#include "escalate/error.hpp"

namespace escalate {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("IO", "cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void check_scenario(const Scenario& scenario) {
    for (std::size_t i = 1; i < scenario.steps.size(); ++i) {
        if (scenario.steps[i].t <= scenario.steps[i - 1].t) {
            throw Error("OUT_OF_ORDER", "scenario period t=" + std::to_string(scenario.steps[i].t) +
                                            " does not follow t=" + std::to_string(scenario.steps[i - 1].t));
        }
    }
}

Scenario parse_scenario_jsonl(std::string_view text, const ModelSpec& spec) {
    Scenario scenario;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t nl = text.find('\n', pos);
        const auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

        StepInput input;
        try {
            auto doc = nlohmann::json::parse(line);
            std::string kind = "observation";
            if (doc.is_object() && doc.contains("kind")) {
                if (!doc["kind"].is_string()) throw Error("SCHEMA", "kind must be a string");
                kind = doc["kind"].get<std::string>();
            }
            if (kind == "observation") {
                input.record = parse_observation(doc, spec);
                input.t = input.record->t;
            } else if (kind == "evidence") {
                input.evidence = parse_evidence(doc, spec);
                input.t = input.evidence->t;
            } else if (kind == "step") {
                input = parse_step_input(doc, spec);
            } else {
                throw Error("SCHEMA", "unknown kind '" + kind + "'");
            }
        } catch (const nlohmann::json::exception& e) {
            throw Error("PARSE", "line " + std::to_string(line_no) + ": " + e.what());
        } catch (const Error& e) {
            throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.what(), e.path());
        }

        if (!scenario.steps.empty() && scenario.steps.back().t == input.t) {
            auto& last = scenario.steps.back();
            if ((last.record && input.record) || (last.evidence && input.evidence)) {
                throw Error("SCHEMA", "line " + std::to_string(line_no) + ": duplicate entry for t=" + std::to_string(input.t));
            }
            if (input.record) last.record = input.record;
            if (input.evidence) last.evidence = input.evidence;
            continue;
        }
        scenario.steps.push_back(std::move(input));
    }
    check_scenario(scenario);
    return scenario;
}

Scenario parse_scenario_csv(std::string_view text, const ModelSpec& spec) {
    Scenario scenario;
    for (auto& record : parse_observation_csv(text, spec)) {
        const auto t = record.t;
        scenario.steps.push_back(StepInput{t, std::move(record), std::nullopt});
    }
    check_scenario(scenario);
    return scenario;
}

Scenario load_scenario(const std::filesystem::path& path, const ModelSpec& spec) {
    const auto text = read_file(path);
    Scenario scenario = path.extension() == ".csv" ? parse_scenario_csv(text, spec) : parse_scenario_jsonl(text, spec);
    scenario.label = path.stem().string();
    return scenario;
}

CaseState replay(const ModelHandle& model, const Scenario& scenario) {
    CaseState state(model);
    for (const auto& input : scenario.steps) state = state.step(input);
    return state;
}

PosteriorTimeline run_scenario(const ModelHandle& model, const Scenario& scenario) {
    return replay(model, scenario).timeline();
}

}  // namespace escalate
