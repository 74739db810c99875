// Structural transforms on ModelSpec: merging states into coarser groups and
// splitting one state into finer children.

#include <algorithm>
#include <cmath>
#include <set>

#include "escalate/error.hpp"
#include "escalate/model_spec.hpp"

namespace escalate {

namespace {

constexpr double kFractionTolerance = 1e-9;

struct Group {
    std::string id;
    std::vector<std::size_t> members;
};

// Prior-weighted average of a per-state value over the group. Identical member
// values are returned untouched so singleton and uniform groups stay exact.
double weighted_average(const Group& group, const std::vector<double>& priors, const std::vector<double>& values) {
    const double first = values[group.members.front()];
    bool uniform = true;
    for (auto m : group.members) uniform = uniform && values[m] == first;
    if (uniform) return first;

    double mass = 0.0;
    for (auto m : group.members) mass += priors[m];
    double acc = 0.0;
    if (mass > 0.0) {
        for (auto m : group.members) acc += priors[m] * values[m];
        return acc / mass;
    }
    for (auto m : group.members) acc += values[m];
    return acc / static_cast<double>(group.members.size());
}

}  // namespace

ModelSpec coarsen(const ModelSpec& spec, const std::map<std::string, std::string>& merge_map) {
    const std::size_t n = spec.num_states();
    for (const auto& [from, to] : merge_map) {
        if (!spec.find_state(from)) {
            throw Error("DANGLING_REFERENCE", "merge map names unknown state '" + from + "'");
        }
    }

    std::vector<std::string> target(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto it = merge_map.find(spec.states[i].id);
        if (it == merge_map.end()) {
            if (i != kNeutral) {
                throw Error("MERGE_INCOMPLETE", "merge map has no entry for state '" + spec.states[i].id + "'");
            }
            target[i] = spec.states[i].id;
        } else {
            target[i] = it->second;
        }
    }
    for (std::size_t i = 1; i < n; ++i) {
        if (target[i] == target[kNeutral]) {
            throw Error("MERGE_NEUTRAL", "state '" + spec.states[i].id + "' cannot merge into the neutral state");
        }
    }

    std::vector<Group> groups;
    std::vector<std::size_t> group_of(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) { return g.id == target[i]; });
        if (it == groups.end()) {
            groups.push_back({target[i], {}});
            it = std::prev(groups.end());
        }
        it->members.push_back(i);
        group_of[i] = static_cast<std::size_t>(it - groups.begin());
    }
    const std::size_t g = groups.size();

    ModelSpec out;
    out.tasks = spec.tasks;
    out.neutral_task_probs = spec.neutral_task_probs;
    out.observables = spec.observables;
    out.observable_task_incidence = spec.observable_task_incidence;
    out.likelihood_params = spec.likelihood_params;
    out.likelihood_mode = spec.likelihood_mode;
    out.substeps_k = spec.substeps_k;
    out.metadata = spec.metadata;

    out.states.resize(g);
    out.priors.assign(g, 0.0);
    out.p_plus.assign(g, 0.0);
    out.holding_params.assign(g, 0.0);
    out.score_weights.assign(g, 0.0);
    out.task_state_incidence.assign(g, std::vector<Polarity>(spec.num_tasks(), Polarity::none));

    for (std::size_t gi = 0; gi < g; ++gi) {
        const auto& group = groups[gi];
        if (group.members.size() == 1) {
            out.states[gi] = spec.states[group.members.front()];
            out.states[gi].id = group.id;
        } else {
            std::string name;
            for (auto m : group.members) name += (name.empty() ? "" : "+") + spec.states[m].name;
            out.states[gi] = {group.id, name};
        }
        for (auto m : group.members) out.priors[gi] += spec.priors[m];
        out.score_weights[gi] = weighted_average(group, spec.priors, spec.score_weights);
        if (gi != kNeutral) {
            out.p_plus[gi] = weighted_average(group, spec.priors, spec.p_plus);
            out.holding_params[gi] = weighted_average(group, spec.priors, spec.holding_params);
        }
        for (auto m : group.members) {
            for (std::size_t k = 0; k < spec.num_tasks(); ++k) {
                const Polarity p = spec.task_state_incidence[m][k];
                if (p == Polarity::none) continue;
                auto& cell = out.task_state_incidence[gi][k];
                if (cell != Polarity::none && cell != p) {
                    throw Error("POLARITY_CONFLICT", "task '" + spec.tasks[k].id + "' has opposite polarities within merged state '" +
                                                         group.id + "'");
                }
                cell = p;
            }
        }
    }

    // Group-level edge pairs in order of first appearance among the original edges.
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (const auto& e : spec.edges) {
        const auto pair = std::make_pair(group_of[e.from], group_of[e.to]);
        if (pair.first == pair.second) continue;
        if (std::find(pairs.begin(), pairs.end(), pair) == pairs.end()) pairs.push_back(pair);
    }

    for (std::size_t gi = 1; gi < g; ++gi) {
        const auto& group = groups[gi];
        double mass = 0.0;
        for (auto m : group.members) mass += spec.priors[m];
        const bool equal_weights = !(mass > 0.0);
        auto weight = [&](std::size_t m) {
            if (group.members.size() == 1) return 1.0;
            return equal_weights ? 1.0 / static_cast<double>(group.members.size()) : spec.priors[m] / mass;
        };

        double internal = 0.0;
        for (auto m : group.members) {
            for (const auto& e : spec.edges) {
                if (e.from == m && group_of[e.to] == gi) internal += weight(m) * e.probability;
            }
        }
        const double scale = internal > 0.0 && internal < 1.0 ? 1.0 / (1.0 - internal) : 1.0;

        for (const auto& [src, dst] : pairs) {
            if (src != gi) continue;
            double p = 0.0;
            for (auto m : group.members) {
                double row = 0.0;
                for (const auto& e : spec.edges) {
                    if (e.from == m && group_of[e.to] == dst) row += e.probability;
                }
                p += group.members.size() == 1 ? row : weight(m) * row;
            }
            if (internal >= 1.0) continue;
            out.edges.push_back({src, dst, scale == 1.0 ? p : p * scale});
        }
    }
    return out;
}

ModelSpec refine(const ModelSpec& spec, const RefineRequest& request) {
    const std::size_t split = spec.state_index(request.split);
    if (split == kNeutral) {
        throw Error("REFINE_NEUTRAL", "the neutral state cannot be split");
    }
    if (request.children.empty()) {
        throw Error("REFINE_CHILDREN", "refine needs at least one child state");
    }

    double fraction_sum = 0.0;
    for (const auto& child : request.children) {
        if (!(child.prior_fraction >= 0.0 && child.prior_fraction <= 1.0)) {
            throw Error("REFINE_FRACTIONS", "prior fraction of '" + child.state.id + "' is outside [0,1]");
        }
        fraction_sum += child.prior_fraction;
    }
    if (!(std::abs(fraction_sum - 1.0) <= kFractionTolerance)) {
        throw Error("REFINE_FRACTIONS", "child prior fractions sum to " + std::to_string(fraction_sum) + ", expected 1");
    }

    std::set<std::string> child_ids;
    for (const auto& child : request.children) {
        if (!child_ids.insert(child.state.id).second) {
            throw Error("DUPLICATE_ID", "duplicate child id '" + child.state.id + "'");
        }
        auto existing = spec.find_state(child.state.id);
        if (existing && *existing != split) {
            throw Error("DUPLICATE_ID", "child id '" + child.state.id + "' already names another state");
        }
    }

    const auto& parent_row = spec.task_state_incidence[split];
    std::vector<bool> covered(spec.num_tasks(), false);
    std::vector<std::vector<Polarity>> child_rows;
    for (const auto& child : request.children) {
        std::vector<Polarity> row(spec.num_tasks(), Polarity::none);
        auto assign = [&](const std::vector<std::string>& ids, Polarity polarity) {
            for (const auto& id : ids) {
                const std::size_t k = spec.task_index(id);
                if (parent_row[k] == Polarity::none) {
                    throw Error("REFINE_TASKS", "task '" + id + "' of child '" + child.state.id + "' is not a task of '" +
                                                    request.split + "'");
                }
                if (row[k] != Polarity::none) {
                    throw Error("POLARITY_CONFLICT", "task '" + id + "' listed twice for child '" + child.state.id + "'");
                }
                row[k] = polarity;
                covered[k] = true;
            }
        };
        assign(child.positive_tasks, Polarity::positive);
        assign(child.negative_tasks, Polarity::negative);
        child_rows.push_back(std::move(row));
    }
    for (std::size_t k = 0; k < spec.num_tasks(); ++k) {
        if (parent_row[k] != Polarity::none && !covered[k]) {
            throw Error("ORPHANED_TASK", "task '" + spec.tasks[k].id + "' of '" + request.split + "' is assigned to no child");
        }
    }

    // Old index -> new index for unsplit states; children occupy the split slot onwards.
    const std::size_t c = request.children.size();
    auto remap = [&](std::size_t i) { return i < split ? i : i + c - 1; };

    ModelSpec out = spec;
    out.states.clear();
    out.priors.clear();
    out.p_plus.clear();
    out.holding_params.clear();
    out.score_weights.clear();
    out.task_state_incidence.clear();
    for (std::size_t i = 0; i < spec.num_states(); ++i) {
        if (i != split) {
            out.states.push_back(spec.states[i]);
            out.priors.push_back(spec.priors[i]);
            out.p_plus.push_back(spec.p_plus[i]);
            out.holding_params.push_back(spec.holding_params[i]);
            out.score_weights.push_back(spec.score_weights[i]);
            out.task_state_incidence.push_back(spec.task_state_incidence[i]);
            continue;
        }
        for (std::size_t ci = 0; ci < c; ++ci) {
            const auto& child = request.children[ci];
            out.states.push_back(child.state);
            out.priors.push_back(spec.priors[i] * child.prior_fraction);
            out.p_plus.push_back(child.p_plus.value_or(spec.p_plus[i]));
            out.holding_params.push_back(child.holding.value_or(spec.holding_params[i]));
            out.score_weights.push_back(child.score_weight.value_or(spec.score_weights[i]));
            out.task_state_incidence.push_back(child_rows[ci]);
        }
    }

    out.edges.clear();
    for (const auto& e : spec.edges) {
        if (e.from != split && e.to != split) {
            out.edges.push_back({remap(e.from), remap(e.to), e.probability});
            continue;
        }
        if (!request.edges.empty()) continue;
        for (std::size_t ci = 0; ci < c; ++ci) {
            if (e.to == split) {
                out.edges.push_back({remap(e.from), split + ci, e.probability * request.children[ci].prior_fraction});
            } else {
                out.edges.push_back({split + ci, remap(e.to), e.probability});
            }
        }
    }
    for (const auto& re : request.edges) {
        out.edges.push_back({out.state_index(re.from), out.state_index(re.to), re.probability});
    }

    auto report = validate_model(out);
    if (report.has_errors()) {
        const auto& first = *std::find_if(report.findings.begin(), report.findings.end(),
                                          [](const Finding& f) { return f.severity == Severity::error; });
        throw Error("REFINE_INVALID", "refined model fails validation: " + first.code + " " + first.message, first.path);
    }
    return out;
}

RefineRequest parse_refine_request(const nlohmann::json& doc) {
    auto fail = [](const std::string& message, const std::string& path) { throw Error("TYPE_ERROR", message, path); };
    if (!doc.is_object()) fail("refine request must be an object", "");
    for (const auto& [key, value] : doc.items()) {
        if (key != "split" && key != "children" && key != "edges") {
            throw Error("UNKNOWN_FIELD", "unknown field '" + key + "'", "/" + key);
        }
    }
    RefineRequest request;
    if (!doc.contains("split") || !doc["split"].is_string()) fail("split must be a state id", "/split");
    request.split = doc["split"].get<std::string>();
    if (!doc.contains("children") || !doc["children"].is_array()) fail("children must be an array", "/children");

    auto strings = [&](const nlohmann::json& value, const std::string& path) {
        std::vector<std::string> out;
        if (!value.is_array()) fail(path + " must be an array of task ids", path);
        for (const auto& item : value) {
            if (!item.is_string()) fail(path + " must be an array of task ids", path);
            out.push_back(item.get<std::string>());
        }
        return out;
    };

    for (std::size_t i = 0; i < doc["children"].size(); ++i) {
        const auto& item = doc["children"][i];
        const std::string path = "/children/" + std::to_string(i);
        if (!item.is_object()) fail(path + " must be an object", path);
        RefineChild child;
        for (const auto& [key, value] : item.items()) {
            const std::string field = path + "/" + key;
            if (key == "id" && value.is_string()) {
                child.state.id = value.get<std::string>();
            } else if (key == "name" && value.is_string()) {
                child.state.name = value.get<std::string>();
            } else if (key == "prior_fraction" && value.is_number()) {
                child.prior_fraction = value.get<double>();
            } else if (key == "positive") {
                child.positive_tasks = strings(value, field);
            } else if (key == "negative") {
                child.negative_tasks = strings(value, field);
            } else if (key == "p_plus" && value.is_number()) {
                child.p_plus = value.get<double>();
            } else if (key == "holding" && value.is_number()) {
                child.holding = value.get<double>();
            } else if (key == "score_weight" && value.is_number()) {
                child.score_weight = value.get<double>();
            } else if (key == "id" || key == "name" || key == "prior_fraction" || key == "p_plus" || key == "holding" ||
                       key == "score_weight") {
                fail(field + " has the wrong type", field);
            } else {
                throw Error("UNKNOWN_FIELD", "unknown field '" + key + "'", field);
            }
        }
        if (child.state.id.empty()) fail(path + " needs an id", path + "/id");
        if (child.state.name.empty()) child.state.name = child.state.id;
        request.children.push_back(std::move(child));
    }

    if (doc.contains("edges")) {
        if (!doc["edges"].is_array()) fail("edges must be an array", "/edges");
        for (std::size_t i = 0; i < doc["edges"].size(); ++i) {
            const auto& item = doc["edges"][i];
            const std::string path = "/edges/" + std::to_string(i);
            if (!item.is_object() || !item.contains("from") || !item.contains("to") || !item.contains("probability") ||
                !item["from"].is_string() || !item["to"].is_string() || !item["probability"].is_number()) {
                fail(path + " must be {from, to, probability}", path);
            }
            request.edges.push_back({item["from"].get<std::string>(), item["to"].get<std::string>(),
                                     item["probability"].get<double>()});
        }
    }
    return request;
}

}  // namespace escalate
