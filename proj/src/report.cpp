#include "escalate/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace escalate {

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

namespace {

void write_row(std::ostringstream& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
}

std::vector<std::string> distribution_cells(std::int64_t t, const char* kind, const StateDistribution& d, double score,
                                            const std::vector<double>& rho) {
    std::vector<std::string> row{std::to_string(t), kind};
    for (double p : d.values()) row.push_back(format_number(p));
    row.push_back(format_number(score));
    for (std::size_t i = 1; i < rho.size(); ++i) row.push_back(format_number(rho[i]));
    return row;
}

std::vector<double> posterior_odds(const StateDistribution& d) {
    std::vector<double> rho(d.size(), 0.0);
    for (std::size_t i = 1; i < d.size(); ++i) {
        rho[i] = d[0] > 0.0 ? (d[i] > 0.0 ? std::log(d[i]) - std::log(d[0]) : -INFINITY)
                            : (d[i] > 0.0 ? INFINITY : NAN);
    }
    return rho;
}

std::string bits(std::uint32_t mask, std::size_t width) {
    std::string s;
    for (std::size_t b = 0; b < width; ++b) s += (mask >> b) & 1U ? '1' : '0';
    return s;
}

nlohmann::json number_array(const std::vector<double>& v) {
    auto out = nlohmann::json::array();
    for (double x : v) out.push_back(json_number(x));
    return out;
}

}  // namespace

std::string timeline_csv(const PosteriorTimeline& timeline, const ModelSpec& spec) {
    std::ostringstream out;
    std::vector<std::string> header{"t", "kind"};
    for (const auto& s : spec.states) header.push_back(s.id);
    header.push_back("score");
    for (std::size_t i = 1; i < spec.num_states(); ++i) header.push_back("rho_" + spec.states[i].id);
    write_row(out, header);
    write_row(out, distribution_cells(timeline.initial_t, "initial", timeline.initial, timeline.initial_score,
                                      posterior_odds(timeline.initial)));
    for (const auto& e : timeline.entries) write_row(out, distribution_cells(e.t, "posterior", e.posterior, e.score, e.rho_star));
    return out.str();
}

std::string interp_table_csv(const CompiledModel& model) {
    const auto& spec = model.spec();
    std::ostringstream out;
    std::vector<std::string> header{"config"};
    for (std::size_t i = 1; i < spec.num_states(); ++i) header.push_back(spec.states[i].id);
    write_row(out, header);

    // Rows are grouped by configuration width so states with fewer tasks
    // still get their own complete block.
    std::vector<std::size_t> widths;
    for (std::size_t i = 1; i < spec.num_states(); ++i) {
        const auto w = model.table(i).sets.size();
        if (std::find(widths.begin(), widths.end(), w) == widths.end()) widths.push_back(w);
    }
    std::sort(widths.begin(), widths.end());
    for (auto w : widths) {
        for (std::uint32_t mask = 0; mask < (std::uint32_t{1} << w); ++mask) {
            std::vector<std::string> row{"np_" + bits(mask, w)};
            for (std::size_t i = 1; i < spec.num_states(); ++i) {
                const auto& table = model.table(i);
                row.push_back(table.sets.size() == w ? format_number(table(mask)) : "");
            }
            write_row(out, row);
        }
    }
    std::vector<std::string> ntp{"ntp"}, p0{"p0"}, xi{"xi"};
    for (std::size_t i = 1; i < spec.num_states(); ++i) {
        ntp.push_back(format_number(model.table(i).total()));
        p0.push_back(format_number(model.table(i).p_zero));
        xi.push_back(format_number(model.table(i).xi));
    }
    write_row(out, ntp);
    write_row(out, p0);
    write_row(out, xi);
    return out.str();
}

nlohmann::json interp_table_json(const CompiledModel& model) {
    const auto& spec = model.spec();
    auto states = nlohmann::json::array();
    for (std::size_t i = 1; i < spec.num_states(); ++i) {
        const auto& table = model.table(i);
        auto tasks = nlohmann::json::array();
        for (auto k : table.sets.tasks) tasks.push_back(spec.tasks[k].id);
        nlohmann::json configs = nlohmann::json::object();
        for (std::uint32_t mask = 0; mask < table.probability.size(); ++mask) {
            configs[bits(mask, table.sets.size())] = table(mask);
        }
        states.push_back({{"state", spec.states[i].id},
                          {"tasks", tasks},
                          {"r_plus", table.sets.r_plus()},
                          {"r_minus", table.sets.r_minus()},
                          {"p_plus", table.p_plus},
                          {"p0", table.p_zero},
                          {"xi", json_number(table.xi)},
                          {"total", table.total()},
                          {"probabilities", configs}});
    }
    return {{"states", states}};
}

std::string checkpoint_csv(const std::vector<SweepPoint>& points, const ModelSpec& spec,
                           const std::vector<std::int64_t>& checkpoints) {
    std::ostringstream out;
    std::vector<std::string> header{"setting", "state", "prior"};
    for (auto c : checkpoints) header.push_back("t" + std::to_string(c));
    write_row(out, header);
    for (const auto& p : points) {
        for (std::size_t i = 0; i < spec.num_states(); ++i) {
            std::vector<std::string> row{p.label, spec.states[i].id, format_number(p.timeline.initial[i])};
            for (auto c : checkpoints) row.push_back(format_number(at_checkpoint(p.timeline, c)[i]));
            write_row(out, row);
        }
    }
    return out.str();
}

nlohmann::json checkpoint_json(const std::vector<SweepPoint>& points, const ModelSpec& spec,
                               const std::vector<std::int64_t>& checkpoints) {
    auto settings = nlohmann::json::array();
    for (const auto& p : points) {
        auto rows = nlohmann::json::array();
        for (auto c : checkpoints) rows.push_back({{"t", c}, {"distribution", number_array(at_checkpoint(p.timeline, c).values())}});
        settings.push_back({{"setting", p.label},
                            {"value", p.value},
                            {"prior", number_array(p.timeline.initial.values())},
                            {"checkpoints", rows},
                            {"timeline", to_json(p.timeline, p.spec)}});
    }
    auto states = nlohmann::json::array();
    for (const auto& s : spec.states) states.push_back(s.id);
    return {{"states", states}, {"settings", settings}};
}

std::string robustness_csv(const RobustnessSeries& series) {
    std::ostringstream out;
    std::vector<std::string> header{"t"};
    for (const auto& g : series.groups) header.push_back("diff_" + g);
    write_row(out, header);
    for (std::size_t p = 0; p < series.t.size(); ++p) {
        std::vector<std::string> row{std::to_string(series.t[p])};
        for (double d : series.diff[p]) row.push_back(format_number(d));
        write_row(out, row);
    }
    return out.str();
}

nlohmann::json robustness_json(const RobustnessSeries& series) {
    auto rows = nlohmann::json::array();
    for (std::size_t p = 0; p < series.t.size(); ++p) rows.push_back({{"t", series.t[p]}, {"diff", number_array(series.diff[p])}});
    return {{"groups", series.groups}, {"rows", rows}};
}

std::string longrun_csv(const LongrunReport& report, const ModelSpec& spec) {
    std::ostringstream out;
    std::vector<std::string> header{"period"};
    for (const auto& s : spec.states) header.push_back(s.id);
    write_row(out, header);
    for (std::size_t i = 0; i < report.periods.size(); ++i) {
        std::vector<std::string> row{std::to_string(report.periods[i])};
        for (double p : report.trajectory[i].values()) row.push_back(format_number(p));
        write_row(out, row);
    }
    return out.str();
}

std::string longrun_sweep_csv(const LongrunReport& report, const ModelSpec& spec) {
    std::ostringstream out;
    write_row(out, {"rate", spec.states[kNeutral].id, spec.states[report.mobilised_state].id, "periods", "converged"});
    for (const auto& p : report.sweep) {
        write_row(out, {format_number(p.rate), format_number(p.neutral), format_number(p.mobilised), std::to_string(p.periods),
                        p.converged ? "1" : "0"});
    }
    return out.str();
}

nlohmann::json longrun_json(const LongrunReport& report, const ModelSpec& spec) {
    auto states = nlohmann::json::array();
    for (const auto& s : spec.states) states.push_back(s.id);
    auto trajectory = nlohmann::json::array();
    for (std::size_t i = 0; i < report.periods.size(); ++i) {
        trajectory.push_back({{"period", report.periods[i]}, {"distribution", number_array(report.trajectory[i].values())}});
    }
    auto sweep = nlohmann::json::array();
    for (const auto& p : report.sweep) {
        sweep.push_back({{"rate", p.rate}, {"neutral", p.neutral}, {"mobilised", p.mobilised}, {"periods", p.periods},
                         {"converged", p.converged}});
    }
    return {{"states", states},
            {"mobilised_state", spec.states[report.mobilised_state].id},
            {"trajectory", trajectory},
            {"terminal", {{"period", report.terminal_period}, {"distribution", number_array(report.terminal.values())}}},
            {"converged", report.converged},
            {"sweep", sweep}};
}

}  // namespace escalate
