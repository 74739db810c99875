#include "escalate/observation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "escalate/error.hpp"

namespace escalate {

namespace {

constexpr double kLogHalf = -0.69314718055994530942;

// log(1 / (1 + exp(-y))) without overflow at either tail.
double log_sigmoid(double y) {
    if (y >= 0.0) return -std::log1p(std::exp(-y));
    return y - std::log1p(std::exp(y));
}

double sigmoid(double y) {
    if (y >= 0.0) return 1.0 / (1.0 + std::exp(-y));
    const double e = std::exp(y);
    return e / (1.0 + e);
}

double signed_argument(double x, bool enacted, const LogisticParams& params) {
    const double k = x < params.x0 ? params.k0 : params.k1;
    const double y = k * (x - params.x0);
    return enacted ? y : -y;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    bool quoted = false;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i < line.size() && line[i] == '"') quoted = !quoted;
        if (i == line.size() || (line[i] == ',' && !quoted)) {
            cells.push_back(trim(line.substr(start, i - start)));
            start = i + 1;
        }
    }
    return cells;
}

double parse_double(std::string_view cell, std::size_t line, const std::string& column) {
    // strtod, since from_chars for double is missing from older libstdc++.
    std::string text(cell);
    char* end = nullptr;
    const double value = std::strtod(text.c_str(), &end);
    if (end != text.c_str() + text.size() || !std::isfinite(value)) {
        throw Error("PARSE", "line " + std::to_string(line) + ": '" + text + "' in column " + column + " is not a number");
    }
    return value;
}

std::int64_t parse_time(std::string_view cell, std::size_t line) {
    std::int64_t t = 0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), t);
    if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw Error("PARSE", "line " + std::to_string(line) + ": t must be an integer period index");
    }
    return t;
}

}  // namespace

ObservationRecord empty_record(const ModelSpec& spec, std::int64_t t) {
    return {t, std::vector<std::optional<double>>(spec.num_observables())};
}

std::vector<std::optional<double>> normalize(const ObservationRecord& record, const ModelSpec& spec) {
    if (record.values.size() != spec.num_observables()) {
        throw Error("DIMENSION_MISMATCH", "record has " + std::to_string(record.values.size()) + " values, model has " +
                                              std::to_string(spec.num_observables()) + " observables");
    }
    std::vector<std::optional<double>> out(record.values.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (record.values[i]) out[i] = (*record.values[i] - spec.observables[i].mean) / spec.observables[i].sd;
    }
    return out;
}

IntensityVector filter_tau(const std::vector<std::optional<double>>& normalized, const ModelSpec& spec) {
    IntensityVector z;
    z.z.resize(spec.num_tasks());
    for (std::size_t j = 0; j < spec.num_tasks(); ++j) {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < spec.num_observables(); ++i) {
            if (spec.observable_task_incidence[i][j] && normalized[i]) {
                sum += *normalized[i];
                ++count;
            }
        }
        if (count > 0) z.z[j] = sum / static_cast<double>(count);
    }
    return z;
}

IntensityVector intensities(const ObservationRecord& record, const ModelSpec& spec) {
    return filter_tau(normalize(record, spec), spec);
}

double logistic_g(double x, bool enacted, const LogisticParams& params) {
    return sigmoid(signed_argument(x, enacted, params));
}

double log_logistic_g(double x, bool enacted, const LogisticParams& params) {
    return log_sigmoid(signed_argument(x, enacted, params));
}

TaskLikelihoods task_likelihoods(const IntensityVector& z, const ModelSpec& spec) {
    TaskLikelihoods out;
    out.log_g.resize(spec.num_tasks());
    out.informative.resize(spec.num_tasks());
    for (std::size_t j = 0; j < spec.num_tasks(); ++j) {
        if (j < z.z.size() && z.z[j]) {
            const auto& params = spec.likelihood_params[j];
            out.log_g[j] = {log_logistic_g(*z.z[j], false, params), log_logistic_g(*z.z[j], true, params)};
            out.informative[j] = true;
        } else {
            out.log_g[j] = {kLogHalf, kLogHalf};
            out.informative[j] = false;
        }
    }
    return out;
}

double task_set_likelihood(const std::vector<double>& z, std::uint32_t mask, const std::vector<LogisticParams>& params,
                           LikelihoodMode mode) {
    if (z.empty()) throw Error("INVALID_ARGUMENT", "task set likelihood over an empty task set");
    if (params.size() != z.size()) throw Error("DIMENSION_MISMATCH", "one parameter set per task is required");
    double acc = mode == LikelihoodMode::average ? 0.0 : 1.0;
    for (std::size_t b = 0; b < z.size(); ++b) {
        const double g = logistic_g(z[b], (mask >> b) & 1U, params[b]);
        acc = mode == LikelihoodMode::average ? acc + g : acc * g;
    }
    return mode == LikelihoodMode::average ? acc / static_cast<double>(z.size()) : acc;
}

double log_task_set_likelihood(const std::vector<std::array<double, 2>>& log_g, std::uint32_t mask, LikelihoodMode mode) {
    if (log_g.empty()) throw Error("INVALID_ARGUMENT", "task set likelihood over an empty task set");
    if (mode == LikelihoodMode::product) {
        double acc = 0.0;
        for (std::size_t b = 0; b < log_g.size(); ++b) acc += log_g[b][(mask >> b) & 1U];
        return acc;
    }
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < log_g.size(); ++b) peak = std::max(peak, log_g[b][(mask >> b) & 1U]);
    if (std::isinf(peak)) return peak;
    double acc = 0.0;
    for (std::size_t b = 0; b < log_g.size(); ++b) acc += std::exp(log_g[b][(mask >> b) & 1U] - peak);
    return peak + std::log(acc) - std::log(static_cast<double>(log_g.size()));
}

ObservationRecord parse_observation(const nlohmann::json& doc, const ModelSpec& spec) {
    if (!doc.is_object()) throw Error("SCHEMA", "observation must be a JSON object");
    for (const auto& [key, value] : doc.items()) {
        if (key != "t" && key != "values" && key != "kind") {
            throw Error("SCHEMA", "unknown field '" + key + "' in observation", "/" + key);
        }
    }
    if (!doc.contains("t") || !doc["t"].is_number_integer()) {
        throw Error("SCHEMA", "observation needs an integer t", "/t");
    }
    ObservationRecord record = empty_record(spec, doc["t"].get<std::int64_t>());
    if (auto it = doc.find("values"); it != doc.end()) {
        if (!it->is_object()) throw Error("SCHEMA", "values must be an object keyed by observable id", "/values");
        for (const auto& [key, value] : it->items()) {
            auto idx = spec.find_observable(key);
            if (!idx) throw Error("SCHEMA", "unknown observable '" + key + "'", "/values/" + key);
            if (value.is_null()) continue;
            if (!value.is_number() || !std::isfinite(value.get<double>())) {
                throw Error("SCHEMA", "value of '" + key + "' must be a finite number or null", "/values/" + key);
            }
            record.values[*idx] = value.get<double>();
        }
    }
    return record;
}

nlohmann::json to_json(const ObservationRecord& record, const ModelSpec& spec) {
    nlohmann::json values = nlohmann::json::object();
    for (std::size_t i = 0; i < record.values.size(); ++i) {
        values[spec.observables[i].id] = record.values[i] ? nlohmann::json(*record.values[i]) : nlohmann::json(nullptr);
    }
    return {{"t", record.t}, {"values", std::move(values)}};
}

std::vector<ObservationRecord> parse_observation_csv(std::string_view text, const ModelSpec& spec) {
    std::vector<ObservationRecord> records;
    std::vector<std::optional<std::size_t>> column_to_obs;
    bool have_header = false;
    std::size_t line_no = 0;
    std::size_t t_column = 0;

    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        const std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (trim(line).empty()) continue;

        const auto cells = split_csv_line(line);
        if (!have_header) {
            bool found_t = false;
            for (std::size_t c = 0; c < cells.size(); ++c) {
                if (cells[c] == "t") {
                    if (found_t) throw Error("PARSE", "duplicate t column");
                    found_t = true;
                    t_column = c;
                    column_to_obs.emplace_back();
                    continue;
                }
                auto idx = spec.find_observable(cells[c]);
                if (!idx) throw Error("PARSE", "unknown observable column '" + std::string(cells[c]) + "'");
                for (const auto& seen : column_to_obs) {
                    if (seen == idx) throw Error("PARSE", "duplicate column '" + std::string(cells[c]) + "'");
                }
                column_to_obs.emplace_back(idx);
            }
            if (!found_t) throw Error("PARSE", "CSV header has no t column");
            have_header = true;
            continue;
        }
        if (cells.size() != column_to_obs.size()) {
            throw Error("PARSE", "line " + std::to_string(line_no) + ": expected " + std::to_string(column_to_obs.size()) +
                                     " cells, got " + std::to_string(cells.size()));
        }
        ObservationRecord record = empty_record(spec, parse_time(cells[t_column], line_no));
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (!column_to_obs[c] || cells[c].empty()) continue;
            record.values[*column_to_obs[c]] = parse_double(cells[c], line_no, spec.observables[*column_to_obs[c]].id);
        }
        records.push_back(std::move(record));
    }
    if (!have_header) throw Error("PARSE", "empty CSV input");
    return records;
}

}  // namespace escalate
