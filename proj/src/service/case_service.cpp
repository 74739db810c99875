#include "escalate/service/case_service.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>

#include "escalate/diagnostics.hpp"
#include "escalate/report.hpp"

namespace escalate::service {

namespace {

using json = nlohmann::json;

ServiceError not_found(const std::string& what, const std::string& id) {
    return ServiceError(404, "NOT_FOUND", what + " '" + id + "' does not exist");
}

/// Rethrows engine errors as ServiceError with the mapped status.
template <typename F>
auto guarded(F&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const ServiceError&) {
        throw;
    } catch (const Error& e) {
        throw ServiceError(status_for(e.code()), e.code(), e.what(), nullptr, e.path());
    } catch (const json::exception& e) {
        throw ServiceError(422, "SCHEMA", e.what());
    }
}

std::string case_name(std::uint64_t n) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "case-%06" PRIu64, n);
    return buf;
}

json state_ids(const ModelSpec& spec) {
    auto ids = json::array();
    for (const auto& s : spec.states) ids.push_back(s.id);
    return ids;
}

std::optional<std::uint64_t> take_seq(json& body) {
    if (!body.is_object() || !body.contains("seq")) return std::nullopt;
    const auto& v = body["seq"];
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) throw ServiceError(422, "SCHEMA", "seq must be a non-negative integer");
    const auto seq = body["seq"].get<std::uint64_t>();
    body.erase("seq");
    return seq;
}

void check_seq(const std::optional<std::uint64_t>& seq, const CaseRecord& record) {
    if (seq && *seq != record.journal->size()) {
        throw ServiceError(409, "SEQ_CONFLICT",
                           "sequence " + std::to_string(*seq) + " does not match the next sequence " +
                               std::to_string(record.journal->size()) + " of case '" + record.id + "'");
    }
}

Annotation parse_annotation(const json& body) {
    if (!body.is_object()) throw Error("SCHEMA", "annotation must be a JSON object");
    for (const auto& [key, value] : body.items()) {
        if (key != "t" && key != "note") throw Error("SCHEMA", "unknown field '" + key + "'", "/" + key);
    }
    if (!body.contains("t") || !body["t"].is_number_integer()) throw Error("SCHEMA", "annotation needs an integer t", "/t");
    if (!body.contains("note") || !body["note"].is_string()) throw Error("SCHEMA", "annotation needs a string note", "/note");
    return {body["t"].get<std::int64_t>(), body["note"].get<std::string>()};
}

CaseState apply_entry(const CaseState& state, const JournalEntry& entry) {
    const auto& spec = state.model()->spec();
    if (entry.kind == "observation" || entry.kind == "evidence") return state.step(parse_step_input(entry.payload, spec));
    if (entry.kind == "annotation") return state.annotate(parse_annotation(entry.payload));
    throw Error("JOURNAL_CORRUPT", "unexpected journal entry kind '" + entry.kind + "'");
}

}  // namespace

json ServiceError::body() const {
    json out{{"code", code()}, {"message", what()}};
    if (!path().empty()) out["path"] = path();
    if (!findings_.is_null()) out["findings"] = findings_;
    return out;
}

int status_for(const std::string& code) {
    if (code == "OUT_OF_ORDER" || code == "SEQ_CONFLICT") return 409;
    if (code == "NOT_FOUND") return 404;
    if (code == "INVALID_MODEL" || code == "XI_NO_ROOT" || code == "BAD_JSON") return 400;
    if (code == "IO_ERROR" || code == "JOURNAL_CORRUPT") return 500;
    return 422;
}

std::string model_id(const ModelSpec& spec) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : serialize_model(spec)) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
    return buf;
}

CaseService::CaseService(std::filesystem::path data_dir) : dir_(std::move(data_dir)) {
    std::filesystem::create_directories(dir_ / "cases");
    replay_models();
    replay_cases();
}

void CaseService::replay_models() {
    models_journal_ = std::make_unique<Journal>(dir_ / "models.journal");
    for (const auto& entry : models_journal_->replayed()) {
        if (entry.kind != "model-registered") {
            throw Error("JOURNAL_CORRUPT", "models journal holds a '" + entry.kind + "' entry");
        }
        auto spec = parse_model_json(entry.payload.at("model"));
        const auto id = model_id(spec);
        if (id != entry.payload.at("id").get<std::string>()) {
            throw Error("JOURNAL_CORRUPT", "model '" + id + "' does not match its journaled id");
        }
        auto canonical = serialize_model(spec);
        models_[id] = std::make_shared<const ModelEntry>(ModelEntry{CompiledModel::compile(std::move(spec)), std::move(canonical)});
    }
    models_journal_->release_replayed();
}

void CaseService::replay_cases() {
    std::vector<std::filesystem::path> files;
    for (const auto& f : std::filesystem::directory_iterator(dir_ / "cases")) {
        if (f.is_regular_file() && f.path().extension() == ".journal") files.push_back(f.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
        auto journal = std::make_unique<Journal>(path);
        const auto id = path.stem().string();
        if (journal->size() == 0) {
            // Creation never reached disk; the case was not acknowledged.
            journal.reset();
            std::filesystem::remove(path);
            continue;
        }
        const auto& entries = journal->replayed();
        if (entries.front().kind != "case-created") {
            throw Error("JOURNAL_CORRUPT", "case '" + id + "' does not start with case-created");
        }
        const auto mid = entries.front().payload.at("model").get<std::string>();
        auto model = find_model(mid);
        if (!model) throw Error("JOURNAL_CORRUPT", "case '" + id + "' refers to unknown model '" + mid + "'");
        CaseState state(model->model);
        for (std::size_t i = 1; i < entries.size(); ++i) {
            try {
                state = apply_entry(state, entries[i]);
            } catch (const Error& e) {
                throw Error("JOURNAL_CORRUPT", "case '" + id + "' entry " + std::to_string(i) + ": " + e.what());
            }
        }
        const auto created = entries.front().payload.value("created", entries.front().received);
        journal->release_replayed();
        cases_[id] = std::make_shared<CaseRecord>(id, mid, created, std::move(journal), std::move(state));

        unsigned long long n = 0;
        if (std::sscanf(id.c_str(), "case-%llu", &n) == 1) next_case_ = std::max<std::uint64_t>(next_case_, n + 1);
    }
}

std::shared_ptr<const CaseService::ModelEntry> CaseService::find_model(const std::string& id) const {
    std::shared_lock lock(models_mutex_);
    auto it = models_.find(id);
    return it == models_.end() ? nullptr : it->second;
}

std::shared_ptr<CaseRecord> CaseService::find_case(const std::string& id) const {
    std::shared_lock lock(cases_mutex_);
    auto it = cases_.find(id);
    if (it == cases_.end()) throw not_found("case", id);
    return it->second;
}

json CaseService::register_model(std::string_view document) {
    auto spec = guarded([&] {
        try {
            return parse_model(document);
        } catch (const Error& e) {
            json finding{{"severity", "error"}, {"code", e.code()}, {"message", e.what()}, {"path", e.path()}};
            throw ServiceError(400, e.code(), e.what(), json::array({finding}));
        }
    });
    const auto report = check_model(spec);
    if (report.has_errors()) {
        throw ServiceError(400, "INVALID_MODEL", "model failed validation with " + std::to_string(report.error_count()) +
                                                     " error(s)", to_json(report));
    }
    const auto id = model_id(spec);

    std::unique_lock lock(models_mutex_);
    if (models_.contains(id)) return {{"id", id}, {"created", false}, {"findings", to_json(report)}};

    auto canonical = serialize_model(spec);
    auto compiled = guarded([&] { return CompiledModel::compile(spec); });
    JournalEntry entry{models_journal_->size(), "model-registered", {{"id", id}, {"model", to_json(spec)}}, utc_timestamp()};
    guarded([&] { models_journal_->append(entry); });
    models_[id] = std::make_shared<const ModelEntry>(ModelEntry{std::move(compiled), std::move(canonical)});
    return {{"id", id}, {"created", true}, {"findings", to_json(report)}};
}

json CaseService::get_model(const std::string& id) const {
    auto model = find_model(id);
    if (!model) throw not_found("model", id);
    return {{"id", id}, {"model", to_json(model->model->spec())}};
}

json CaseService::longrun(const std::string& id, std::size_t horizon, bool mobilised_absorbing,
                          std::optional<std::string> sweep) const {
    auto model = find_model(id);
    if (!model) throw not_found("model", id);
    return guarded([&] {
        LongrunOptions options;
        options.horizon = horizon;
        options.variant = mobilised_absorbing ? LongrunVariant::mobilised_absorbing : LongrunVariant::single_absorbing;
        if (sweep) options.sweep = parse_neutral_rate_sweep(*sweep);
        return longrun_json(longrun_report(*model->model, options), model->model->spec());
    });
}

json CaseService::create_case(const json& request) {
    if (!request.is_object() || !request.contains("model") || !request["model"].is_string()) {
        throw ServiceError(422, "SCHEMA", "case creation needs a string 'model' id");
    }
    for (const auto& [key, value] : request.items()) {
        if (key != "model") throw ServiceError(422, "SCHEMA", "unknown field '" + key + "'");
    }
    const auto mid = request["model"].get<std::string>();
    auto model = find_model(mid);
    if (!model) throw not_found("model", mid);

    std::unique_lock lock(cases_mutex_);
    const auto id = case_name(next_case_);
    const auto created = utc_timestamp();
    auto journal = guarded([&] { return std::make_unique<Journal>(dir_ / "cases" / (id + ".journal")); });
    guarded([&] { journal->append({0, "case-created", {{"model", mid}, {"created", created}}, created}); });
    ++next_case_;
    auto record = std::make_shared<CaseRecord>(id, mid, created, std::move(journal), CaseState(model->model));
    cases_[id] = record;
    lock.unlock();
    return case_summary(id);
}

json CaseService::list_cases() const {
    std::vector<std::shared_ptr<CaseRecord>> records;
    {
        std::shared_lock lock(cases_mutex_);
        for (const auto& [id, r] : cases_) records.push_back(r);
    }
    auto out = json::array();
    for (const auto& r : records) {
        std::lock_guard lock(r->mutex);
        const auto last = r->state.last_step_time();
        out.push_back({{"id", r->id},
                       {"model", r->model_id},
                       {"created", r->created},
                       {"journal_length", r->journal->size()},
                       {"last_t", last ? json(*last) : json(nullptr)}});
    }
    return {{"cases", out}};
}

json CaseService::case_summary(const std::string& id) const {
    auto r = find_case(id);
    std::lock_guard lock(r->mutex);
    const auto& spec = r->state.model()->spec();
    const auto last = r->state.last_step_time();
    auto current = json::array();
    for (double p : r->state.current().values()) current.push_back(json_number(p));
    return {{"id", r->id},
            {"model", r->model_id},
            {"created", r->created},
            {"journal_length", r->journal->size()},
            {"last_t", last ? json(*last) : json(nullptr)},
            {"states", state_ids(spec)},
            {"current", current},
            {"score", json_number(position_score(r->state.current(), spec))}};
}

json CaseService::ingest(const std::string& id, const json& body, IngestKind kind) {
    auto r = find_case(id);
    json doc = body;
    if (!doc.is_object()) throw ServiceError(422, "SCHEMA", "entry must be a JSON object");
    const auto seq = take_seq(doc);
    if (kind == IngestKind::observation) {
        if (doc.contains("clamps")) throw ServiceError(422, "SCHEMA", "clamps belong on the evidence endpoint");
        if (!doc.contains("values")) throw ServiceError(422, "SCHEMA", "observation needs values");
    } else if (!doc.contains("clamps")) {
        throw ServiceError(422, "SCHEMA", "evidence needs clamps");
    }

    std::lock_guard lock(r->mutex);
    check_seq(seq, *r);
    const auto& spec = r->state.model()->spec();
    auto input = guarded([&] {
        doc.erase("kind");
        return parse_step_input(doc, spec);
    });
    auto next = guarded([&] { return r->state.step(input); });

    JournalEntry entry{r->journal->size(), kind == IngestKind::observation ? "observation" : "evidence",
                       to_json(input, spec), utc_timestamp()};
    guarded([&] { r->journal->append(entry); });
    r->state = std::move(next);

    json out = to_json(r->state.timeline().entries.back(), spec);
    out["case"] = r->id;
    out["seq"] = entry.seq;
    out["states"] = state_ids(spec);
    return out;
}

json CaseService::annotate(const std::string& id, const json& body) {
    auto r = find_case(id);
    json doc = body;
    const auto seq = take_seq(doc);
    const auto note = guarded([&] { return parse_annotation(doc); });

    std::lock_guard lock(r->mutex);
    check_seq(seq, *r);
    auto next = guarded([&] { return r->state.annotate(note); });
    JournalEntry entry{r->journal->size(), "annotation", {{"t", note.t}, {"note", note.note}}, utc_timestamp()};
    guarded([&] { r->journal->append(entry); });
    r->state = std::move(next);
    return {{"case", r->id}, {"seq", entry.seq}, {"t", note.t}};
}

PosteriorTimeline CaseService::sliced(const CaseRecord& record, std::optional<std::int64_t> from,
                                      std::optional<std::int64_t> to) const {
    PosteriorTimeline out = record.state.timeline();
    std::erase_if(out.entries, [&](const TimelineEntry& e) { return (from && e.t < *from) || (to && e.t > *to); });
    return out;
}

json CaseService::timeline(const std::string& id, std::optional<std::int64_t> from, std::optional<std::int64_t> to) const {
    auto r = find_case(id);
    std::lock_guard lock(r->mutex);
    const auto& spec = r->state.model()->spec();
    json out = to_json(sliced(*r, from, to), spec);
    out["case"] = r->id;
    out["model"] = r->model_id;
    out["journal_length"] = r->journal->size();
    return out;
}

std::string CaseService::timeline_csv(const std::string& id, std::optional<std::int64_t> from,
                                      std::optional<std::int64_t> to) const {
    auto r = find_case(id);
    std::lock_guard lock(r->mutex);
    return escalate::timeline_csv(sliced(*r, from, to), r->state.model()->spec());
}

json CaseService::whatif(const std::string& id, const json& body) const {
    auto r = find_case(id);
    const json* steps = &body;
    if (body.is_object()) {
        for (const auto& [key, value] : body.items()) {
            if (key != "steps") throw ServiceError(422, "SCHEMA", "unknown field '" + key + "'");
        }
        if (!body.contains("steps")) throw ServiceError(422, "SCHEMA", "what-if needs a steps array");
        steps = &body["steps"];
    }
    if (!steps->is_array()) throw ServiceError(422, "SCHEMA", "what-if steps must be an array");

    CaseState snapshot = [&] {
        std::lock_guard lock(r->mutex);
        return r->state;
    }();
    const auto& spec = snapshot.model()->spec();
    std::vector<StepInput> inputs;
    guarded([&] {
        for (const auto& s : *steps) {
            json doc = s;
            if (doc.is_object()) doc.erase("kind");
            inputs.push_back(parse_step_input(doc, spec));
        }
    });
    auto result = guarded([&] { return escalate::whatif(snapshot, inputs); });
    json out = to_json(result, spec);
    out["case"] = r->id;
    return out;
}

std::uint64_t CaseService::journal_length(const std::string& id) const {
    auto r = find_case(id);
    std::lock_guard lock(r->mutex);
    return r->journal->size();
}

json CaseService::journal(const std::string& id) const {
    auto r = find_case(id);
    std::lock_guard lock(r->mutex);
    Journal copy(r->journal->path());
    auto out = json::array();
    for (const auto& e : copy.replayed()) out.push_back(to_json(e));
    return {{"case", r->id}, {"entries", out}};
}

}  // namespace escalate::service
