#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "escalate/engine.hpp"
#include "escalate/error.hpp"
#include "escalate/service/journal.hpp"

namespace escalate::service {

/// Failure with the HTTP status it maps to. `findings` carries a validation
/// report when one exists. Serialized as {code, message, path?, findings?}.
class ServiceError : public Error {
public:
    ServiceError(int status, std::string code, const std::string& message, nlohmann::json findings = nullptr,
                 std::string path = {})
        : Error(std::move(code), message, std::move(path)), status_(status), findings_(std::move(findings)) {}

    int status() const noexcept { return status_; }
    const nlohmann::json& findings() const noexcept { return findings_; }
    nlohmann::json body() const;

private:
    int status_;
    nlohmann::json findings_;
};

/// Status for an engine error code: 409 for ordering conflicts, 404 for
/// unknown ids, 400 for invalid models, 422 for other input problems.
int status_for(const std::string& code);

/// FNV-1a 64 over the canonical model serialization, as 16 hex digits.
std::string model_id(const ModelSpec& spec);

struct CaseRecord {
    std::string id;
    std::string model_id;
    std::string created;
    std::unique_ptr<Journal> journal;
    CaseState state;
    std::mutex mutex;

    CaseRecord(std::string id_, std::string model_, std::string created_, std::unique_ptr<Journal> j, CaseState s)
        : id(std::move(id_)), model_id(std::move(model_)), created(std::move(created_)), journal(std::move(j)),
          state(std::move(s)) {}
};

enum class IngestKind { observation, evidence };

/// Event-sourced case store. Layout under the data directory:
/// models.journal (one model-registered entry per model) and
/// cases/<id>.journal (case-created, then observation / evidence /
/// annotation entries). Every case is rebuilt from its journal on start.
///
/// Writes to one case are serialized by that case's mutex; the step is
/// computed on a copy, journaled, and only then made visible.
class CaseService {
public:
    explicit CaseService(std::filesystem::path data_dir);

    /// {"id", "created", "findings"}; created is false for a repeat upload.
    nlohmann::json register_model(std::string_view document);
    nlohmann::json get_model(const std::string& id) const;
    nlohmann::json longrun(const std::string& id, std::size_t horizon, bool mobilised_absorbing,
                           std::optional<std::string> sweep) const;

    nlohmann::json create_case(const nlohmann::json& request);
    nlohmann::json list_cases() const;
    nlohmann::json case_summary(const std::string& id) const;

    /// Body: a step document plus an optional "seq" that must equal the
    /// case's next journal sequence number.
    nlohmann::json ingest(const std::string& id, const nlohmann::json& body, IngestKind kind);
    nlohmann::json annotate(const std::string& id, const nlohmann::json& body);

    nlohmann::json timeline(const std::string& id, std::optional<std::int64_t> from,
                            std::optional<std::int64_t> to) const;
    std::string timeline_csv(const std::string& id, std::optional<std::int64_t> from,
                             std::optional<std::int64_t> to) const;
    /// Body: {"steps": [...]} or a bare array of step documents.
    nlohmann::json whatif(const std::string& id, const nlohmann::json& body) const;

    std::uint64_t journal_length(const std::string& id) const;
    nlohmann::json journal(const std::string& id) const;

    const std::filesystem::path& data_dir() const noexcept { return dir_; }

private:
    struct ModelEntry {
        ModelHandle model;
        std::string canonical;
    };

    std::shared_ptr<CaseRecord> find_case(const std::string& id) const;
    std::shared_ptr<const ModelEntry> find_model(const std::string& id) const;
    void replay_models();
    void replay_cases();
    PosteriorTimeline sliced(const CaseRecord& record, std::optional<std::int64_t> from,
                             std::optional<std::int64_t> to) const;

    std::filesystem::path dir_;
    std::unique_ptr<Journal> models_journal_;
    mutable std::shared_mutex models_mutex_;
    std::map<std::string, std::shared_ptr<const ModelEntry>> models_;
    mutable std::shared_mutex cases_mutex_;
    std::map<std::string, std::shared_ptr<CaseRecord>> cases_;
    std::uint64_t next_case_ = 1;
};

}  // namespace escalate::service
