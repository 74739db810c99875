#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"

namespace escalate::service {

struct JournalEntry {
    std::uint64_t seq = 0;
    std::string kind;  // model-registered | case-created | observation | evidence | annotation
    nlohmann::json payload;
    std::string received;  // server receipt time, ISO 8601 UTC
};

nlohmann::json to_json(const JournalEntry& entry);
JournalEntry parse_journal_entry(const nlohmann::json& doc);

/// Append-only file of length-prefixed JSON entries: a little-endian u32
/// byte count followed by the compact JSON text. Each append is fsynced
/// before it returns.
class Journal {
public:
    /// Opens (creating if needed) and reads every complete entry. A torn
    /// final record from an interrupted write is cut off so later appends
    /// start on a clean boundary.
    explicit Journal(std::filesystem::path path);
    ~Journal();

    Journal(const Journal&) = delete;
    Journal& operator=(const Journal&) = delete;

    const std::vector<JournalEntry>& replayed() const noexcept { return replayed_; }
    std::uint64_t size() const noexcept { return count_; }
    std::uint64_t bytes() const noexcept { return bytes_; }
    const std::filesystem::path& path() const noexcept { return path_; }

    /// Writes the entry; entry.seq must equal size(). Throws on I/O failure,
    /// in which case the file is rolled back to its previous length.
    void append(const JournalEntry& entry);

    /// Drops the copies of replayed entries once the owner has consumed them.
    void release_replayed() { std::vector<JournalEntry>().swap(replayed_); }

private:
    std::filesystem::path path_;
    int fd_ = -1;
    std::uint64_t count_ = 0;
    std::uint64_t bytes_ = 0;
    std::vector<JournalEntry> replayed_;
    std::mutex mutex_;
};

std::string utc_timestamp();

}  // namespace escalate::service
