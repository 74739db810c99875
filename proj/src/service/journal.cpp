#include "escalate/service/journal.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>

#include "escalate/error.hpp"

namespace escalate::service {

namespace {

constexpr std::uint32_t kMaxEntryBytes = 64U << 20;

[[noreturn]] void io_failure(const std::string& what, const std::filesystem::path& path) {
    throw Error("IO_ERROR", what + " '" + path.string() + "': " + std::strerror(errno));
}

bool read_exact(int fd, void* buf, std::size_t n) {
    auto* p = static_cast<char*>(buf);
    while (n > 0) {
        const auto got = ::read(fd, p, n);
        if (got < 0 && errno == EINTR) continue;
        if (got <= 0) return false;
        p += got;
        n -= static_cast<std::size_t>(got);
    }
    return true;
}

bool write_all(int fd, const char* p, std::size_t n) {
    while (n > 0) {
        const auto put = ::write(fd, p, n);
        if (put < 0 && errno == EINTR) continue;
        if (put <= 0) return false;
        p += put;
        n -= static_cast<std::size_t>(put);
    }
    return true;
}

}  // namespace

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const auto secs = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[96];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                  tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
    return buf;
}

nlohmann::json to_json(const JournalEntry& entry) {
    return {{"seq", entry.seq}, {"kind", entry.kind}, {"payload", entry.payload}, {"received", entry.received}};
}

JournalEntry parse_journal_entry(const nlohmann::json& doc) {
    JournalEntry e;
    e.seq = doc.at("seq").get<std::uint64_t>();
    e.kind = doc.at("kind").get<std::string>();
    e.payload = doc.at("payload");
    e.received = doc.value("received", std::string{});
    return e;
}

Journal::Journal(std::filesystem::path path) : path_(std::move(path)) {
    fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) io_failure("cannot open journal", path_);

    std::uint64_t good = 0;
    for (;;) {
        unsigned char len_bytes[4];
        if (!read_exact(fd_, len_bytes, 4)) break;
        const std::uint32_t len = std::uint32_t{len_bytes[0]} | (std::uint32_t{len_bytes[1]} << 8) |
                                  (std::uint32_t{len_bytes[2]} << 16) | (std::uint32_t{len_bytes[3]} << 24);
        if (len == 0 || len > kMaxEntryBytes) break;
        std::string body(len, '\0');
        if (!read_exact(fd_, body.data(), len)) break;
        JournalEntry entry;
        try {
            entry = parse_journal_entry(nlohmann::json::parse(body));
        } catch (const std::exception&) {
            break;
        }
        if (entry.seq != count_) {
            ::close(fd_);
            throw Error("JOURNAL_CORRUPT", "journal '" + path_.string() + "' has sequence " + std::to_string(entry.seq) +
                                               " where " + std::to_string(count_) + " was expected");
        }
        replayed_.push_back(std::move(entry));
        ++count_;
        good += 4 + len;
    }

    struct stat st {};
    if (::fstat(fd_, &st) != 0) io_failure("cannot stat journal", path_);
    if (static_cast<std::uint64_t>(st.st_size) != good) {
        if (::ftruncate(fd_, static_cast<off_t>(good)) != 0) io_failure("cannot truncate torn journal", path_);
        ::fsync(fd_);
    }
    bytes_ = good;
    if (::lseek(fd_, static_cast<off_t>(good), SEEK_SET) < 0) io_failure("cannot seek journal", path_);
}

Journal::~Journal() {
    if (fd_ >= 0) ::close(fd_);
}

void Journal::append(const JournalEntry& entry) {
    std::lock_guard lock(mutex_);
    if (entry.seq != count_) {
        throw Error("SEQ_CONFLICT", "journal append expected sequence " + std::to_string(count_));
    }
    const std::string body = to_json(entry).dump();
    const auto len = static_cast<std::uint32_t>(body.size());
    std::string record;
    record.reserve(4 + body.size());
    for (int b = 0; b < 4; ++b) record.push_back(static_cast<char>((len >> (8 * b)) & 0xFFU));
    record += body;

    if (!write_all(fd_, record.data(), record.size()) || ::fsync(fd_) != 0) {
        const int saved = errno;
        if (::ftruncate(fd_, static_cast<off_t>(bytes_)) == 0) ::lseek(fd_, static_cast<off_t>(bytes_), SEEK_SET);
        errno = saved;
        io_failure("cannot append to journal", path_);
    }
    bytes_ += record.size();
    ++count_;
}

}  // namespace escalate::service
