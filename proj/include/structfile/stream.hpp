#pragma once

#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <unordered_map>

#include "structfile/binary.hpp"
#include "structfile/data.hpp"
#include "structfile/io.hpp"

namespace structfile {

struct FileSessionConfig {
    // Entries in the per-session offset/length cache; 0 disables caching.
    // Eviction never changes answers, only the cost of recomputing them.
    std::size_t cacheCapacity = 65536;
};

// Reads STRUCTFILE_CACHE when set.
FileSessionConfig defaultSessionConfig();

// Lazy read-only access to a binary structured file. A data item is just a
// byte position; member offsets are computed on demand by skipping the
// members before it, reading only length-determining bytes (counts, tags,
// selectors), never payloads. Safe for concurrent readers.
class FileSession : public std::enable_shared_from_this<FileSession> {
public:
    static std::shared_ptr<FileSession> open(const std::string& path);
    static std::shared_ptr<FileSession> open(const std::string& path,
                                             const FileSessionConfig& cfg);
    static std::shared_ptr<FileSession> open(std::shared_ptr<const RandomAccessSource> src,
                                             const FileSessionConfig& cfg = defaultSessionConfig());

    const FileHeader& header() const { return header_; }
    DataHandle root();

    std::uint64_t fileSize() const { return counting_->size(); }
    std::uint64_t bytesRead() const { return counting_->bytesRead(); }
    std::uint64_t maxOffsetRead() const { return counting_->maxOffsetRead(); }
    void resetCounters() { counting_->resetCounters(); }
    std::size_t cacheCapacity() const { return cfg_.cacheCapacity; }

private:
    FileSession(std::shared_ptr<CountingSource> src, FileHeader header, FileSessionConfig cfg)
        : counting_(std::move(src)), header_(std::move(header)), cfg_(cfg) {}

    friend struct StreamAccess;

    // Cache key: a byte offset alone is ambiguous because a composite value
    // and its first member can start at the same position.
    struct NodeKey {
        std::uint64_t off;
        const TypeNode* node;
        bool operator==(const NodeKey&) const = default;
    };
    struct NodeKeyHash {
        std::size_t operator()(const NodeKey& k) const {
            return std::hash<std::uint64_t>()(k.off) ^
                   (std::hash<const void*>()(k.node) << 1);
        }
    };

    struct NodeInfo {
        std::optional<std::uint64_t> length;
        // Bound type of an any node at this offset.
        TypePtr anyType;
        EnvPtr anyEnv;
        std::uint32_t anyTextLen = 0;
        // Start offsets of child slots computed so far (struct: tag byte or
        // value; array: element starts).
        std::vector<std::uint64_t> childOffsets;
    };

    NodeInfo cacheGet(const NodeKey& key);
    void cachePut(const NodeKey& key, const NodeInfo& info);

    std::shared_ptr<CountingSource> counting_;
    FileHeader header_;
    FileSessionConfig cfg_;

    std::mutex cacheMutex_;
    std::list<std::pair<NodeKey, NodeInfo>> lru_;
    std::unordered_map<NodeKey, std::list<std::pair<NodeKey, NodeInfo>>::iterator, NodeKeyHash>
        cacheIndex_;
};

}  // namespace structfile
