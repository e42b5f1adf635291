#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "structfile/data.hpp"
#include "structfile/io.hpp"

namespace structfile {

enum class FileMode { BinaryBig, BinaryLittle, Text };

// The ASCII file header: identification line, '#' comments, embedded type
// text, and the offset of the first data byte (right after the DATA line).
struct FileHeader {
    std::string version = "V0.1";
    FileMode mode = FileMode::BinaryBig;
    std::vector<std::string> comments;  // stored without the leading '#'
    EnvPtr typeEnv;
    std::uint64_t dataStart = 0;

    bool isBinary() const { return mode != FileMode::Text; }
    ByteOrder order() const {
        return mode == FileMode::BinaryLittle ? ByteOrder::Little : ByteOrder::Big;
    }
};

FileHeader scanHeader(SourceCursor& in);
FileHeader scanHeader(const RandomAccessSource& src);
void writeHeader(const FileHeader& h, ByteSink& out);

// One-shot encoding of a complete value. All counts are known up front, so
// any sink works.
void encodeValue(const DataHandle& d, ByteOrder order, ByteSink& out);
std::vector<std::byte> encodeValue(const DataHandle& d, ByteOrder order);

// Decodes one value of type t starting at the cursor.
DataHandle decodeValue(const TypePtr& t, const EnvPtr& env, ByteOrder order, SourceCursor& in);
// Whole-buffer variant that also rejects trailing bytes.
DataHandle decodeValueAll(const TypePtr& t, const EnvPtr& env, ByteOrder order,
                          std::span<const std::byte> bytes);

namespace detail {
class WriterCore;
}

// Streaming writer: emits values as a cursor walks the tree in serialization
// order. Opening a free-size array reserves a four-byte count cell and pushes
// it on the region stack; leaving the array patches the final count back in.
// Needs a seekable sink.
class StreamWriter {
public:
    StreamWriter(const FileHeader& h, SeekableSink& sink);
    ~StreamWriter();
    StreamWriter(StreamWriter&&) noexcept;
    StreamWriter& operator=(StreamWriter&&) noexcept;

    // Writes everything between the previous position and the cursor,
    // including the node under the cursor (for composites: its opening).
    void emitNext(const TreeCursor& c);
    // Pops the innermost open free-size region, patching its count.
    void closeRegion();
    // Closes all open regions and flushes. Unwritten non-optional data is an
    // error; trailing absent optional fields get their zero tags.
    void finish();

    std::size_t openRegions() const;

private:
    std::unique_ptr<detail::WriterCore> core_;
};

// Walks the whole tree in serialization order through emitNext and finishes
// the writer; works for any readable handle, including lazy ones.
void streamWriteAll(StreamWriter& w, const DataHandle& root);

// Writable binary data file: an in-memory tree plus a streaming writer.
// commit() flushes everything strictly before the cursor and releases the
// committed nodes; reading them afterwards raises WriteOnlySession.
class DataFileWriter {
public:
    DataFileWriter(const std::string& path, EnvPtr env, ByteOrder order,
                   std::vector<std::string> comments = {});
    DataFileWriter(std::unique_ptr<SeekableSink> sink, EnvPtr env, ByteOrder order,
                   std::vector<std::string> comments = {});
    ~DataFileWriter();
    DataFileWriter(DataFileWriter&&) noexcept;
    DataFileWriter& operator=(DataFileWriter&&) noexcept;

    const DataHandle& data() const { return root_; }
    void commit(const TreeCursor& upTo);
    void close();

private:
    std::unique_ptr<SeekableSink> sink_;
    std::unique_ptr<detail::WriterCore> core_;
    DataHandle root_;
    bool closed_ = false;
};

}  // namespace structfile
