#pragma once

#include <cstdint>
#include <cstring>
#include <vector>

#include "structfile/types.hpp"

namespace structfile {

// Shape of a multidimensional numeric value: rank, index range per dimension,
// and the storage-order flag. The canonical in-memory order is
// first-index-fastest, the same as the data stream, so codecs never
// transpose. Index bases exist for the application's benefit only; they have
// no wire representation and default to zero.
class MatrixShape {
public:
    struct Range {
        std::int64_t min = 0;
        std::int64_t max = -1;  // count = max - min + 1
        std::int64_t count() const { return max - min + 1; }
    };

    MatrixShape() = default;
    explicit MatrixShape(std::vector<Range> dims, bool firstIndexFastest = true)
        : dims_(std::move(dims)), firstFastest_(firstIndexFastest) {
        for (const Range& r : dims_)
            if (r.count() < 0) fail(Errc::ShapeMismatch, "negative dimension count");
    }

    static MatrixShape fromCounts(const std::vector<std::int64_t>& counts) {
        std::vector<Range> dims;
        dims.reserve(counts.size());
        for (std::int64_t c : counts) {
            if (c < 0) fail(Errc::ShapeMismatch, "negative dimension count");
            dims.push_back({0, c - 1});
        }
        return MatrixShape(std::move(dims));
    }

    std::size_t rank() const { return dims_.size(); }
    const Range& dim(std::size_t i) const { return dims_.at(i); }
    bool firstIndexFastest() const { return firstFastest_; }

    std::int64_t count(std::size_t i) const { return dims_.at(i).count(); }
    std::uint64_t elementCount() const {
        std::uint64_t n = 1;
        for (const Range& r : dims_) n *= std::uint64_t(r.count());
        return n;
    }

    friend bool operator==(const MatrixShape& a, const MatrixShape& b) {
        if (a.dims_.size() != b.dims_.size() || a.firstFastest_ != b.firstFastest_) return false;
        for (std::size_t i = 0; i < a.dims_.size(); ++i)
            if (a.dims_[i].min != b.dims_[i].min || a.dims_[i].max != b.dims_[i].max) return false;
        return true;
    }

private:
    std::vector<Range> dims_;
    bool firstFastest_ = true;
};

// Contiguous numeric payload. Cells are stored little-endian back to back in
// the shape's storage order; width comes from the kind.
class MatrixValue {
public:
    MatrixValue() = default;
    MatrixValue(NumKind kind, MatrixShape shape)
        : kind_(kind), shape_(std::move(shape)),
          payload_(shape_.elementCount() * std::uint64_t(numWidth(kind))) {}
    MatrixValue(NumKind kind, MatrixShape shape, std::vector<std::byte> payload)
        : kind_(kind), shape_(std::move(shape)), payload_(std::move(payload)) {
        if (payload_.size() != shape_.elementCount() * std::uint64_t(numWidth(kind_)))
            fail(Errc::ShapeMismatch, "payload length does not match shape");
    }

    NumKind kind() const { return kind_; }
    const MatrixShape& shape() const { return shape_; }
    const std::vector<std::byte>& payload() const { return payload_; }
    std::vector<std::byte>& payload() { return payload_; }
    std::uint64_t elementCount() const { return shape_.elementCount(); }

    // Flat cell access in storage order.
    std::int64_t cellInt(std::uint64_t i) const;
    std::uint64_t cellUint(std::uint64_t i) const;
    double cellDouble(std::uint64_t i) const;
    void setCellInt(std::uint64_t i, std::int64_t v);
    void setCellDouble(std::uint64_t i, double v);
    void cellRaw(std::uint64_t i, std::byte* out16) const;   // 16-byte cell for f16
    void setCellRaw(std::uint64_t i, const std::byte* in16);

    friend bool operator==(const MatrixValue& a, const MatrixValue& b) {
        return a.kind_ == b.kind_ && a.shape_ == b.shape_ && a.payload_ == b.payload_;
    }

private:
    NumKind kind_ = NumKind::F8;
    MatrixShape shape_;
    std::vector<std::byte> payload_;
};

// Little-endian scalar cell helpers shared by matrices and scalar storage.
namespace cell {
std::int64_t decodeInt(const std::byte* p, NumKind k);     // sign-extended
std::uint64_t decodeUint(const std::byte* p, NumKind k);   // zero-extended
double decodeDouble(const std::byte* p, NumKind k);        // floats; f16 rounds
void encodeInt(std::byte* p, NumKind k, std::int64_t v);   // truncates to width
void encodeDouble(std::byte* p, NumKind k, double v);
// Conversions between IEEE binary128 (16 LE bytes) and double. double->quad
// is exact; quad->double rounds to nearest and overflows to infinity.
void doubleToQuad(double v, std::byte* out16);
double quadToDouble(const std::byte* in16);
}  // namespace cell

}  // namespace structfile
