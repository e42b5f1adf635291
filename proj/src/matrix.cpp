#include "structfile/matrix.hpp"

#include <bit>
#include <cstddef>
#include <cstring>

namespace structfile {

namespace cell {

std::uint64_t decodeUint(const std::byte* p, NumKind k) {
    int w = numWidth(k);
    std::uint64_t v = 0;
    for (int i = 0; i < w && i < 8; ++i)
        v |= std::uint64_t(std::to_integer<std::uint8_t>(p[i])) << (8 * i);
    return v;
}

std::int64_t decodeInt(const std::byte* p, NumKind k) {
    std::uint64_t v = decodeUint(p, k);
    int w = numWidth(k);
    if (numIsSigned(k) && w < 8) {
        std::uint64_t signBit = std::uint64_t(1) << (8 * w - 1);
        if (v & signBit) v |= ~(signBit * 2 - 1);
    }
    return std::int64_t(v);
}

void encodeInt(std::byte* p, NumKind k, std::int64_t v) {
    int w = numWidth(k);
    std::uint64_t u = std::uint64_t(v);
    for (int i = 0; i < w && i < 8; ++i) p[i] = std::byte(std::uint8_t(u >> (8 * i)));
    for (int i = 8; i < w; ++i) p[i] = std::byte{0};
}

void doubleToQuad(double v, std::byte* out16) {
    __float128 q = v;
    static_assert(sizeof(q) == 16);
    std::memcpy(out16, &q, 16);
}

double quadToDouble(const std::byte* in16) {
    __float128 q;
    std::memcpy(&q, in16, 16);
    return double(q);
}

double decodeDouble(const std::byte* p, NumKind k) {
    switch (k) {
        case NumKind::F4: {
            std::uint32_t bits = std::uint32_t(decodeUint(p, k));
            return double(std::bit_cast<float>(bits));
        }
        case NumKind::F8: {
            std::uint64_t bits = decodeUint(p, k);
            return std::bit_cast<double>(bits);
        }
        case NumKind::F16: return quadToDouble(p);
        default:
            // integer kinds widen
            return numIsSigned(k) ? double(decodeInt(p, k)) : double(decodeUint(p, k));
    }
}

void encodeDouble(std::byte* p, NumKind k, double v) {
    switch (k) {
        case NumKind::F4: {
            std::uint32_t bits = std::bit_cast<std::uint32_t>(float(v));
            for (int i = 0; i < 4; ++i) p[i] = std::byte(std::uint8_t(bits >> (8 * i)));
            break;
        }
        case NumKind::F8: {
            std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
            for (int i = 0; i < 8; ++i) p[i] = std::byte(std::uint8_t(bits >> (8 * i)));
            break;
        }
        case NumKind::F16: doubleToQuad(v, p); break;
        default: fail(Errc::WrongType, "cannot assign a float cell to an integer kind");
    }
}

}  // namespace cell

std::int64_t MatrixValue::cellInt(std::uint64_t i) const {
    return cell::decodeInt(payload_.data() + i * std::uint64_t(numWidth(kind_)), kind_);
}

std::uint64_t MatrixValue::cellUint(std::uint64_t i) const {
    return cell::decodeUint(payload_.data() + i * std::uint64_t(numWidth(kind_)), kind_);
}

double MatrixValue::cellDouble(std::uint64_t i) const {
    return cell::decodeDouble(payload_.data() + i * std::uint64_t(numWidth(kind_)), kind_);
}

void MatrixValue::setCellInt(std::uint64_t i, std::int64_t v) {
    cell::encodeInt(payload_.data() + i * std::uint64_t(numWidth(kind_)), kind_, v);
}

void MatrixValue::setCellDouble(std::uint64_t i, double v) {
    cell::encodeDouble(payload_.data() + i * std::uint64_t(numWidth(kind_)), kind_, v);
}

void MatrixValue::cellRaw(std::uint64_t i, std::byte* out16) const {
    int w = numWidth(kind_);
    std::memset(out16, 0, 16);
    std::memcpy(out16, payload_.data() + i * std::uint64_t(w), std::size_t(w));
}

void MatrixValue::setCellRaw(std::uint64_t i, const std::byte* in16) {
    int w = numWidth(kind_);
    std::memcpy(payload_.data() + i * std::uint64_t(w), in16, std::size_t(w));
}

}  // namespace structfile
