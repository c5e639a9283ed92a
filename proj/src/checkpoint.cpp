#include "mf/checkpoint.hpp"

#include <cstring>
#include <zlib.h>

namespace mf {

namespace {

constexpr char kMagic[4] = {'M', 'F', 'C', 'K'};
constexpr uint32_t kVersion = 1;

void put_u16(std::string& out, uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) {
    uint64_t bits;
    std::memcpy(&bits, &d, sizeof(bits));
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

struct Reader {
    const std::string& bytes;
    size_t pos = 0;

    void need(size_t n) const {
        if (pos + n > bytes.size()) throw CheckpointError("checkpoint: truncated file");
    }
    uint16_t u16() {
        need(2);
        const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
        pos += 2;
        return static_cast<uint16_t>(p[0] | (p[1] << 8));
    }
    uint32_t u32() {
        need(4);
        const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
        pos += 4;
        return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) | (static_cast<uint32_t>(p[2]) << 16) |
               (static_cast<uint32_t>(p[3]) << 24);
    }
    double f64() {
        need(8);
        uint64_t bits = 0;
        const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
        for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(p[i]) << (8 * i);
        pos += 8;
        double d;
        std::memcpy(&d, &bits, sizeof(d));
        return d;
    }
    std::string str(size_t n) {
        need(n);
        std::string s = bytes.substr(pos, n);
        pos += n;
        return s;
    }
};

} // namespace

uint32_t crc32_bytes(const std::string& bytes) {
    return static_cast<uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

Matrix NamedTensor::to_matrix() const {
    if (dims.size() != 2) throw CheckpointError("tensor '" + name + "' is not rank 2");
    return Matrix(static_cast<int>(dims[0]), static_cast<int>(dims[1]), values);
}

double NamedTensor::to_scalar() const {
    if (values.size() != 1) throw CheckpointError("tensor '" + name + "' is not a scalar");
    return values[0];
}

std::string encode_checkpoint(const std::vector<NamedTensor>& tensors) {
    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<uint32_t>(tensors.size()));
    for (const NamedTensor& t : tensors) {
        if (t.name.size() > 0xffff) throw CheckpointError("tensor name too long: " + t.name);
        if (t.dims.size() > 0xff) throw CheckpointError("tensor rank too large: " + t.name);
        size_t n = 1;
        for (uint32_t d : t.dims) n *= d;
        if (n != t.values.size()) throw CheckpointError("tensor '" + t.name + "': dims do not match value count");
        put_u16(out, static_cast<uint16_t>(t.name.size()));
        out.append(t.name);
        out.push_back(static_cast<char>(t.dims.size()));
        for (uint32_t d : t.dims) put_u32(out, d);
        for (double v : t.values) put_f64(out, v);
    }
    put_u32(out, crc32_bytes(out));
    return out;
}

std::vector<NamedTensor> decode_checkpoint(const std::string& bytes) {
    if (bytes.size() < 12 + 4) throw CheckpointError("checkpoint: file too small");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw CheckpointError("checkpoint: bad magic");

    const std::string body = bytes.substr(0, bytes.size() - 4);
    Reader tail{bytes, bytes.size() - 4};
    const uint32_t stored = tail.u32();
    if (crc32_bytes(body) != stored) throw CheckpointError("checkpoint: CRC mismatch");

    Reader r{body, 4};
    const uint32_t version = r.u32();
    if (version != kVersion)
        throw CheckpointError("checkpoint: unsupported format version " + std::to_string(version));
    const uint32_t count = r.u32();
    std::vector<NamedTensor> tensors;
    tensors.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        NamedTensor t;
        const uint16_t name_len = r.u16();
        t.name = r.str(name_len);
        r.need(1);
        const int rank = static_cast<unsigned char>(body[r.pos]);
        ++r.pos;
        size_t n = 1;
        for (int d = 0; d < rank; ++d) {
            t.dims.push_back(r.u32());
            n *= t.dims.back();
        }
        t.values.reserve(n);
        for (size_t k = 0; k < n; ++k) t.values.push_back(r.f64());
        tensors.push_back(std::move(t));
    }
    if (r.pos != body.size()) throw CheckpointError("checkpoint: trailing bytes");
    return tensors;
}

} // namespace mf
