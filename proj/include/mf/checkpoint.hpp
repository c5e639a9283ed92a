#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mf/matrix.hpp"

namespace mf {

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct NamedTensor {
    std::string name;
    std::vector<uint32_t> dims;
    std::vector<double> values;

    static NamedTensor scalar(std::string name, double v) { return {std::move(name), {1}, {v}}; }
    static NamedTensor from_matrix(std::string name, const Matrix& m) {
        return {std::move(name), {static_cast<uint32_t>(m.rows()), static_cast<uint32_t>(m.cols())}, m.vec()};
    }
    Matrix to_matrix() const;
    double to_scalar() const;
};

/// Wire format: magic "MFCK", u32 LE version (= 1), u32 LE tensor count,
/// then per tensor: u16 LE name length, UTF-8 name, u8 rank, u32 LE dims,
/// f64 LE row-major values; finally u32 LE CRC32 of all preceding bytes.
std::string encode_checkpoint(const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> decode_checkpoint(const std::string& bytes);

uint32_t crc32_bytes(const std::string& bytes);

} // namespace mf
