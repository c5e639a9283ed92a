#pragma once

#include <string>

#include "mf/matrix.hpp"

namespace mf {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Binary PGM (P5, maxval 255). Values in [0,1] quantized by rounding.
std::string encode_pgm(const Matrix& gray);
Matrix decode_pgm(const std::string& bytes);

/// Binary PPM (P6, maxval 255). Channels are h x w matrices in [0,1].
std::string encode_ppm(const Matrix& r, const Matrix& g, const Matrix& b);
void decode_ppm(const std::string& bytes, Matrix& r, Matrix& g, Matrix& b);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

} // namespace mf
