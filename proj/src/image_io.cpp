#include "mf/image_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace mf {

namespace {

uint8_t quantize(double v) {
    const double c = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    return static_cast<uint8_t>(std::lround(c * 255.0));
}

struct PnmHeader {
    int width = 0, height = 0, maxval = 0;
    size_t data_offset = 0;
};

PnmHeader parse_header(const std::string& bytes, const char* magic) {
    if (bytes.size() < 2 || bytes[0] != magic[0] || bytes[1] != magic[1])
        throw FormatError(std::string("PNM: expected ") + magic + " header");
    PnmHeader h;
    size_t pos = 2;
    int fields[3];
    for (int f = 0; f < 3; ++f) {
        while (pos < bytes.size() && (std::isspace(static_cast<unsigned char>(bytes[pos])) || bytes[pos] == '#')) {
            if (bytes[pos] == '#')
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            else
                ++pos;
        }
        int v = 0;
        bool any = false;
        while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
            v = v * 10 + (bytes[pos] - '0');
            ++pos;
            any = true;
        }
        if (!any) throw FormatError("PNM: truncated header");
        fields[f] = v;
    }
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
        throw FormatError("PNM: missing whitespace after maxval");
    ++pos;
    h.width = fields[0];
    h.height = fields[1];
    h.maxval = fields[2];
    h.data_offset = pos;
    if (h.maxval != 255) throw FormatError("PNM: only maxval 255 is supported");
    return h;
}

} // namespace

std::string encode_pgm(const Matrix& gray) {
    std::ostringstream out;
    out << "P5\n" << gray.cols() << " " << gray.rows() << "\n255\n";
    for (double v : gray.vec()) out.put(static_cast<char>(quantize(v)));
    return out.str();
}

Matrix decode_pgm(const std::string& bytes) {
    const PnmHeader h = parse_header(bytes, "P5");
    const size_t need = static_cast<size_t>(h.width) * h.height;
    if (bytes.size() - h.data_offset < need) throw FormatError("PGM: truncated pixel data");
    Matrix m(h.height, h.width);
    for (size_t i = 0; i < need; ++i)
        m.data()[i] = static_cast<uint8_t>(bytes[h.data_offset + i]) / 255.0;
    return m;
}

std::string encode_ppm(const Matrix& r, const Matrix& g, const Matrix& b) {
    require_same_shape(r, g, "encode_ppm");
    require_same_shape(r, b, "encode_ppm");
    std::ostringstream out;
    out << "P6\n" << r.cols() << " " << r.rows() << "\n255\n";
    for (size_t i = 0; i < r.size(); ++i) {
        out.put(static_cast<char>(quantize(r.data()[i])));
        out.put(static_cast<char>(quantize(g.data()[i])));
        out.put(static_cast<char>(quantize(b.data()[i])));
    }
    return out.str();
}

void decode_ppm(const std::string& bytes, Matrix& r, Matrix& g, Matrix& b) {
    const PnmHeader h = parse_header(bytes, "P6");
    const size_t need = static_cast<size_t>(h.width) * h.height * 3;
    if (bytes.size() - h.data_offset < need) throw FormatError("PPM: truncated pixel data");
    r = Matrix(h.height, h.width);
    g = Matrix(h.height, h.width);
    b = Matrix(h.height, h.width);
    for (size_t i = 0; i < static_cast<size_t>(h.width) * h.height; ++i) {
        r.data()[i] = static_cast<uint8_t>(bytes[h.data_offset + 3 * i]) / 255.0;
        g.data()[i] = static_cast<uint8_t>(bytes[h.data_offset + 3 * i + 1]) / 255.0;
        b.data()[i] = static_cast<uint8_t>(bytes[h.data_offset + 3 * i + 2]) / 255.0;
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("short write to " + path);
}

} // namespace mf
