#pragma once

#include <string>
#include <vector>

#include "mf/matrix.hpp"

namespace mf {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// All command outputs funnel through one of these: files land strictly
/// under the root, and finalize() records every written file with its CRC32
/// in manifest.json.
class OutputDir {
public:
    explicit OutputDir(std::string root);

    const std::string& root() const { return root_; }
    std::string path(const std::string& rel) const;
    void write(const std::string& rel, const std::string& bytes);
    void finalize();

private:
    struct Entry {
        std::string rel;
        uint32_t crc = 0;
        size_t bytes = 0;
    };
    std::string root_;
    std::vector<Entry> entries_;
};

/// Doubles formatted with 17 significant digits (round-trip exact).
std::string fmt_g17(double v);

} // namespace mf
