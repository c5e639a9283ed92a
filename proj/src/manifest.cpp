#include "mf/manifest.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>

#include "mf/checkpoint.hpp"
#include "mf/image_io.hpp"

namespace fs = std::filesystem;

namespace mf {

OutputDir::OutputDir(std::string root) : root_(std::move(root)) {
    if (root_.empty()) throw UsageError("output directory must not be empty");
    fs::create_directories(root_);
}

std::string OutputDir::path(const std::string& rel) const {
    if (rel.empty() || rel.front() == '/' || rel.find("..") != std::string::npos)
        throw UsageError("output path must be relative and inside the output directory: " + rel);
    return (fs::path(root_) / rel).string();
}

void OutputDir::write(const std::string& rel, const std::string& bytes) {
    const std::string full = path(rel);
    fs::create_directories(fs::path(full).parent_path());
    write_file(full, bytes);
    entries_.push_back({rel, crc32_bytes(bytes), bytes.size()});
}

void OutputDir::finalize() {
    std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) { return a.rel < b.rel; });
    std::string json = "{\n  \"files\": [\n";
    for (size_t i = 0; i < entries_.size(); ++i) {
        char crc_hex[16];
        std::snprintf(crc_hex, sizeof(crc_hex), "%08x", entries_[i].crc);
        json += "    {\"path\": \"" + entries_[i].rel + "\", \"crc32\": \"" + crc_hex +
                "\", \"bytes\": " + std::to_string(entries_[i].bytes) + "}";
        json += i + 1 < entries_.size() ? ",\n" : "\n";
    }
    json += "  ]\n}\n";
    write_file(path("manifest.json"), json);
}

std::string fmt_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace mf
