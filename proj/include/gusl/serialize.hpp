#pragma once

#include <cstdint>
#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

namespace gusl {

using Json = nlohmann::json;

// FNV-1a 64-bit, used for blob checksums and config hashes.
uint64_t fnv1a64(const void* data, size_t len);
uint64_t fnv1a64_file(const std::string& path);

// Typed sections appended to one binary blob file (little-endian). The
// manifest records every entry's name, offset, element count and dtype, plus
// the whole-file checksum.
class BlobWriter {
public:
    void add_f32(const std::string& name, const float* data, size_t count);
    void add_f32(const std::string& name, const std::vector<float>& v) {
        add_f32(name, v.data(), v.size());
    }
    void add_i32(const std::string& name, const int32_t* data, size_t count);
    void add_i32(const std::string& name, const std::vector<int32_t>& v) {
        add_i32(name, v.data(), v.size());
    }

    // Writes the blob file and returns its manifest description.
    Json finish(const std::string& path) const;

private:
    struct Entry {
        std::string name;
        std::string dtype;
        size_t offset = 0;
        size_t count = 0;
    };
    std::vector<char> buffer_;
    std::vector<Entry> entries_;
};

class BlobReader {
public:
    // Loads the blob file and verifies its checksum against the manifest.
    BlobReader(const std::string& path, const Json& manifest);

    std::vector<float> read_f32(const std::string& name) const;
    std::vector<int32_t> read_i32(const std::string& name) const;

private:
    struct Entry {
        std::string dtype;
        size_t offset = 0;
        size_t count = 0;
    };
    const Entry& find(const std::string& name, const std::string& dtype) const;
    std::vector<char> buffer_;
    std::vector<std::pair<std::string, Entry>> entries_;
    std::string path_;
};

void write_json_file(const Json& j, const std::string& path);
Json read_json_file(const std::string& path);

}  // namespace gusl
