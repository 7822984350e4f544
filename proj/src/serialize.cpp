#include "gusl/serialize.hpp"

#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>

#include "gusl/errors.hpp"

namespace gusl {

uint64_t fnv1a64(const void* data, size_t len) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    uint64_t h = 0xCBF29CE484222325ULL;
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ULL;
    }
    return h;
}

uint64_t fnv1a64_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    uint64_t h = 0xCBF29CE484222325ULL;
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        std::streamsize n = in.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001B3ULL;
        }
        if (n < static_cast<std::streamsize>(sizeof(buf))) break;
    }
    return h;
}

void BlobWriter::add_f32(const std::string& name, const float* data, size_t count) {
    Entry e{name, "f32", buffer_.size(), count};
    buffer_.resize(buffer_.size() + count * 4);
    std::memcpy(buffer_.data() + e.offset, data, count * 4);
    entries_.push_back(std::move(e));
}

void BlobWriter::add_i32(const std::string& name, const int32_t* data, size_t count) {
    Entry e{name, "i32", buffer_.size(), count};
    buffer_.resize(buffer_.size() + count * 4);
    std::memcpy(buffer_.data() + e.offset, data, count * 4);
    entries_.push_back(std::move(e));
}

Json BlobWriter::finish(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
    if (!out) throw IoError("write failed: " + path);

    Json entries = Json::array();
    for (const auto& e : entries_) {
        entries.push_back({{"name", e.name},
                           {"dtype", e.dtype},
                           {"offset", e.offset},
                           {"count", e.count}});
    }
    return Json{{"size", buffer_.size()},
                {"checksum", fnv1a64(buffer_.data(), buffer_.size())},
                {"entries", entries}};
}

BlobReader::BlobReader(const std::string& path, const Json& manifest) : path_(path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("model bundle missing blob file: " + path);
    buffer_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());

    size_t expect_size = manifest.at("size").get<size_t>();
    uint64_t expect_sum = manifest.at("checksum").get<uint64_t>();
    if (buffer_.size() != expect_size ||
        fnv1a64(buffer_.data(), buffer_.size()) != expect_sum)
        throw FormatError("model bundle blob corrupted (checksum mismatch): " + path);

    for (const auto& e : manifest.at("entries")) {
        Entry entry;
        entry.dtype = e.at("dtype").get<std::string>();
        entry.offset = e.at("offset").get<size_t>();
        entry.count = e.at("count").get<size_t>();
        if (entry.offset + entry.count * 4 > buffer_.size())
            throw FormatError("model bundle blob entry out of range: " + path);
        entries_.emplace_back(e.at("name").get<std::string>(), entry);
    }
}

const BlobReader::Entry& BlobReader::find(const std::string& name,
                                          const std::string& dtype) const {
    for (const auto& [n, e] : entries_)
        if (n == name) {
            if (e.dtype != dtype)
                throw FormatError("blob entry dtype mismatch for " + name + " in " + path_);
            return e;
        }
    throw FormatError("model bundle blob entry missing: " + name + " in " + path_);
}

std::vector<float> BlobReader::read_f32(const std::string& name) const {
    const Entry& e = find(name, "f32");
    std::vector<float> out(e.count);
    std::memcpy(out.data(), buffer_.data() + e.offset, e.count * 4);
    return out;
}

std::vector<int32_t> BlobReader::read_i32(const std::string& name) const {
    const Entry& e = find(name, "i32");
    std::vector<int32_t> out(e.count);
    std::memcpy(out.data(), buffer_.data() + e.offset, e.count * 4);
    return out;
}

void write_json_file(const Json& j, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw IoError("write failed: " + path);
}

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    Json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw FormatError("invalid JSON in " + path + ": " + e.what());
    }
    return j;
}

}  // namespace gusl
