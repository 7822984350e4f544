#include "gusl/nifti.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

#include "gusl/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "NIfTI I/O assumes a little-endian host");

namespace gusl {

namespace {

constexpr int kHeaderSize = 348;
constexpr int kDataOffset = 352;  // header + 4-byte extension flag

constexpr int16_t kDtUint8 = 2;
constexpr int16_t kDtInt16 = 4;
constexpr int16_t kDtFloat32 = 16;

template <typename T>
T read_at(const std::vector<char>& buf, size_t off) {
    T v;
    std::memcpy(&v, buf.data() + off, sizeof(T));
    return v;
}

template <typename T>
void write_at(std::vector<char>& buf, size_t off, T v) {
    std::memcpy(buf.data() + off, &v, sizeof(T));
}

}  // namespace

Volume3D load_nifti(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open NIfTI file: " + path);

    std::vector<char> hdr(kHeaderSize);
    in.read(hdr.data(), kHeaderSize);
    if (in.gcount() != kHeaderSize)
        throw FormatError("NIfTI header truncated: " + path);

    if (read_at<int32_t>(hdr, 0) != kHeaderSize)
        throw FormatError("NIfTI field sizeof_hdr != 348: " + path);

    char magic[4];
    std::memcpy(magic, hdr.data() + 344, 4);
    bool single = std::memcmp(magic, "n+1\0", 4) == 0;
    bool pair = std::memcmp(magic, "ni1\0", 4) == 0;
    if (!single && !pair)
        throw FormatError("NIfTI field magic is not n+1/ni1: " + path);

    int16_t dim[8];
    std::memcpy(dim, hdr.data() + 40, sizeof(dim));
    if (dim[0] != 3 && dim[0] != 4)
        throw FormatError("NIfTI field dim[0] must be 3 or 4: " + path);
    if (dim[0] == 4 && dim[4] != 1)
        throw FormatError("NIfTI field dim[4] must be 1: " + path);
    if (dim[1] < 1 || dim[2] < 1 || dim[3] < 1)
        throw FormatError("NIfTI field dim has non-positive extent: " + path);

    int16_t datatype = read_at<int16_t>(hdr, 70);
    if (datatype != kDtUint8 && datatype != kDtInt16 && datatype != kDtFloat32)
        throw FormatError("NIfTI unsupported datatype code " +
                          std::to_string(datatype) + ": " + path);

    float pixdim[8];
    std::memcpy(pixdim, hdr.data() + 76, sizeof(pixdim));
    for (int a = 1; a <= 3; ++a)
        if (!(pixdim[a] > 0.0f) || !std::isfinite(pixdim[a]))
            throw FormatError("NIfTI field pixdim[" + std::to_string(a) +
                              "] must be positive: " + path);

    float vox_offset = read_at<float>(hdr, 108);
    float scl_slope = read_at<float>(hdr, 112);
    float scl_inter = read_at<float>(hdr, 116);

    size_t offset = static_cast<size_t>(std::max(
        vox_offset, static_cast<float>(single ? kDataOffset : kHeaderSize)));

    Volume3D vol(dim[1], dim[2], dim[3]);
    vol.spacing = {pixdim[1], pixdim[2], pixdim[3]};

    size_t n = vol.size();
    size_t elem = datatype == kDtUint8 ? 1 : (datatype == kDtInt16 ? 2 : 4);
    std::vector<char> raw(n * elem);
    in.seekg(static_cast<std::streamoff>(offset), std::ios::beg);
    in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (static_cast<size_t>(in.gcount()) != raw.size())
        throw IoError("NIfTI data section truncated: " + path);

    // File order is x-fastest, which matches the internal h-fastest layout.
    bool rescale = scl_slope != 0.0f;
    for (size_t i = 0; i < n; ++i) {
        double v;
        if (datatype == kDtUint8) {
            v = static_cast<double>(static_cast<uint8_t>(raw[i]));
        } else if (datatype == kDtInt16) {
            int16_t s;
            std::memcpy(&s, raw.data() + 2 * i, 2);
            v = static_cast<double>(s);
        } else {
            float f;
            std::memcpy(&f, raw.data() + 4 * i, 4);
            v = static_cast<double>(f);
        }
        if (rescale) v = static_cast<double>(scl_slope) * v + static_cast<double>(scl_inter);
        if (!std::isfinite(v))
            throw FormatError("NIfTI data contains non-finite value: " + path);
        vol.data[i] = v;
    }
    return vol;
}

void save_nifti(const Volume3D& vol, const std::string& path) {
    validate_volume(vol);

    std::vector<char> hdr(kDataOffset, 0);
    write_at<int32_t>(hdr, 0, kHeaderSize);
    int16_t dim[8] = {3, static_cast<int16_t>(vol.h), static_cast<int16_t>(vol.w),
                      static_cast<int16_t>(vol.d), 1, 1, 1, 1};
    std::memcpy(hdr.data() + 40, dim, sizeof(dim));
    write_at<int16_t>(hdr, 70, kDtFloat32);
    write_at<int16_t>(hdr, 72, 32);  // bitpix
    float pixdim[8] = {1.0f, static_cast<float>(vol.spacing[0]),
                       static_cast<float>(vol.spacing[1]),
                       static_cast<float>(vol.spacing[2]), 0, 0, 0, 0};
    std::memcpy(hdr.data() + 76, pixdim, sizeof(pixdim));
    write_at<float>(hdr, 108, static_cast<float>(kDataOffset));
    write_at<float>(hdr, 112, 0.0f);  // scl_slope = 0: no rescaling on load
    write_at<float>(hdr, 116, 0.0f);
    const char descrip[] = "gusl";
    std::memcpy(hdr.data() + 148, descrip, sizeof(descrip));
    std::memcpy(hdr.data() + 344, "n+1\0", 4);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));

    std::vector<float> buf(vol.size());
    for (size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(vol.data[i]);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace gusl
