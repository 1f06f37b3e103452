#include "pdac/io/nifti.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <vector>

namespace pdac::io {
namespace {

// The NIfTI-1 header fields this reader cares about, at their fixed offsets
// within the 348-byte header.
constexpr int kHeaderSize = 348;
constexpr int kOffDim = 40;        // short dim[8]
constexpr int kOffDatatype = 70;   // short
constexpr int kOffPixdim = 76;     // float pixdim[8]
constexpr int kOffVoxOffset = 108; // float
constexpr int kOffSclSlope = 112;  // float
constexpr int kOffSclInter = 116;  // float
constexpr int kOffQformCode = 252; // short
constexpr int kOffQoffsetX = 268;  // float x,y,z
constexpr int kOffMagic = 344;     // char[4], "n+1"

enum Datatype : std::int16_t {
  kUint8 = 2,
  kInt16 = 4,
  kInt32 = 8,
  kFloat32 = 16,
  kFloat64 = 64,
  kUint16 = 512,
};

template <typename T>
T get(const std::vector<char>& h, int off) {
  T v;
  std::memcpy(&v, h.data() + off, sizeof(T));
  return v;
}

template <typename T>
void put(std::vector<char>& h, int off, T v) {
  std::memcpy(h.data() + off, &v, sizeof(T));
}

std::vector<char> read_all_maybe_gz(const std::string& path) {
  if (!std::filesystem::exists(path))
    throw MissingFileError("nifti: file not found: " + path);
  gzFile f = gzopen(path.c_str(), "rb");  // reads plain files too
  if (!f) throw FormatError("nifti: cannot open " + path);
  std::vector<char> buf;
  char chunk[1 << 16];
  int n;
  while ((n = gzread(f, chunk, sizeof(chunk))) > 0)
    buf.insert(buf.end(), chunk, chunk + n);
  const bool bad = n < 0;
  gzclose(f);
  if (bad) throw FormatError("nifti: decompression failed for " + path);
  return buf;
}

template <typename T>
void decode_voxels(const std::vector<char>& raw, std::size_t off,
                   std::size_t count, float slope, float inter,
                   std::vector<float>& out) {
  if (off + count * sizeof(T) > raw.size())
    throw FormatError("nifti: voxel data truncated");
  out.resize(count);
  const char* p = raw.data() + off;
  for (std::size_t i = 0; i < count; ++i) {
    T v;
    std::memcpy(&v, p + i * sizeof(T), sizeof(T));
    out[i] = slope * static_cast<float>(v) + inter;
  }
}

struct Decoded {
  Index3 shape;
  std::array<double, 3> spacing;
  std::array<double, 3> origin;
  std::vector<float> data;
};

Decoded read_decoded(const std::string& path) {
  const std::vector<char> raw = read_all_maybe_gz(path);
  if (raw.size() < kHeaderSize)
    throw FormatError("nifti: file too small: " + path);
  std::vector<char> h(raw.begin(), raw.begin() + kHeaderSize);
  if (get<std::int32_t>(h, 0) != kHeaderSize)
    throw FormatError("nifti: bad sizeof_hdr in " + path);
  const char* magic = h.data() + kOffMagic;
  if (std::strncmp(magic, "n+1", 3) != 0)
    throw FormatError("nifti: unsupported magic in " + path);

  std::int16_t dim[8];
  std::memcpy(dim, h.data() + kOffDim, sizeof(dim));
  if (dim[0] != 3 && !(dim[0] == 4 && dim[4] == 1))
    throw FormatError("nifti: only 3-D images supported: " + path);
  const std::int64_t X = dim[1], Y = dim[2], Z = dim[3];
  if (X < 1 || Y < 1 || Z < 1)
    throw FormatError("nifti: invalid dimensions in " + path);

  float pixdim[8];
  std::memcpy(pixdim, h.data() + kOffPixdim, sizeof(pixdim));
  float slope = get<float>(h, kOffSclSlope);
  const float inter = get<float>(h, kOffSclInter);
  if (slope == 0.0f || !std::isfinite(slope)) slope = 1.0f;

  Decoded d;
  d.shape = {Z, Y, X};
  d.spacing = {pixdim[3] > 0 ? pixdim[3] : 1.0, pixdim[2] > 0 ? pixdim[2] : 1.0,
               pixdim[1] > 0 ? pixdim[1] : 1.0};
  d.origin = {0, 0, 0};
  if (get<std::int16_t>(h, kOffQformCode) > 0) {
    d.origin = {get<float>(h, kOffQoffsetX + 8),
                get<float>(h, kOffQoffsetX + 4), get<float>(h, kOffQoffsetX)};
  }

  const auto vox_offset =
      static_cast<std::size_t>(get<float>(h, kOffVoxOffset));
  const std::size_t count = static_cast<std::size_t>(X * Y * Z);
  const auto dtype = get<std::int16_t>(h, kOffDatatype);
  switch (dtype) {
    case kUint8:
      decode_voxels<std::uint8_t>(raw, vox_offset, count, slope, inter, d.data);
      break;
    case kInt16:
      decode_voxels<std::int16_t>(raw, vox_offset, count, slope, inter, d.data);
      break;
    case kUint16:
      decode_voxels<std::uint16_t>(raw, vox_offset, count, slope, inter,
                                   d.data);
      break;
    case kInt32:
      decode_voxels<std::int32_t>(raw, vox_offset, count, slope, inter, d.data);
      break;
    case kFloat32:
      decode_voxels<float>(raw, vox_offset, count, slope, inter, d.data);
      break;
    case kFloat64:
      decode_voxels<double>(raw, vox_offset, count, slope, inter, d.data);
      break;
    default:
      throw FormatError("nifti: unsupported datatype " + std::to_string(dtype) +
                        " in " + path);
  }
  return d;
}

std::vector<char> make_header(Index3 shape, const std::array<double, 3>& spacing,
                              const std::array<double, 3>& origin,
                              std::int16_t datatype, std::int16_t bitpix) {
  std::vector<char> h(kHeaderSize, 0);
  put<std::int32_t>(h, 0, kHeaderSize);
  std::int16_t dim[8] = {3,
                         static_cast<std::int16_t>(shape[2]),
                         static_cast<std::int16_t>(shape[1]),
                         static_cast<std::int16_t>(shape[0]),
                         1,
                         1,
                         1,
                         1};
  std::memcpy(h.data() + kOffDim, dim, sizeof(dim));
  put<std::int16_t>(h, kOffDatatype, datatype);
  put<std::int16_t>(h, 72, bitpix);
  float pixdim[8] = {1.0f,
                     static_cast<float>(spacing[2]),
                     static_cast<float>(spacing[1]),
                     static_cast<float>(spacing[0]),
                     1.0f,
                     1.0f,
                     1.0f,
                     1.0f};
  std::memcpy(h.data() + kOffPixdim, pixdim, sizeof(pixdim));
  put<float>(h, kOffVoxOffset, 352.0f);
  put<float>(h, kOffSclSlope, 1.0f);
  put<float>(h, kOffSclInter, 0.0f);
  put<std::int16_t>(h, kOffQformCode, 1);
  put<float>(h, kOffQoffsetX, static_cast<float>(origin[2]));
  put<float>(h, kOffQoffsetX + 4, static_cast<float>(origin[1]));
  put<float>(h, kOffQoffsetX + 8, static_cast<float>(origin[0]));
  std::memcpy(h.data() + kOffMagic, "n+1", 4);
  h.resize(352, 0);  // 4 bytes extension flag, all zero
  return h;
}

void write_all_maybe_gz(const std::string& path, const std::vector<char>& buf) {
  const bool gz = path.size() > 3 && path.substr(path.size() - 3) == ".gz";
  if (gz) {
    gzFile f = gzopen(path.c_str(), "wb");
    if (!f) throw FormatError("nifti: cannot write " + path);
    const int n = gzwrite(f, buf.data(), static_cast<unsigned>(buf.size()));
    gzclose(f);
    if (n != static_cast<int>(buf.size()))
      throw FormatError("nifti: write failed for " + path);
  } else {
    FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw FormatError("nifti: cannot write " + path);
    const std::size_t n = std::fwrite(buf.data(), 1, buf.size(), f);
    std::fclose(f);
    if (n != buf.size()) throw FormatError("nifti: write failed for " + path);
  }
}

}  // namespace

Volume read_nifti_volume(const std::string& path) {
  Decoded d = read_decoded(path);
  Volume v(d.shape);
  v.spacing = d.spacing;
  v.origin = d.origin;
  v.data = std::move(d.data);
  return v;
}

LabelMask read_nifti_mask(const std::string& path) {
  Decoded d = read_decoded(path);
  LabelMask m(d.shape);
  for (std::size_t i = 0; i < d.data.size(); ++i) {
    const auto v = static_cast<std::int64_t>(std::lround(d.data[i]));
    if (v < 0 || v >= LabelMask::kNumClasses)
      throw FormatError("nifti: label value " + std::to_string(v) +
                        " out of class range in " + path);
    m.data[i] = static_cast<std::uint8_t>(v);
  }
  return m;
}

void write_nifti_volume(const std::string& path, const Volume& v) {
  std::vector<char> buf = make_header(v.shape, v.spacing, v.origin, kFloat32, 32);
  const char* p = reinterpret_cast<const char*>(v.data.data());
  buf.insert(buf.end(), p, p + sizeof(float) * v.data.size());
  write_all_maybe_gz(path, buf);
}

void write_nifti_mask(const std::string& path, const LabelMask& m,
                      const std::array<double, 3>& spacing) {
  std::vector<char> buf = make_header(m.shape, spacing, {0, 0, 0}, kUint8, 8);
  const char* p = reinterpret_cast<const char*>(m.data.data());
  buf.insert(buf.end(), p, p + m.data.size());
  write_all_maybe_gz(path, buf);
}

}  // namespace pdac::io
