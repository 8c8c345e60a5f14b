// SPDX-License-Identifier: Apache-2.0
#include "adflow/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "adflow/errors.hpp"

namespace adflow {

namespace {

void put_u16(std::ostream& os, std::uint16_t v) {
  const char bytes[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  os.write(bytes, 2);
}

void put_u32(std::ostream& os, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                         static_cast<char>((v >> 16) & 0xff),
                         static_cast<char>((v >> 24) & 0xff)};
  os.write(bytes, 4);
}

std::uint32_t get_u32(std::istream& is, const char* what) {
  unsigned char bytes[4];
  if (!is.read(reinterpret_cast<char*>(bytes), 4)) {
    throw IoError(std::string("unexpected end of file reading ") + what);
  }
  return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
         (static_cast<std::uint32_t>(bytes[2]) << 16) |
         (static_cast<std::uint32_t>(bytes[3]) << 24);
}

std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  const auto n = static_cast<std::uint32_t>(w.size());
  const std::uint32_t data_bytes = n * 2;
  const auto rate = static_cast<std::uint32_t>(w.sample_rate_hz());
  os.write("RIFF", 4);
  put_u32(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  put_u32(os, 16);
  put_u16(os, 1);  // PCM
  put_u16(os, 1);  // mono
  put_u32(os, rate);
  put_u32(os, rate * 2);
  put_u16(os, 2);
  put_u16(os, 16);
  os.write("data", 4);
  put_u32(os, data_bytes);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double scaled = std::round(w[i] / kWavFullScale * 32767.0);
    const auto q = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
    put_u16(os, static_cast<std::uint16_t>(q));
  }
  if (!os) {
    throw IoError("failed writing " + path.string());
  }
}

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw IoError("cannot open " + path.string());
  }
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw IoError(path.string() + ": not a RIFF/WAVE file");
  }
  bool have_fmt = false;
  std::uint32_t rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) {
      throw IoError(path.string() + ": truncated chunk");
    }
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw IoError(path.string() + ": short fmt chunk");
      const unsigned char* f = bytes.data() + body;
      if (le16(f) != 1) throw IoError(path.string() + ": only PCM is supported");
      if (le16(f + 2) != 1) throw IoError(path.string() + ": only mono is supported");
      if (le16(f + 14) != 16) throw IoError(path.string() + ": only 16-bit samples are supported");
      rate = le32(f + 4);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw IoError(path.string() + ": data chunk before fmt chunk");
      if (rate == 0) throw IoError(path.string() + ": zero sample rate");
      const std::size_t n = size / 2;
      if (n == 0) throw IoError(path.string() + ": empty data chunk");
      std::vector<double> samples(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto raw = static_cast<std::int16_t>(le16(bytes.data() + body + 2 * i));
        samples[i] = raw / 32767.0 * kWavFullScale;
      }
      return Waveform(std::move(samples), static_cast<int>(rate));
    }
    pos = body + size + (size & 1);
  }
  throw IoError(path.string() + ": no data chunk");
}

std::size_t Tensor::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

void write_tensor(std::ostream& os, std::span<const std::uint32_t> dims,
                  std::span<const double> values) {
  std::size_t expected = 1;
  for (auto d : dims) expected *= d;
  if (expected != values.size()) {
    throw ShapeError("tensor dims do not match value count");
  }
  os.write("ADFT", 4);
  put_u32(os, static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims) put_u32(os, d);
  for (double v : values) {
    put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  if (!os) {
    throw IoError("failed writing tensor");
  }
}

Tensor read_tensor(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "ADFT", 4) != 0) {
    throw IoError("bad tensor magic");
  }
  Tensor t;
  const std::uint32_t rank = get_u32(is, "tensor rank");
  if (rank > 8) throw IoError("implausible tensor rank " + std::to_string(rank));
  t.dims.resize(rank);
  for (auto& d : t.dims) d = get_u32(is, "tensor dims");
  t.data.resize(t.element_count());
  for (auto& v : t.data) v = std::bit_cast<float>(get_u32(is, "tensor data"));
  return t;
}

void write_tensor_file(const std::filesystem::path& path, std::span<const std::uint32_t> dims,
                       std::span<const double> values) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_tensor(os, dims, values);
}

Tensor read_tensor_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return read_tensor(is);
}

}  // namespace adflow
