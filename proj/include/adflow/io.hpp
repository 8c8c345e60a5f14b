// SPDX-License-Identifier: Apache-2.0
//
// File formats:
//   WAV     16-bit PCM mono, little-endian RIFF. Amplitude kWavFullScale maps
//           to int16 full scale, so unit-RMS mixtures do not clip.
//   tensor  "ADFT" magic, u32 rank, u32 dims[rank], then row-major f32 data,
//           all little-endian.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "adflow/signal.hpp"

namespace adflow {

inline constexpr double kWavFullScale = 4.0;

void write_wav(const std::filesystem::path& path, const Waveform& w);
Waveform read_wav(const std::filesystem::path& path);

struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::size_t element_count() const;
};

void write_tensor(std::ostream& os, std::span<const std::uint32_t> dims,
                  std::span<const double> values);
Tensor read_tensor(std::istream& is);

void write_tensor_file(const std::filesystem::path& path, std::span<const std::uint32_t> dims,
                       std::span<const double> values);
Tensor read_tensor_file(const std::filesystem::path& path);

}  // namespace adflow
