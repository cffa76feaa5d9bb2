#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "volseg/volume.hpp"

namespace volseg {

enum class VolumeFormat { Nifti, NiftiGz, Raw };

/// Format implied by the file name: .nii, .nii.gz, or .vsraw.
VolumeFormat format_for_path(const std::filesystem::path& path);

/// Reads a NIfTI-1 single file (optionally gzip-compressed) or a raw fixture.
/// The format is detected from the content, not the extension.
LabelVolume load_volume(const std::filesystem::path& path);

/// Writes in the container format implied by the extension.
void write_volume(const LabelVolume& v, const std::filesystem::path& path);

/// In-memory codecs, used by the file functions and by tests that need to
/// craft malformed payloads.
LabelVolume decode_volume(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_nifti(const LabelVolume& v);
std::vector<std::uint8_t> encode_raw(const LabelVolume& v);

inline constexpr char kRawMagic[8] = {'V', 'S', 'E', 'G', 'R', 'A', 'W', '1'};
inline constexpr std::size_t kRawHeaderSize = 8 + 3 * 4 + 3 * 8 + 3 * 8;
inline constexpr std::size_t kNiftiHeaderSize = 348;

}  // namespace volseg
