#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "dgtta/volume.hpp"

namespace dgtta {

// Two on-disk formats are supported, chosen by extension:
//   *.nii / *.nii.gz    NIfTI-1 single file, optionally gzip-compressed
//   anything else       raw pair <stem>.bin (little-endian payload, canonical
//                       (channel, z, y, x) order) + <stem>.meta text sidecar
// The raw path may be given as the stem, the .bin or the .meta file.

void save_volume(const Volume& v, const std::filesystem::path& path);
Volume load_volume(const std::filesystem::path& path);

/// Raw label maps use dtype int32 and record num_classes in the sidecar.
void save_labels(const LabelMap& l, const std::filesystem::path& path);

/// `num_classes` of 0 means: take it from the sidecar, or max label + 1 for NIfTI.
LabelMap load_labels(const std::filesystem::path& path, int num_classes = 0);

bool is_nifti_path(const std::filesystem::path& path);

/// Resolves "<stem>", "<stem>.bin" or "<stem>.meta" to the sidecar path.
std::filesystem::path raw_meta_path(const std::filesystem::path& path);
std::filesystem::path raw_bin_path(const std::filesystem::path& path);

/// Parses "key = value" lines; '#' starts a comment. Used for every plain-text
/// sidecar and manifest in the project.
std::map<std::string, std::string> read_key_values(const std::filesystem::path& path);

}  // namespace dgtta
