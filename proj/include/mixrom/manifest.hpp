#pragma once

#include "mixrom/field.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mixrom {

/// One snapshot file registered in a dataset manifest.
struct ManifestEntry {
    std::string model_tag; // "SA", "kEpsilon", ..., or "reference"
    std::string split;     // "train" or "test"
    ParameterVector params;
    std::string path;      // relative to the manifest file
};

/// Dataset manifest: snapshot paths grouped by model tag and split.
/// Written by synth-generate, consumed by the pipelines and the CLI.
struct DatasetManifest {
    std::string quantity = "Ux";
    std::vector<std::string> param_names;
    std::vector<ManifestEntry> entries;
    std::string base_dir; // directory of the manifest file, set on load

    std::vector<std::string> model_tags() const; // distinct non-reference tags, stable order
    std::vector<const ManifestEntry*> select(const std::string& tag,
                                             const std::string& split) const;
    const ManifestEntry* find_reference(const ParameterVector& params) const;
    std::string resolve(const std::string& rel_path) const;
};

void save_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

} // namespace mixrom
