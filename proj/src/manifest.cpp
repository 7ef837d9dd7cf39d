#include "mixrom/manifest.hpp"
#include "mixrom/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace mixrom {

using nlohmann::json;

std::vector<std::string> DatasetManifest::model_tags() const {
    std::vector<std::string> tags;
    for (const auto& e : entries) {
        if (e.model_tag == "reference") continue;
        if (std::find(tags.begin(), tags.end(), e.model_tag) == tags.end()) {
            tags.push_back(e.model_tag);
        }
    }
    return tags;
}

std::vector<const ManifestEntry*> DatasetManifest::select(const std::string& tag,
                                                          const std::string& split) const {
    std::vector<const ManifestEntry*> out;
    for (const auto& e : entries) {
        if (e.model_tag == tag && e.split == split) out.push_back(&e);
    }
    return out;
}

const ManifestEntry* DatasetManifest::find_reference(const ParameterVector& params) const {
    for (const auto& e : entries) {
        if (e.model_tag == "reference" && e.params.same_values(params)) return &e;
    }
    return nullptr;
}

std::string DatasetManifest::resolve(const std::string& rel_path) const {
    if (base_dir.empty()) return rel_path;
    return (std::filesystem::path(base_dir) / rel_path).string();
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
    json j;
    j["version"] = 1;
    j["quantity"] = m.quantity;
    j["param_names"] = m.param_names;
    json snaps = json::array();
    for (const auto& e : m.entries) {
        json je;
        je["model_tag"] = e.model_tag;
        je["split"] = e.split;
        je["params"] = std::vector<double>(e.params.values.data(),
                                           e.params.values.data() + e.params.size());
        je["path"] = e.path;
        snaps.push_back(std::move(je));
    }
    j["snapshots"] = std::move(snaps);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << j.dump(2) << "\n";
    if (!out) throw IoError("write failed on '" + path + "'");
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ManifestError("cannot open manifest '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ManifestError("malformed manifest '" + path + "': " + e.what());
    }
    if (!j.is_object() || !j.contains("version") || j["version"] != 1) {
        throw ManifestError("'" + path + "': missing or unsupported manifest version");
    }
    DatasetManifest m;
    try {
        m.quantity = j.at("quantity").get<std::string>();
        m.param_names = j.at("param_names").get<std::vector<std::string>>();
        for (const auto& je : j.at("snapshots")) {
            ManifestEntry e;
            e.model_tag = je.at("model_tag").get<std::string>();
            e.split = je.at("split").get<std::string>();
            auto vals = je.at("params").get<std::vector<double>>();
            if (vals.size() != m.param_names.size()) {
                throw ManifestError("'" + path + "': entry param count " +
                                    std::to_string(vals.size()) + " does not match param_names");
            }
            e.params.names = m.param_names;
            e.params.values = Eigen::Map<Eigen::VectorXd>(vals.data(),
                                                          static_cast<Eigen::Index>(vals.size()));
            for (double v : e.params.values) {
                if (!std::isfinite(v)) {
                    throw ManifestError("'" + path + "': non-finite parameter value");
                }
            }
            if (e.split != "train" && e.split != "test") {
                throw ManifestError("'" + path + "': unknown split '" + e.split + "'");
            }
            e.path = je.at("path").get<std::string>();
            m.entries.push_back(std::move(e));
        }
    } catch (const json::exception& e) {
        throw ManifestError("'" + path + "': " + e.what());
    }
    m.base_dir = std::filesystem::path(path).parent_path().string();
    return m;
}

} // namespace mixrom
