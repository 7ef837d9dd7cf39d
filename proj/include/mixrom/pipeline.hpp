#pragma once

#include "mixrom/aggregation.hpp"
#include "mixrom/manifest.hpp"
#include "mixrom/rom.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mixrom {

enum class PipelineKind { MFR, MR };
enum class WeightingKind { Knn, Ann };

PipelineKind pipeline_kind_from_string(const std::string& s);
WeightingKind weighting_kind_from_string(const std::string& s);
std::string to_string(PipelineKind k);
std::string to_string(WeightingKind k);

struct PipelineConfig {
    PipelineKind kind = PipelineKind::MFR;
    WeightingKind weighting = WeightingKind::Knn;
    RomSettings rom;
    EwaConfig ewa;
    int knn_k = 4;
    AnnWeightSettings ann;
    std::uint64_t seed = 0;
    std::string config_hash; // provenance, computed by the CLI from its config
};

struct Provenance {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string builder = "mixrom 0.1.0";
};

/// A trained MFR or MR pipeline: everything needed for online prediction.
/// MFR carries one ROM trained on aggregated snapshots; MR carries one ROM
/// per component model plus the weight model evaluated online.
struct SurrogateModel {
    PipelineKind kind = PipelineKind::MFR;
    WeightingKind weighting = WeightingKind::Knn;
    std::vector<std::string> model_tags;
    MeshPtr mesh;
    std::string quantity = "Ux";
    std::vector<ParameterVector> train_params;
    std::vector<Rom> roms;
    std::optional<KnnWeightModel> knn;
    std::optional<AnnWeightModel> ann;
    Provenance provenance;
};

/// Offline-phase diagnostics for the build log.
struct BuildInfo {
    SigmaSelection sigma;
    std::vector<std::pair<ParameterVector, WeightField>> train_weights;
    std::vector<FieldSnapshot> aggregated_snapshots; // MFR only
    std::vector<ReconstructionReport> rom_reports;
    AnnTrainReport ann_report;
    int inferred_snapshot_count = 0; // aggregated via weight-model inference
    double build_seconds = 0.0;
};

struct BuildResult {
    SurrogateModel model;
    BuildInfo info;
};

BuildResult build_mfr(const DatasetManifest& manifest, const PipelineConfig& cfg);
BuildResult build_mr(const DatasetManifest& manifest, const PipelineConfig& cfg);
BuildResult build_pipeline(const DatasetManifest& manifest, const PipelineConfig& cfg);

/// Online prediction from the pre-trained bundle alone; no dataset or
/// reference access. A mesh with the training dof count may be supplied to
/// attach the proper test-geometry coordinates (and to evaluate the ANN
/// weights at those coordinates); by default the training mesh is used.
FieldSnapshot predict(const SurrogateModel& model, const ParameterVector& mu,
                      const MeshPtr& mesh = nullptr);

/// Bundle persistence (magic "MMIX"); round-trips bit-exactly.
void save_surrogate(const SurrogateModel& model, const std::string& path);
SurrogateModel load_surrogate(const std::string& path);

} // namespace mixrom
