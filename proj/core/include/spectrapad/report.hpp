#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "spectrapad/config.hpp"
#include "spectrapad/protocol.hpp"

namespace spectrapad {

inline constexpr const char* kResultsHeader = "train_artefact,test_artefact,mode,threshold,apcer,bpcer,hter,d_eer";

/// One row per tested artefact, then `mean` and `sd` aggregate rows. The sd
/// is taken across tested artefacts.
std::string results_csv(const EvalReport& report);
std::string intra_csv(const EvalReport& report, const ArtefactMetrics& intra);
std::string results_json(const EvalOutput& eval, const std::string& extra_json = "{}");

/// sample_id,identity_id,label,artefact_id,p_attack,bands_used
std::string scores_csv(const std::vector<SampleScore>& scores, int artefact);

std::string run_json(const RunRecord& run);
std::string audit_json(const AuditResult& audit);
std::string dev_loss_csv(const std::vector<BandTrainRecord>& bands);
std::string loss_trace_csv(const std::vector<BandTrainRecord>& bands);

/// Writes results.csv/json, intra.csv, scores/<artefact>.csv and
/// features/<band>.bin + features/fused.bin into `dir`.
void write_eval_outputs(const std::filesystem::path& dir, const EvalOutput& eval);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Pre-logit features of scored samples: tensors features.values (n x d),
/// features.label and features.artefact (n x 1).
struct FeatureTable {
  Mat values;
  std::vector<int> labels;
  std::vector<int> artefacts;
};
void write_features(const std::filesystem::path& path, const FeatureTable& table);
FeatureTable read_features(const std::filesystem::path& path);

}  // namespace spectrapad
