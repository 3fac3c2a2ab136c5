#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "spectrapad/band.hpp"
#include "spectrapad/checkpoint.hpp"
#include "spectrapad/dataset.hpp"
#include "spectrapad/ensemble.hpp"
#include "spectrapad/losses.hpp"
#include "spectrapad/metrics.hpp"
#include "spectrapad/optimizer.hpp"
#include "spectrapad/spectral_head.hpp"
#include "spectrapad/vit_encoder.hpp"

namespace spectrapad {

/// Components that an ablation run can remove, one at a time.
enum class Component { kSpe, kTokenFusion, kBalancedCe, kContrastive, kBandDropout, kFeatNorm };
inline constexpr std::array<Component, 6> kAllComponents = {Component::kSpe,         Component::kTokenFusion,
                                                            Component::kBalancedCe,  Component::kContrastive,
                                                            Component::kBandDropout, Component::kFeatNorm};

std::string to_string(Component c);
Component parse_component(const std::string& text);

struct Ablation {
  std::set<Component> removed;

  bool on(Component c) const { return removed.count(c) == 0; }
  /// "full", or "no_<component>" joined with '+'.
  std::string name() const;
  /// Comma-separated component names; empty text is the full model.
  static Ablation parse(const std::string& list);
  std::string to_list() const;
};

enum class ClassWeightForm { kNormalized, kInverseFrequency };

struct QcConfig {
  double threshold = 100.0;
  double saturation_limit = 0.05;
};

struct ProtocolConfig {
  int train_artefact = 1;
  std::vector<int> test_artefacts;  // empty: every other artefact in the dataset
  int epochs = 10;
  int batch_size = 32;
  AdamConfig adam;
  std::uint64_t seed = 7;
  Ablation ablation;
  bool augment = true;
  ClassWeightForm class_weight_form = ClassWeightForm::kNormalized;
  LossConfig loss;
  DropoutConstants dropout;
  QcConfig qc;
  ViTConfig model;
  BandSet bands = BandSet::all();  // bands that get a trained model
  ThresholdMode threshold_mode = ThresholdMode::kFixed;
  BandSet eval_bands = BandSet::all();  // fusion mask at evaluation
  int threads = 1;

  void validate() const;
  HeadOptions head_options() const;
};

/// Everything needed to score a sample: encoder, per-band heads, input
/// statistics and ensemble weights.
struct PadModel {
  ViTParams encoder;
  std::map<SpectralBand, BandHeadParams> heads;
  PerBand<BandStats> band_stats{};
  EnsembleWeights ensemble;
  double dev_threshold = kDecisionThreshold;
  BandSet bands;

  static PadModel create(const ProtocolConfig& cfg);

  Checkpoint to_checkpoint() const;
  /// Architecture comes from `cfg`; every tensor must be present.
  static PadModel from_checkpoint(const Checkpoint& ck, const ProtocolConfig& cfg);
};

struct LossTraceEntry {
  SpectralBand band = SpectralBand::k800;
  int epoch = 0;
  int step = 0;
  double ce = 0.0;
  double contrastive = 0.0;
  double total = 0.0;
};

struct BandTrainRecord {
  SpectralBand band = SpectralBand::k800;
  long long n_eff = 0;  // training images that passed quality control
  long long n_train[2] = {0, 0};
  long long n_dev = 0;
  double p_k = 0.0;
  ClassWeights weights;
  std::vector<double> dev_loss;  // index 0 = before training
  int selected_epoch = 0;
  double dev_accuracy = 0.0;
  std::vector<LossTraceEntry> trace;
};

struct AuditResult {
  bool identity_disjoint = true;
  std::size_t shared_identities = 0;
  std::size_t train_phase_test_reads = 0;
  std::size_t eval_phase_non_test_reads = 0;

  std::size_t violations() const {
    return shared_identities + train_phase_test_reads + eval_phase_non_test_reads + (identity_disjoint ? 0 : 1);
  }
};

/// Identities that appear in more than one split.
std::vector<std::string> shared_identities(const Dataset& data);

struct SampleScore {
  std::size_t index = 0;
  std::string sample_id;
  std::string identity_id;
  int label = 0;
  int artefact_id = 0;
  Prob2 p_ens{0.5, 0.5};
  BandSet bands_used;
  BandProbs band_probs{};
  PerBand<Eigen::RowVectorXd> features{};  // normalised per-band features (empty when not scored)
  Eigen::RowVectorXd fused_features;      // weight-averaged over bands_used
};

/// Fused scores for the given samples. Images failing quality control are
/// dropped per band; samples left without any band are reported in
/// `excluded`.
std::vector<SampleScore> score_samples(const PadModel& model, const Dataset& data, std::span<const std::size_t> indices,
                                       BandSet mask, const ProtocolConfig& cfg, std::vector<std::size_t>* excluded);

struct TrainOutput {
  PadModel model;
  std::vector<BandTrainRecord> bands;
};

/// Trains one band's final blocks and head on bona fide + train artefact.
BandTrainRecord train_band(PadModel& model, const Dataset& data, SpectralBand band, const ProtocolConfig& cfg);

/// All bands, then ensemble weights and the dev-calibrated threshold.
TrainOutput run_training(const Dataset& data, const ProtocolConfig& cfg);

struct EvalOutput {
  EvalReport report;
  ArtefactMetrics intra;
  std::vector<SampleScore> scores;  // test split, all scored samples
  std::size_t n_excluded = 0;
  std::vector<int> test_artefacts;
};

/// Scores the test split only.
EvalOutput run_evaluation(const PadModel& model, const Dataset& data, const ProtocolConfig& cfg);

struct RunRecord {
  std::uint64_t config_hash = 0;
  std::uint64_t dataset_hash = 0;
  std::vector<BandTrainRecord> bands;
  PadModel model;
  EvalOutput eval;
  AuditResult audit;
};

/// Train, round-trip the model through the checkpoint container, evaluate,
/// and audit split access for both phases.
RunRecord run_cross_artefact(const Dataset& data, const ProtocolConfig& cfg, std::uint64_t config_hash);

struct AblationRow {
  std::string name;
  Ablation ablation;
  RunRecord run;
  double dev_loss_selected = 0.0;  // sum over bands at the selected epoch
};

/// Full configuration first, then one run per removed component.
std::vector<AblationRow> run_ablation(const Dataset& data, const ProtocolConfig& cfg,
                                      const std::function<std::uint64_t(const ProtocolConfig&)>& hash_fn);

/// Test artefacts implied by the config and dataset contents.
std::vector<int> resolve_test_artefacts(const Dataset& data, const ProtocolConfig& cfg);

/// Worker count from SPECTRAPAD_THREADS, else hardware concurrency; at least 1.
int default_threads();

}  // namespace spectrapad
