#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "spectrapad/band.hpp"

namespace spectrapad {

enum class Label : int { kBonaFide = 0, kAttack = 1 };
enum class Split { kTrain, kDev, kTest };

const char* to_string(Split s);
Split parse_split(const std::string& s);

/// Grayscale image, row-major, nominally in [0,1].
class BandImage {
 public:
  BandImage() = default;
  BandImage(int height, int width, double fill = 0.0);
  BandImage(int height, int width, std::vector<double> pixels);

  int height() const { return height_; }
  int width() const { return width_; }
  bool empty() const { return pixels_.empty(); }

  double& at(int r, int c) { return pixels_[static_cast<std::size_t>(r) * width_ + c]; }
  double at(int r, int c) const { return pixels_[static_cast<std::size_t>(r) * width_ + c]; }

  std::span<double> pixels() { return pixels_; }
  std::span<const double> pixels() const { return pixels_; }

  friend bool operator==(const BandImage&, const BandImage&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> pixels_;
};

/// One capture event: up to five band images of the same eye.
struct SpectralSample {
  std::string sample_id;
  std::map<SpectralBand, BandImage> images;
  Label label = Label::kBonaFide;
  int artefact_id = 0;  // 0 = bona fide, 1..8 = PAI
  std::string identity_id;
  BandSet band_mask;
};

/// Throws a data error when mask/images or label/artefact disagree.
void validate(const SpectralSample& s);

struct BandStats {
  double mean = 0.0;
  double std = 1.0;
};

struct QualityReport {
  double laplacian_variance = 0.0;
  bool has_invalid_pixels = false;
  double saturation_fraction = 0.0;
  bool pass = false;
};

struct ManifestRecord {
  std::string file_path;
  SpectralBand band = SpectralBand::k800;
  Label label = Label::kBonaFide;
  int artefact_id = 0;
  std::string identity_id;
  Split split = Split::kTrain;
};

/// CSV manifest, header `path,band_nm,label,artefact_id,identity_id,split`.
struct DatasetManifest {
  std::vector<ManifestRecord> records;

  std::string to_csv() const;
  static DatasetManifest from_csv(const std::string& text);
  static DatasetManifest read(const std::filesystem::path& path);
  void write(const std::filesystem::path& path) const;

  /// (path, band) pairs unique; label/artefact consistent.
  void validate() const;
};

/// Records of one capture event share this key: the path with its
/// `_<band_nm>` stem suffix and extension removed.
std::string sample_key(const std::string& file_path);

inline constexpr double kSaturationLevel = 0.995;
inline constexpr double kStatsFloor = 1e-8;

/// Variance of the 4-neighbour Laplacian response over the valid region,
/// computed on pixels scaled to [0,255].
double laplacian_variance(const BandImage& image);

QualityReport quality_filter(const BandImage& image, double threshold = 100.0, double sat_limit = 0.05);

/// 3 x side x side, channel-major. All three channels are identical.
struct ModelInput {
  int side = 0;
  std::vector<double> data;

  double at(int c, int r, int col) const {
    return data[(static_cast<std::size_t>(c) * side + r) * side + col];
  }
};

/// Half-pixel-centre bilinear resampling with edge clamping.
BandImage resize_bilinear(const BandImage& image, int height, int width);

ModelInput to_model_input(const BandImage& image, const BandStats& stats, int side);

/// Global pixel mean and population std over all images, std floored at 1e-8.
BandStats compute_band_stats(std::span<const BandImage* const> images);
BandStats compute_band_stats(std::span<const BandImage> images);

struct SplitFractions {
  double train = 0.55;
  double dev = 0.15;
  double test = 0.30;
};

/// Assigns every identity to exactly one split. Identities are grouped by the
/// smallest artefact id they appear under (bona fide = 0) and each group is
/// split with largest-remainder rounding, so every group's split sizes are
/// within one identity of the target fractions.
DatasetManifest partition_identity_disjoint(DatasetManifest manifest, SplitFractions fractions,
                                            std::uint64_t seed);

struct AugmentParams {
  double rotation_deg = 0.0;
  bool flip = false;
  double translate_x = 0.0;  // fraction of width
  double translate_y = 0.0;  // fraction of height
  double scale = 1.0;
};

inline constexpr double kMaxRotationDeg = 5.0;
inline constexpr double kMaxTranslate = 0.05;
inline constexpr double kMinScale = 0.95;
inline constexpr double kMaxScale = 1.05;

AugmentParams draw_augment_params(std::uint64_t seed);

/// Geometric warp only: flip, then rotate+scale about the centre, then
/// translate. Bilinear sampling with edge replication, clamped to [0,1].
BandImage apply_augment(const BandImage& image, const AugmentParams& params);

BandImage augment(const BandImage& image, std::uint64_t seed);

struct SynthConfig {
  int side = 32;
  int bona_fide_samples = 400;
  int bona_fide_identities = 40;
  std::array<int, 8> attack_samples = {200, 200, 200, 200, 200, 200, 200, 200};
  std::array<int, 8> attack_identities = {6, 6, 6, 6, 6, 6, 20, 20};
  /// Relative NIR reflectance of bona fide iris tissue per band (800..980 nm).
  std::array<double, kNumBands> reflectance = {0.62, 0.68, 0.74, 0.80, 0.92};
  double noise_std = 0.02;
  /// Fraction of (sample, band) frames replaced by an LED-switching artefact
  /// (saturated frame) so quality control has something to reject.
  double corrupt_fraction = 0.01;
  SplitFractions fractions;

  std::size_t total_samples() const;
};

struct SynthDataset {
  std::vector<SpectralSample> samples;
  DatasetManifest manifest;
};

/// Deterministic in (config, seed). Images are quantized to 16-bit levels so
/// that a PGM round trip is exact.
SynthDataset synth_generate(const SynthConfig& config, std::uint64_t seed);

}  // namespace spectrapad
