#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "spectrapad/spectral_data.hpp"

namespace spectrapad {

/// Capture-level view of manifest records that share a sample key.
struct SampleInfo {
  std::string sample_id;
  Label label = Label::kBonaFide;
  int artefact_id = 0;
  std::string identity_id;
  Split split = Split::kTrain;
  BandSet available;
  PerBand<std::string> paths;
};

struct AccessEntry {
  std::string path;
  Split split;
};

/// Every image read through a Dataset is recorded here so that protocol
/// phases can be audited for split leakage.
class AccessLog {
 public:
  void record(const std::string& path, Split split);
  std::vector<AccessEntry> entries() const;
  std::size_t count(Split split) const;
  void clear();

 private:
  mutable std::mutex mu_;
  std::vector<AccessEntry> entries_;
};

class Dataset {
 public:
  /// In-memory dataset; `source_hash` identifies the generator settings.
  static Dataset from_synth(SynthDataset data, std::uint64_t source_hash);
  /// Images are loaded lazily from `root / record.file_path`.
  static Dataset from_manifest(DatasetManifest manifest, std::filesystem::path root);

  Dataset(Dataset&&) noexcept;
  Dataset& operator=(Dataset&&) noexcept;
  ~Dataset();

  std::size_t size() const { return infos_.size(); }
  const SampleInfo& info(std::size_t i) const { return infos_[i]; }
  const DatasetManifest& manifest() const { return manifest_; }

  /// Logs the access; thread-safe.
  const BandImage& image(std::size_t i, SpectralBand band) const;

  std::vector<std::size_t> select(const std::function<bool(const SampleInfo&)>& pred) const;

  /// Hash of the manifest text and source descriptor.
  std::uint64_t hash() const { return hash_; }

  AccessLog& access_log() const { return *log_; }

 private:
  Dataset();
  void build_index();

  DatasetManifest manifest_;
  std::vector<SampleInfo> infos_;
  std::filesystem::path root_;
  bool in_memory_ = false;
  // one slot per (sample, band); populated eagerly (synth) or lazily (disk)
  mutable std::vector<std::unique_ptr<BandImage>> images_;
  std::unique_ptr<std::mutex> mu_;
  std::unique_ptr<AccessLog> log_;
  std::uint64_t hash_ = 0;
};

}  // namespace spectrapad
