#include "spectrapad/dataset.hpp"

#include <map>

#include "spectrapad/error.hpp"
#include "spectrapad/image_io.hpp"
#include "spectrapad/rng.hpp"

namespace spectrapad {

void AccessLog::record(const std::string& path, Split split) {
  std::lock_guard lock(mu_);
  entries_.push_back({path, split});
}

std::vector<AccessEntry> AccessLog::entries() const {
  std::lock_guard lock(mu_);
  return entries_;
}

std::size_t AccessLog::count(Split split) const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.split == split;
  return n;
}

void AccessLog::clear() {
  std::lock_guard lock(mu_);
  entries_.clear();
}

Dataset::Dataset() : mu_(std::make_unique<std::mutex>()), log_(std::make_unique<AccessLog>()) {}
Dataset::Dataset(Dataset&&) noexcept = default;
Dataset& Dataset::operator=(Dataset&&) noexcept = default;
Dataset::~Dataset() = default;

void Dataset::build_index() {
  manifest_.validate();
  std::map<std::string, std::size_t> by_key;
  for (const auto& r : manifest_.records) {
    const std::string key = sample_key(r.file_path);
    auto [it, inserted] = by_key.emplace(key, infos_.size());
    if (inserted) {
      SampleInfo info;
      info.sample_id = key;
      info.label = r.label;
      info.artefact_id = r.artefact_id;
      info.identity_id = r.identity_id;
      info.split = r.split;
      infos_.push_back(std::move(info));
    }
    SampleInfo& info = infos_[it->second];
    require(info.artefact_id == r.artefact_id && info.identity_id == r.identity_id && info.split == r.split,
            ErrorKind::kData, "manifest: records of sample " + key + " disagree on label, identity or split");
    require(!info.available.contains(r.band), ErrorKind::kData,
            "manifest: sample " + key + " lists band " + band_name(r.band) + " twice");
    info.available.insert(r.band);
    info.paths[band_index(r.band)] = r.file_path;
  }
  images_.resize(infos_.size() * kNumBands);
  hash_ = fnv1a64(manifest_.to_csv(), hash_ == 0 ? 0xcbf29ce484222325ULL : hash_);
}

Dataset Dataset::from_synth(SynthDataset data, std::uint64_t source_hash) {
  Dataset ds;
  ds.in_memory_ = true;
  ds.manifest_ = std::move(data.manifest);
  ds.hash_ = mix64(source_hash);
  ds.build_index();
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ds.infos_.size(); ++i) index.emplace(ds.infos_[i].sample_id, i);
  for (auto& s : data.samples) {
    validate(s);
    for (auto& [band, img] : s.images) {
      const std::string key = s.artefact_id == 0 ? "bf" : "a" + std::to_string(s.artefact_id);
      const auto it = index.find(key + "/" + s.identity_id + "/" + s.sample_id);
      require(it != index.end(), ErrorKind::kData, "synth sample " + s.sample_id + " missing from manifest");
      ds.images_[it->second * kNumBands + band_index(band)] = std::make_unique<BandImage>(std::move(img));
    }
  }
  return ds;
}

Dataset Dataset::from_manifest(DatasetManifest manifest, std::filesystem::path root) {
  Dataset ds;
  ds.manifest_ = std::move(manifest);
  ds.root_ = std::move(root);
  ds.build_index();
  return ds;
}

const BandImage& Dataset::image(std::size_t i, SpectralBand band) const {
  require(i < infos_.size(), ErrorKind::kData, "dataset: sample index out of range");
  const SampleInfo& info = infos_[i];
  require(info.available.contains(band), ErrorKind::kData,
          "dataset: sample " + info.sample_id + " has no band " + band_name(band));
  const std::string& path = info.paths[band_index(band)];
  log_->record(path, info.split);
  auto& slot = images_[i * kNumBands + band_index(band)];
  if (in_memory_) {
    require(slot != nullptr, ErrorKind::kData, "dataset: image missing for " + path);
    return *slot;
  }
  std::lock_guard lock(*mu_);
  if (!slot) slot = std::make_unique<BandImage>(read_image(root_ / path));
  return *slot;
}

std::vector<std::size_t> Dataset::select(const std::function<bool(const SampleInfo&)>& pred) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < infos_.size(); ++i)
    if (pred(infos_[i])) out.push_back(i);
  return out;
}

}  // namespace spectrapad
