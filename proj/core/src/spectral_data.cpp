#include "spectrapad/spectral_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

#include "spectrapad/csv.hpp"
#include "spectrapad/error.hpp"
#include "spectrapad/rng.hpp"

namespace spectrapad {

const char* to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "train";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "dev") return Split::kDev;
  if (s == "test") return Split::kTest;
  fail(ErrorKind::kData, "unknown split '" + s + "'");
}

BandImage::BandImage(int height, int width, double fill)
    : height_(height), width_(width), pixels_(static_cast<std::size_t>(height) * width, fill) {
  require(height >= 0 && width >= 0, ErrorKind::kDimension, "negative image size");
}

BandImage::BandImage(int height, int width, std::vector<double> pixels)
    : height_(height), width_(width), pixels_(std::move(pixels)) {
  require(height >= 0 && width >= 0 &&
              pixels_.size() == static_cast<std::size_t>(height) * static_cast<std::size_t>(width),
          ErrorKind::kDimension, "pixel count does not match image size");
}

void validate(const SpectralSample& s) {
  for (auto b : s.band_mask.bands())
    require(s.images.contains(b), ErrorKind::kData,
            "sample " + s.sample_id + ": band " + band_name(b) + " in mask but has no image");
  const bool bona = s.label == Label::kBonaFide;
  require(bona == (s.artefact_id == 0), ErrorKind::kData,
          "sample " + s.sample_id + ": label and artefact id disagree");
  require(s.artefact_id >= 0 && s.artefact_id <= 8, ErrorKind::kData,
          "sample " + s.sample_id + ": artefact id out of range");
}

// ---------------------------------------------------------------- manifest

std::string DatasetManifest::to_csv() const {
  std::string out = "path,band_nm,label,artefact_id,identity_id,split\n";
  for (const auto& r : records) {
    out += csv_field(r.file_path);
    out += ',' + band_name(r.band);
    out += ',' + std::to_string(static_cast<int>(r.label));
    out += ',' + std::to_string(r.artefact_id);
    out += ',' + csv_field(r.identity_id);
    out += ',';
    out += to_string(r.split);
    out += '\n';
  }
  return out;
}

DatasetManifest DatasetManifest::from_csv(const std::string& text) {
  auto rows = parse_csv(text);
  require(!rows.empty(), ErrorKind::kData, "manifest: missing header");
  const std::vector<std::string> header = {"path", "band_nm", "label", "artefact_id", "identity_id", "split"};
  require(rows.front() == header, ErrorKind::kData, "manifest: unexpected header");
  DatasetManifest m;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() == 1 && row[0].empty()) continue;
    require(row.size() == 6, ErrorKind::kData, "manifest line " + std::to_string(i + 1) + ": expected 6 fields");
    ManifestRecord r;
    r.file_path = row[0];
    int nm = 0, label = 0, art = 0;
    try {
      nm = std::stoi(row[1]);
      label = std::stoi(row[2]);
      art = std::stoi(row[3]);
    } catch (const std::exception&) {
      fail(ErrorKind::kData, "manifest line " + std::to_string(i + 1) + ": bad integer field");
    }
    auto band = band_from_nm(nm);
    require(band.has_value(), ErrorKind::kData, "manifest: unknown band " + row[1]);
    require(label == 0 || label == 1, ErrorKind::kData, "manifest: label must be 0 or 1");
    r.band = *band;
    r.label = static_cast<Label>(label);
    r.artefact_id = art;
    r.identity_id = row[4];
    r.split = parse_split(row[5]);
    m.records.push_back(std::move(r));
  }
  m.validate();
  return m;
}

DatasetManifest DatasetManifest::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::kIo, "cannot open manifest " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_csv(ss.str());
}

void DatasetManifest::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::kIo, "cannot write manifest " + path.string());
  out << to_csv();
  require(static_cast<bool>(out), ErrorKind::kIo, "write failed for " + path.string());
}

void DatasetManifest::validate() const {
  std::set<std::pair<std::string, int>> seen;
  for (const auto& r : records) {
    require(seen.emplace(r.file_path, wavelength_nm(r.band)).second, ErrorKind::kData,
            "manifest: duplicate (path, band) " + r.file_path);
    require(r.artefact_id >= 0 && r.artefact_id <= 8, ErrorKind::kData, "manifest: artefact id out of range");
    require((r.label == Label::kBonaFide) == (r.artefact_id == 0), ErrorKind::kData,
            "manifest: label and artefact id disagree for " + r.file_path);
  }
}

std::string sample_key(const std::string& file_path) {
  std::filesystem::path p(file_path);
  std::string stem = p.stem().string();
  const auto us = stem.rfind('_');
  if (us != std::string::npos) {
    const std::string tail = stem.substr(us + 1);
    if (!tail.empty() && std::all_of(tail.begin(), tail.end(), ::isdigit) && tail.size() <= 4 &&
        band_from_nm(std::stoi(tail)))
      stem.resize(us);
  }
  return (p.parent_path() / stem).generic_string();
}

// ---------------------------------------------------------------- quality

double laplacian_variance(const BandImage& image) {
  const int h = image.height(), w = image.width();
  require(h >= 3 && w >= 3, ErrorKind::kDimension, "laplacian_variance: image smaller than 3x3 kernel");
  const std::size_t n = static_cast<std::size_t>(h - 2) * static_cast<std::size_t>(w - 2);
  std::vector<double> resp;
  resp.reserve(n);
  for (int r = 1; r < h - 1; ++r) {
    for (int c = 1; c < w - 1; ++c) {
      const double v = image.at(r - 1, c) + image.at(r + 1, c) + image.at(r, c - 1) + image.at(r, c + 1) -
                       4.0 * image.at(r, c);
      resp.push_back(255.0 * v);
    }
  }
  const double mean = std::accumulate(resp.begin(), resp.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : resp) ss += (v - mean) * (v - mean);
  return ss / static_cast<double>(n);
}

QualityReport quality_filter(const BandImage& image, double threshold, double sat_limit) {
  QualityReport q;
  const auto px = image.pixels();
  std::size_t saturated = 0;
  for (double v : px) {
    if (!std::isfinite(v)) q.has_invalid_pixels = true;
    else if (v >= kSaturationLevel) ++saturated;
  }
  q.saturation_fraction = px.empty() ? 0.0 : static_cast<double>(saturated) / static_cast<double>(px.size());
  if (!q.has_invalid_pixels && image.height() >= 3 && image.width() >= 3) {
    q.laplacian_variance = laplacian_variance(image);
  }
  q.pass = q.laplacian_variance > threshold && !q.has_invalid_pixels && q.saturation_fraction < sat_limit;
  return q;
}

// ---------------------------------------------------------------- normalization

namespace {

double sample_bilinear(const BandImage& img, double y, double x) {
  const int h = img.height(), w = img.width();
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  const int y0 = static_cast<int>(std::floor(y));
  const int x0 = static_cast<int>(std::floor(x));
  const int y1 = std::min(y0 + 1, h - 1);
  const int x1 = std::min(x0 + 1, w - 1);
  const double fy = y - y0, fx = x - x0;
  const double top = img.at(y0, x0) * (1.0 - fx) + img.at(y0, x1) * fx;
  const double bot = img.at(y1, x0) * (1.0 - fx) + img.at(y1, x1) * fx;
  return top * (1.0 - fy) + bot * fy;
}

}  // namespace

BandImage resize_bilinear(const BandImage& image, int height, int width) {
  require(!image.empty() && height > 0 && width > 0, ErrorKind::kDimension, "resize_bilinear: empty size");
  BandImage out(height, width);
  const double sy = static_cast<double>(image.height()) / height;
  const double sx = static_cast<double>(image.width()) / width;
  for (int r = 0; r < height; ++r) {
    const double y = (r + 0.5) * sy - 0.5;
    for (int c = 0; c < width; ++c) out.at(r, c) = sample_bilinear(image, y, (c + 0.5) * sx - 0.5);
  }
  return out;
}

ModelInput to_model_input(const BandImage& image, const BandStats& stats, int side) {
  require(stats.std > 0.0, ErrorKind::kDegenerateStats, "to_model_input: band std must be positive");
  require(side > 0, ErrorKind::kDimension, "to_model_input: side must be positive");
  const BandImage resized = (image.height() == side && image.width() == side) ? image
                                                                              : resize_bilinear(image, side, side);
  ModelInput in;
  in.side = side;
  const std::size_t plane = static_cast<std::size_t>(side) * side;
  in.data.resize(3 * plane);
  const auto px = resized.pixels();
  for (std::size_t i = 0; i < plane; ++i) {
    const double v = (px[i] - stats.mean) / stats.std;
    in.data[i] = v;
    in.data[plane + i] = v;
    in.data[2 * plane + i] = v;
  }
  return in;
}

BandStats compute_band_stats(std::span<const BandImage* const> images) {
  require(!images.empty(), ErrorKind::kProtocol, "compute_band_stats: empty image list");
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto* img : images) {
    for (double v : img->pixels()) sum += v;
    n += img->pixels().size();
  }
  require(n > 0, ErrorKind::kProtocol, "compute_band_stats: images have no pixels");
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (const auto* img : images)
    for (double v : img->pixels()) ss += (v - mean) * (v - mean);
  return {mean, std::max(std::sqrt(ss / static_cast<double>(n)), kStatsFloor)};
}

BandStats compute_band_stats(std::span<const BandImage> images) {
  std::vector<const BandImage*> ptrs;
  ptrs.reserve(images.size());
  for (const auto& img : images) ptrs.push_back(&img);
  return compute_band_stats(std::span<const BandImage* const>(ptrs));
}

// ---------------------------------------------------------------- partition

DatasetManifest partition_identity_disjoint(DatasetManifest manifest, SplitFractions f, std::uint64_t seed) {
  require(f.train >= 0 && f.dev >= 0 && f.test >= 0 && std::abs(f.train + f.dev + f.test - 1.0) <= 1e-9,
          ErrorKind::kParameter, "partition: fractions must be non-negative and sum to 1");

  std::map<std::string, int> group_of;  // identity -> smallest artefact id
  for (const auto& r : manifest.records) {
    auto [it, inserted] = group_of.emplace(r.identity_id, r.artefact_id);
    if (!inserted) it->second = std::min(it->second, r.artefact_id);
  }
  std::map<int, std::vector<std::string>> groups;
  for (const auto& [id, g] : group_of) groups[g].push_back(id);

  std::map<std::string, Split> assignment;
  for (auto& [g, ids] : groups) {
    require(ids.size() >= 3, ErrorKind::kProtocol,
            "partition: artefact group " + std::to_string(g) + " has fewer than 3 identities");
    Rng rng(stream_seed(seed, "partition", static_cast<std::uint64_t>(g)));
    rng.shuffle(ids.begin(), ids.end());

    const double n = static_cast<double>(ids.size());
    const std::array<double, 3> exact = {f.train * n, f.dev * n, f.test * n};
    std::array<std::size_t, 3> count{};
    std::size_t assigned = 0;
    for (int i = 0; i < 3; ++i) {
      count[i] = static_cast<std::size_t>(std::floor(exact[i] + 1e-9));
      assigned += count[i];
    }
    std::array<int, 3> order = {0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return exact[a] - static_cast<double>(count[a]) > exact[b] - static_cast<double>(count[b]);
    });
    for (std::size_t k = 0; assigned < ids.size(); ++k, ++assigned) ++count[order[k % 3]];

    std::size_t pos = 0;
    const std::array<Split, 3> splits = {Split::kTrain, Split::kDev, Split::kTest};
    for (int i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < count[i]; ++j) assignment[ids[pos++]] = splits[i];
  }
  for (auto& r : manifest.records) r.split = assignment.at(r.identity_id);
  return manifest;
}

// ---------------------------------------------------------------- augmentation

AugmentParams draw_augment_params(std::uint64_t seed) {
  Rng rng(seed);
  AugmentParams p;
  p.rotation_deg = rng.uniform(-kMaxRotationDeg, kMaxRotationDeg);
  p.flip = rng.bernoulli(0.5);
  p.translate_x = rng.uniform(-kMaxTranslate, kMaxTranslate);
  p.translate_y = rng.uniform(-kMaxTranslate, kMaxTranslate);
  p.scale = rng.uniform(kMinScale, kMaxScale);
  return p;
}

BandImage apply_augment(const BandImage& image, const AugmentParams& p) {
  const int h = image.height(), w = image.width();
  BandImage out(h, w);
  if (image.empty()) return out;
  const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
  const double theta = p.rotation_deg * std::numbers::pi / 180.0;
  const double cs = std::cos(theta), sn = std::sin(theta);
  const double tx = p.translate_x * w, ty = p.translate_y * h;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double u = c - cx - tx;
      const double v = r - cy - ty;
      double xs = (cs * u + sn * v) / p.scale + cx;
      const double ys = (-sn * u + cs * v) / p.scale + cy;
      if (p.flip) xs = (w - 1) - xs;
      out.at(r, c) = std::clamp(sample_bilinear(image, ys, xs), 0.0, 1.0);
    }
  }
  return out;
}

BandImage augment(const BandImage& image, std::uint64_t seed) {
  return apply_augment(image, draw_augment_params(seed));
}

// ---------------------------------------------------------------- synthetic data

std::size_t SynthConfig::total_samples() const {
  std::size_t n = static_cast<std::size_t>(std::max(bona_fide_samples, 0));
  for (int c : attack_samples) n += static_cast<std::size_t>(std::max(c, 0));
  return n;
}

namespace {

/// Per-identity iris texture: radial fibres, concentric furrows and a few
/// dark crypts, roughly in [-1, 1].
struct IrisTexture {
  struct Fibre {
    double amp, freq, phase, twist;
  };
  struct Crypt {
    double x, y, radius, depth;
  };
  std::vector<Fibre> fibres;
  std::vector<Crypt> crypts;
  double ring_freq = 0.0, ring_phase = 0.0;

  static IrisTexture draw(Rng& rng) {
    IrisTexture t;
    for (int i = 0; i < 5; ++i)
      t.fibres.push_back({rng.uniform(0.4, 1.0), std::floor(rng.uniform(6.0, 22.0)), rng.uniform(0.0, 6.283),
                          rng.uniform(-0.25, 0.25)});
    for (int i = 0; i < 4; ++i)
      t.crypts.push_back({rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.04, 0.09),
                          rng.uniform(0.5, 1.0)});
    t.ring_freq = rng.uniform(1.2, 2.5);
    t.ring_phase = rng.uniform(0.0, 6.283);
    return t;
  }

  double eval(double xn, double yn, double rotation) const {
    // xn, yn in [0,1]
    const double dx = xn - 0.5, dy = yn - 0.5;
    const double r = std::sqrt(dx * dx + dy * dy) * 2.0;
    const double th = std::atan2(dy, dx) + rotation;
    double v = 0.0, norm = 0.0;
    for (const auto& f : fibres) {
      v += f.amp * std::cos(f.freq * th + f.twist * 12.0 * r + f.phase);
      norm += f.amp;
    }
    v += 0.5 * std::cos(2.0 * std::numbers::pi * t_ring(r));
    norm += 0.5;
    v /= norm;
    for (const auto& c : crypts) {
      const double d2 = (xn - c.x) * (xn - c.x) + (yn - c.y) * (yn - c.y);
      v -= c.depth * std::exp(-d2 / (2.0 * c.radius * c.radius));
    }
    return std::clamp(v, -1.0, 1.0);
  }

  double t_ring(double r) const { return ring_freq * r + ring_phase / 6.283; }
};

double quantize16(double v) { return std::round(std::clamp(v, 0.0, 1.0) * 65535.0) / 65535.0; }

std::string padded(int v, int width) {
  std::string s = std::to_string(v);
  if (static_cast<int>(s.size()) < width) s.insert(0, static_cast<std::size_t>(width) - s.size(), '0');
  return s;
}

struct ClassSpec {
  int artefact;
  int samples;
  int identities;
};

}  // namespace

SynthDataset synth_generate(const SynthConfig& cfg, std::uint64_t seed) {
  require(cfg.side >= 3, ErrorKind::kConfig, "synth: side must be at least 3");
  require(cfg.noise_std >= 0.0 && cfg.corrupt_fraction >= 0.0 && cfg.corrupt_fraction <= 1.0, ErrorKind::kConfig,
          "synth: invalid noise or corruption rate");
  SynthDataset out;

  std::vector<ClassSpec> classes = {{0, cfg.bona_fide_samples, cfg.bona_fide_identities}};
  for (int a = 1; a <= 8; ++a) classes.push_back({a, cfg.attack_samples[a - 1], cfg.attack_identities[a - 1]});

  const int side = cfg.side;
  for (const auto& cls : classes) {
    if (cls.samples <= 0) continue;
    require(cls.identities >= 1, ErrorKind::kConfig,
            "synth: class " + std::to_string(cls.artefact) + " needs at least one identity");
    const std::string prefix = cls.artefact == 0 ? "bf" : "a" + std::to_string(cls.artefact);

    std::vector<IrisTexture> textures;
    for (int id = 0; id < cls.identities; ++id) {
      Rng rng(stream_seed(seed, "data", 1000 + static_cast<std::uint64_t>(cls.artefact), static_cast<std::uint64_t>(id)));
      textures.push_back(IrisTexture::draw(rng));
    }

    for (int s = 0; s < cls.samples; ++s) {
      const int id = s % cls.identities;
      SpectralSample sample;
      sample.sample_id = prefix + "_s" + padded(s, 4);
      sample.identity_id = prefix + "_id" + padded(id, 2);
      sample.artefact_id = cls.artefact;
      sample.label = cls.artefact == 0 ? Label::kBonaFide : Label::kAttack;

      Rng srng(stream_seed(seed, "data", static_cast<std::uint64_t>(cls.artefact), static_cast<std::uint64_t>(s)));
      const double rotation = srng.uniform(-0.2, 0.2);
      const double shift_x = srng.uniform(-0.03, 0.03), shift_y = srng.uniform(-0.03, 0.03);
      const double dot_ox = srng.uniform(0.0, 8.0), dot_oy = srng.uniform(0.0, 8.0);
      const double spec_x = srng.uniform(0.3, 0.7), spec_y = srng.uniform(0.3, 0.7);
      const double gain = srng.uniform(0.95, 1.05);

      // Base texture sampled once; shared by all bands of this capture.
      std::vector<double> base(static_cast<std::size_t>(side) * side);
      for (int r = 0; r < side; ++r)
        for (int c = 0; c < side; ++c)
          base[static_cast<std::size_t>(r) * side + c] =
              textures[static_cast<std::size_t>(id)].eval((c + 0.5) / side + shift_x, (r + 0.5) / side + shift_y,
                                                          rotation);

      // Lens dot pattern (artefacts 1-6): period and ink density vary per lens.
      const int a = cls.artefact;
      const double dot_period = 3.0 + (a % 3);
      const double dot_radius = 0.9 + 0.1 * (a % 2) + 0.05 * a;
      const double lens_alpha = 0.62 + 0.03 * (a % 4);

      for (std::size_t k = 0; k < kNumBands; ++k) {
        const SpectralBand band = kAllBands[k];
        const double refl = cfg.reflectance[k];
        Rng nrng(stream_seed(seed, "data", static_cast<std::uint64_t>(cls.artefact), static_cast<std::uint64_t>(s),
                             100 + k));
        BandImage img(side, side);
        for (int r = 0; r < side; ++r) {
          for (int c = 0; c < side; ++c) {
            const double t = base[static_cast<std::size_t>(r) * side + c];
            const double tissue = refl * (0.55 + 0.35 * t);
            double v = 0.0;
            if (a == 0) {
              v = gain * tissue;
            } else if (a <= 6) {
              const double px = std::fmod(c + dot_ox, dot_period) - dot_period / 2.0;
              const double py = std::fmod(r + dot_oy, dot_period) - dot_period / 2.0;
              const bool ink = px * px + py * py <= dot_radius * dot_radius;
              const double print = ink ? 0.22 : 0.68;
              v = gain * ((1.0 - lens_alpha) * tissue + lens_alpha * print);
            } else if (a == 7) {
              const bool grid = (r % 3 == 2) || (c % 3 == 2);
              const double display = (0.2 + 0.45 * (0.5 + 0.5 * t)) * (grid ? 0.55 : 1.0);
              const double dx = (c + 0.5) / side - spec_x, dy = (r + 0.5) / side - spec_y;
              const double highlight = 0.35 * std::exp(-(dx * dx + dy * dy) / (2.0 * 0.05 * 0.05));
              v = gain * (display * (0.9 + 0.02 * static_cast<double>(k)) + highlight);
            } else {
              // Ordered-dither halftone with flat spectral response.
              static constexpr double kBayer[4][4] = {
                  {0, 8, 2, 10}, {12, 4, 14, 6}, {3, 11, 1, 9}, {15, 7, 13, 5}};
              const double level = 0.5 + 0.45 * t;
              const double thresh = (kBayer[r % 4][c % 4] + 0.5) / 16.0;
              v = gain * (level > thresh ? 0.72 : 0.18);
            }
            v += cfg.noise_std * nrng.normal();
            img.at(r, c) = quantize16(v);
          }
        }
        if (nrng.bernoulli(cfg.corrupt_fraction)) {
          // LED switching artefact: blown-out frame.
          for (auto& p : img.pixels()) p = 1.0;
        }
        sample.images.emplace(band, std::move(img));
        sample.band_mask.insert(band);

        ManifestRecord rec;
        rec.file_path = prefix + "/" + sample.identity_id + "/" + sample.sample_id + "_" + band_name(band) + ".pgm";
        rec.band = band;
        rec.label = sample.label;
        rec.artefact_id = sample.artefact_id;
        rec.identity_id = sample.identity_id;
        out.manifest.records.push_back(std::move(rec));
      }
      out.samples.push_back(std::move(sample));
    }
  }
  if (!out.manifest.records.empty())
    out.manifest = partition_identity_disjoint(std::move(out.manifest), cfg.fractions, stream_seed(seed, "data", 7));
  return out;
}

}  // namespace spectrapad
