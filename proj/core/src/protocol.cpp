#include "spectrapad/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <set>
#include <thread>

#include "parallel.hpp"
#include "spectrapad/error.hpp"
#include "spectrapad/rng.hpp"

namespace spectrapad {

// ---------------------------------------------------------------- config

std::string to_string(Component c) {
  switch (c) {
    case Component::kSpe: return "spe";
    case Component::kTokenFusion: return "token_fusion";
    case Component::kBalancedCe: return "balanced_ce";
    case Component::kContrastive: return "contrastive";
    case Component::kBandDropout: return "band_dropout";
    case Component::kFeatNorm: return "feat_norm";
  }
  return "?";
}

Component parse_component(const std::string& text) {
  for (Component c : kAllComponents)
    if (to_string(c) == text) return c;
  fail(ErrorKind::kConfig, "unknown ablation toggle '" + text + "'");
}

std::string Ablation::name() const {
  if (removed.empty()) return "full";
  std::string out;
  for (Component c : kAllComponents)
    if (removed.count(c)) out += (out.empty() ? "no_" : "+no_") + to_string(c);
  return out;
}

Ablation Ablation::parse(const std::string& list) {
  Ablation a;
  std::size_t start = 0;
  while (start <= list.size()) {
    std::size_t end = list.find(',', start);
    if (end == std::string::npos) end = list.size();
    std::string item = list.substr(start, end - start);
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) a.removed.insert(parse_component(item));
    start = end + 1;
  }
  return a;
}

std::string Ablation::to_list() const {
  std::string out;
  for (Component c : kAllComponents)
    if (removed.count(c)) out += (out.empty() ? "" : ",") + to_string(c);
  return out;
}

void ProtocolConfig::validate() const {
  require(train_artefact >= 1 && train_artefact <= 8, ErrorKind::kConfig,
          "train.train_artefact must be in 1..8, got " + std::to_string(train_artefact));
  for (int a : test_artefacts) {
    require(a >= 1 && a <= 8, ErrorKind::kConfig, "eval.test_artefacts entries must be in 1..8");
    require(a != train_artefact, ErrorKind::kConfig, "the train artefact cannot also be a test artefact");
  }
  require(epochs >= 0, ErrorKind::kConfig, "train.epochs must be non-negative");
  require(batch_size >= 2, ErrorKind::kConfig, "train.batch_size must be at least 2");
  require(adam.lr > 0.0, ErrorKind::kConfig, "train.lr must be positive");
  require(adam.weight_decay >= 0.0, ErrorKind::kConfig, "train.weight_decay must be non-negative");
  require(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0, ErrorKind::kConfig,
          "Adam betas must lie in [0, 1)");
  require(!bands.empty(), ErrorKind::kConfig, "train.bands is empty");
  require(!eval_bands.empty(), ErrorKind::kConfig, "eval.bands is empty");
  require(threads >= 1, ErrorKind::kConfig, "thread count must be positive");
  require(qc.saturation_limit >= 0.0 && qc.saturation_limit <= 1.0, ErrorKind::kConfig,
          "qc.saturation_limit must lie in [0, 1]");
  loss.validate();
  dropout.validate();
  model.validate();
}

HeadOptions ProtocolConfig::head_options() const {
  HeadOptions o;
  o.spe = ablation.on(Component::kSpe);
  o.token_fusion = ablation.on(Component::kTokenFusion);
  o.feat_norm = ablation.on(Component::kFeatNorm);
  return o;
}

int default_threads() {
  if (const char* env = std::getenv("SPECTRAPAD_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<int>(v);
    fail(ErrorKind::kConfig, std::string("SPECTRAPAD_THREADS must be a positive integer, got '") + env + "'");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// ---------------------------------------------------------------- model

PadModel PadModel::create(const ProtocolConfig& cfg) {
  PadModel m;
  m.bands = cfg.bands;
  m.encoder = ViTParams::create(cfg.model, cfg.bands, cfg.seed);
  for (SpectralBand b : cfg.bands.bands())
    m.heads.emplace(b, BandHeadParams::create(b, cfg.model.embed_dim, cfg.head_options(), cfg.seed));
  return m;
}

namespace {

std::string nm(SpectralBand b) { return std::to_string(wavelength_nm(b)); }

}  // namespace

Checkpoint PadModel::to_checkpoint() const {
  Checkpoint ck;
  for (const auto* p : encoder.all_params()) ck.put(p->name, p->value);
  for (const auto& [band, head] : heads) {
    for (const auto* p : head.all_params()) ck.put(p->name, p->value);
    ck.put_scalar(head.prefix() + ".p_k", head.p_k);
  }
  for (SpectralBand b : bands.bands()) {
    ck.put_scalar("data.band_stats." + nm(b) + ".mean", band_stats[band_index(b)].mean);
    ck.put_scalar("data.band_stats." + nm(b) + ".std", band_stats[band_index(b)].std);
    if (ensemble.acc[band_index(b)]) ck.put_scalar("ensemble.acc." + nm(b), *ensemble.acc[band_index(b)]);
    ck.put_scalar("ensemble.w." + nm(b), ensemble.w[band_index(b)]);
  }
  ck.put_scalar("ensemble.dev_threshold", dev_threshold);
  return ck;
}

PadModel PadModel::from_checkpoint(const Checkpoint& ck, const ProtocolConfig& cfg) {
  PadModel m = create(cfg);
  auto load = [&](Param* p) { p->value = ck.get(p->name, p->value.rows(), p->value.cols()); };
  for (auto* p : m.encoder.all_params()) load(p);
  for (auto& [band, head] : m.heads) {
    for (auto* p : head.all_params()) load(p);
    head.p_k = ck.get_scalar(head.prefix() + ".p_k");
  }
  for (SpectralBand b : m.bands.bands()) {
    const std::size_t k = band_index(b);
    m.band_stats[k].mean = ck.get_scalar("data.band_stats." + nm(b) + ".mean");
    m.band_stats[k].std = ck.get_scalar("data.band_stats." + nm(b) + ".std");
    if (ck.has("ensemble.acc." + nm(b))) m.ensemble.acc[k] = ck.get_scalar("ensemble.acc." + nm(b));
    m.ensemble.w[k] = ck.get_scalar("ensemble.w." + nm(b));
  }
  m.dev_threshold = ck.get_scalar("ensemble.dev_threshold");
  return m;
}

// ---------------------------------------------------------------- training

namespace {

struct BandData {
  std::vector<std::size_t> index;  // dataset rows
  std::vector<int> labels;
  std::vector<TokenSequence> trunk;  // trunk output of the un-augmented image
};

BandData collect(const Dataset& data, SpectralBand band, Split split, int train_artefact, const QcConfig& qc) {
  BandData out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const SampleInfo& s = data.info(i);
    if (s.split != split || !s.available.contains(band)) continue;
    if (s.artefact_id != 0 && s.artefact_id != train_artefact) continue;
    if (!quality_filter(data.image(i, band), qc.threshold, qc.saturation_limit).pass) continue;
    out.index.push_back(i);
    out.labels.push_back(static_cast<int>(s.label));
  }
  return out;
}

TokenSequence trunk_tokens(const BandImage& img, const PadModel& model, SpectralBand band) {
  const ModelInput in = to_model_input(img, model.band_stats[band_index(band)], model.encoder.config.image_side);
  return encode_trunk(patch_embed(in, model.encoder), model.encoder);
}

struct FeatureStats {
  Mat mu, sigma;
};

FeatureStats feature_stats(const BandData& train, const PadModel& model, SpectralBand band) {
  const BandHeadParams& head = model.heads.at(band);
  const Eigen::Index n = static_cast<Eigen::Index>(train.index.size());
  Mat feats(n, head.dim);
  for (Eigen::Index i = 0; i < n; ++i)
    feats.row(i) = pre_norm_features(encode_band(train.trunk[static_cast<std::size_t>(i)], model.encoder, band), head);
  FeatureStats st;
  st.mu = feats.colwise().mean();
  st.sigma = ((feats.rowwise() - st.mu.row(0)).array().square().colwise().mean()).sqrt().matrix();
  st.sigma = st.sigma.cwiseMax(kFeatSigmaFloor);
  return st;
}

struct DevEval {
  double loss = 0.0;
  std::vector<Prob2> probs;
  std::vector<int> preds;
};

DevEval evaluate_dev(const BandData& dev, const PadModel& model, SpectralBand band, const ClassWeights& weights,
                     const LossConfig& loss, bool contrastive_on, int batch_size) {
  const BandHeadParams& head = model.heads.at(band);
  DevEval out;
  const std::size_t n = dev.index.size();
  double total = 0.0;
  for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
    const std::size_t m = std::min(n - start, static_cast<std::size_t>(batch_size));
    Mat probs(static_cast<Eigen::Index>(m), 2), feats(static_cast<Eigen::Index>(m), head.dim);
    std::vector<int> labels(dev.labels.begin() + static_cast<std::ptrdiff_t>(start),
                            dev.labels.begin() + static_cast<std::ptrdiff_t>(start + m));
    for (std::size_t i = 0; i < m; ++i) {
      const auto o = head_forward(encode_band(dev.trunk[start + i], model.encoder, band), head, Mode::kEval, 0);
      probs.row(static_cast<Eigen::Index>(i)) = o.cls.probs;
      feats.row(static_cast<Eigen::Index>(i)) = o.features;
      out.probs.push_back({o.cls.probs(0, 0), o.cls.probs(0, 1)});
      out.preds.push_back(o.cls.pred);
    }
    double l = balanced_ce(probs, labels, weights);
    if (contrastive_on) l += loss.lambda * contrastive(feats, labels, loss.epsilon);
    total += l * static_cast<double>(m);
  }
  out.loss = n > 0 ? total / static_cast<double>(n) : 0.0;
  return out;
}

std::vector<Mat> snapshot(const ParamRefs& params) {
  std::vector<Mat> out;
  for (const auto* p : params) out.push_back(p->value);
  return out;
}

void restore(const ParamRefs& params, const std::vector<Mat>& values) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

}  // namespace

BandTrainRecord train_band(PadModel& model, const Dataset& data, SpectralBand band, const ProtocolConfig& cfg) {
  BandTrainRecord rec;
  rec.band = band;
  const std::uint64_t bk = static_cast<std::uint64_t>(wavelength_nm(band));
  BandHeadParams& head = model.heads.at(band);

  BandData train = collect(data, band, Split::kTrain, cfg.train_artefact, cfg.qc);
  BandData dev = collect(data, band, Split::kDev, cfg.train_artefact, cfg.qc);
  for (int y : train.labels) ++rec.n_train[y];
  rec.n_eff = static_cast<long long>(train.index.size());
  rec.n_dev = static_cast<long long>(dev.index.size());
  require(rec.n_train[0] > 0 && rec.n_train[1] > 0, ErrorKind::kProtocol,
          "band " + band_name(band) + ": training split needs both bona fide and attack images after QC");
  require(rec.n_dev > 0, ErrorKind::kProtocol, "band " + band_name(band) + ": empty development split after QC");

  {
    std::vector<const BandImage*> imgs;
    for (std::size_t i : train.index) imgs.push_back(&data.image(i, band));
    model.band_stats[band_index(band)] = compute_band_stats(imgs);
  }
  for (std::size_t i : train.index) train.trunk.push_back(trunk_tokens(data.image(i, band), model, band));
  for (std::size_t i : dev.index) dev.trunk.push_back(trunk_tokens(data.image(i, band), model, band));

  rec.p_k = cfg.ablation.on(Component::kBandDropout) ? band_dropout_rate(rec.n_eff, cfg.dropout) : 0.0;
  head.p_k = rec.p_k;
  if (!cfg.ablation.on(Component::kBalancedCe))
    rec.weights = ClassWeights{1.0, 1.0};
  else if (cfg.class_weight_form == ClassWeightForm::kInverseFrequency)
    rec.weights = inverse_frequency_weights(rec.n_train[0], rec.n_train[1]);
  else
    rec.weights = class_weights(rec.n_train[0], rec.n_train[1]);

  const bool contrastive_on = cfg.ablation.on(Component::kContrastive);
  const bool feat_norm = cfg.ablation.on(Component::kFeatNorm);
  if (cfg.epochs == 0) {
    const DevEval d = evaluate_dev(dev, model, band, rec.weights, cfg.loss, contrastive_on, cfg.batch_size);
    rec.dev_loss.push_back(d.loss);
    rec.dev_accuracy = band_accuracy(d.preds, dev.labels);
    return rec;
  }

  ParamRefs trainable = model.encoder.band_params(band);
  for (auto* p : head.trainable_params()) trainable.push_back(p);
  ParamRefs selected_state = trainable;
  selected_state.push_back(&head.feat_mu);
  selected_state.push_back(&head.feat_sigma);
  Adam adam(trainable, cfg.adam);
  adam.zero_grad();

  auto refresh_stats = [&] {
    if (!feat_norm) return;
    const FeatureStats st = feature_stats(train, model, band);
    head.feat_mu.value = st.mu;
    head.feat_sigma.value = st.sigma;
  };

  refresh_stats();
  rec.dev_loss.push_back(evaluate_dev(dev, model, band, rec.weights, cfg.loss, contrastive_on, cfg.batch_size).loss);
  double best = rec.dev_loss[0];
  std::vector<Mat> best_state = snapshot(selected_state);

  const std::size_t n = train.index.size();
  const bool has_blocks = !model.encoder.blocks_for(band).empty();
  std::vector<std::size_t> order(n);
  int step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (epoch > 1) refresh_stats();
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng shuffle_rng(stream_seed(cfg.seed, "data", bk, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order.begin(), order.end());

    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t m = std::min(n - start, static_cast<std::size_t>(cfg.batch_size));
      std::vector<EncoderCache> enc(m);
      std::vector<HeadCache> hc(m);
      std::vector<int> labels(m);
      Mat logits(static_cast<Eigen::Index>(m), 2), feats(static_cast<Eigen::Index>(m), head.dim);
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t local = order[start + i];
        labels[i] = train.labels[local];
        const TokenSequence* tokens = &train.trunk[local];
        TokenSequence augmented;
        if (cfg.augment) {
          const std::uint64_t aseed = stream_seed(cfg.seed, "augment", bk, static_cast<std::uint64_t>(step),
                                                  static_cast<std::uint64_t>(i));
          augmented = trunk_tokens(spectrapad::augment(data.image(train.index[local], band), aseed), model, band);
          tokens = &augmented;
        }
        const TokenSequence x = encode_band(*tokens, model.encoder, band, &enc[i]);
        const std::uint64_t dseed =
            stream_seed(cfg.seed, "dropout", bk, static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(i));
        const HeadOutput o = head_forward(x, head, Mode::kTrain, dseed, &hc[i]);
        logits.row(static_cast<Eigen::Index>(i)) = o.cls.logits;
        feats.row(static_cast<Eigen::Index>(i)) = o.features;
      }

      const LossGrad ce = balanced_ce_from_logits(logits, labels, rec.weights);
      LossTraceEntry t{band, epoch, step, ce.value, 0.0, ce.value};
      Mat dfeat;
      if (contrastive_on) {
        const LossGrad cl = contrastive_with_grad(feats, labels, cfg.loss.epsilon);
        t.contrastive = cl.value;
        t.total = ce.value + cfg.loss.lambda * cl.value;
        dfeat = cfg.loss.lambda * cl.grad;
      }
      if (!std::isfinite(t.total))
        fail(ErrorKind::kNumeric, "band " + band_name(band) + ": non-finite training loss at step " +
                                      std::to_string(step));
      rec.trace.push_back(t);

      for (std::size_t i = 0; i < m; ++i) {
        const Eigen::Index r = static_cast<Eigen::Index>(i);
        const Mat dl = ce.grad.row(r);
        const Mat df = contrastive_on ? Mat(dfeat.row(r)) : Mat();
        const TokenSequence dtok = head_backward(hc[i], dl, df, head);
        if (has_blocks) backward(dtok, enc[i], model.encoder, band);
      }
      adam.step();
      adam.zero_grad();
      ++step;
    }

    const double dl = evaluate_dev(dev, model, band, rec.weights, cfg.loss, contrastive_on, cfg.batch_size).loss;
    if (!std::isfinite(dl)) fail(ErrorKind::kNumeric, "band " + band_name(band) + ": non-finite dev loss");
    rec.dev_loss.push_back(dl);
    if (dl < best) {
      best = dl;
      rec.selected_epoch = epoch;
      best_state = snapshot(selected_state);
    }
  }

  restore(selected_state, best_state);
  if (feat_norm) {
    const FeatureStats st = feature_stats(train, model, band);
    fold_feature_stats(head, st.mu, st.sigma);
  }
  const DevEval d = evaluate_dev(dev, model, band, rec.weights, cfg.loss, contrastive_on, cfg.batch_size);
  rec.dev_accuracy = band_accuracy(d.preds, dev.labels);
  return rec;
}

// ---------------------------------------------------------------- scoring

std::vector<SampleScore> score_samples(const PadModel& model, const Dataset& data, std::span<const std::size_t> indices,
                                       BandSet mask, const ProtocolConfig& cfg, std::vector<std::size_t>* excluded) {
  std::vector<std::optional<SampleScore>> slots(indices.size());
  detail::parallel_for(indices.size(), cfg.threads, [&](std::size_t k) {
    const std::size_t i = indices[k];
    const SampleInfo& info = data.info(i);
    SampleScore s;
    s.index = i;
    s.sample_id = info.sample_id;
    s.identity_id = info.identity_id;
    s.label = static_cast<int>(info.label);
    s.artefact_id = info.artefact_id;
    for (SpectralBand b : mask.intersect(info.available).intersect(model.bands).bands()) {
      const BandImage& img = data.image(i, b);
      if (!quality_filter(img, cfg.qc.threshold, cfg.qc.saturation_limit).pass) continue;
      const ModelInput in = to_model_input(img, model.band_stats[band_index(b)], model.encoder.config.image_side);
      const HeadOutput o =
          head_forward(encode(patch_embed(in, model.encoder), model.encoder, b), model.heads.at(b), Mode::kEval, 0);
      s.band_probs[band_index(b)] = Prob2{o.cls.probs(0, 0), o.cls.probs(0, 1)};
      s.features[band_index(b)] = o.features.row(0);
    }
    bool any = false;
    for (const auto& p : s.band_probs) any = any || p.has_value();
    if (!any) return;
    const FusedDecision f = fuse(s.band_probs, model.ensemble, mask);
    s.p_ens = f.p_ens;
    s.bands_used = f.bands_used;
    s.fused_features = Eigen::RowVectorXd::Zero(model.encoder.config.embed_dim);
    for (SpectralBand b : f.bands_used.bands())
      s.fused_features += f.alpha[band_index(b)] * s.features[band_index(b)];
    slots[k] = std::move(s);
  });
  std::vector<SampleScore> out;
  for (std::size_t k = 0; k < slots.size(); ++k) {
    if (slots[k])
      out.push_back(std::move(*slots[k]));
    else if (excluded)
      excluded->push_back(indices[k]);
  }
  return out;
}

// ---------------------------------------------------------------- runs

std::vector<std::string> shared_identities(const Dataset& data) {
  std::map<std::string, std::set<Split>> seen;
  for (std::size_t i = 0; i < data.size(); ++i) seen[data.info(i).identity_id].insert(data.info(i).split);
  std::vector<std::string> out;
  for (const auto& [id, splits] : seen)
    if (splits.size() > 1) out.push_back(id);
  return out;
}

std::vector<int> resolve_test_artefacts(const Dataset& data, const ProtocolConfig& cfg) {
  std::set<int> present;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data.info(i).split == Split::kTest && data.info(i).artefact_id != 0) present.insert(data.info(i).artefact_id);
  std::vector<int> out;
  if (!cfg.test_artefacts.empty()) {
    for (int a : cfg.test_artefacts) {
      require(present.count(a) != 0, ErrorKind::kProtocol,
              "test artefact " + std::to_string(a) + " has no test-split samples");
      out.push_back(a);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
  } else {
    for (int a : present)
      if (a != cfg.train_artefact) out.push_back(a);
  }
  require(!out.empty(), ErrorKind::kProtocol, "no held-out artefact to test on");
  return out;
}

TrainOutput run_training(const Dataset& data, const ProtocolConfig& cfg) {
  cfg.validate();
  bool has_train_artefact = false;
  for (std::size_t i = 0; i < data.size(); ++i)
    has_train_artefact = has_train_artefact || data.info(i).artefact_id == cfg.train_artefact;
  require(has_train_artefact, ErrorKind::kProtocol,
          "dataset has no samples of train artefact " + std::to_string(cfg.train_artefact));

  TrainOutput out;
  out.model = PadModel::create(cfg);
  const auto bands = cfg.bands.bands();
  out.bands.resize(bands.size());
  // Bands own disjoint parameters; the trunk is only read.
  detail::parallel_for(bands.size(), cfg.threads,
                       [&](std::size_t k) { out.bands[k] = train_band(out.model, data, bands[k], cfg); });

  PerBand<std::optional<double>> accs{};
  for (const auto& r : out.bands) accs[band_index(r.band)] = r.dev_accuracy;
  out.model.ensemble = band_weights(accs);

  const auto dev_idx = data.select([&](const SampleInfo& s) {
    return s.split == Split::kDev && (s.artefact_id == 0 || s.artefact_id == cfg.train_artefact);
  });
  const auto dev_scores = score_samples(out.model, data, dev_idx, cfg.bands, cfg, nullptr);
  std::vector<double> bona, attack;
  for (const auto& s : dev_scores) (s.label == 0 ? bona : attack).push_back(s.p_ens[1]);
  require(!bona.empty() && !attack.empty(), ErrorKind::kProtocol, "development split lacks one of the classes");
  const double t = d_eer(bona, attack).threshold;
  // The sweep may place the threshold just above 1; keep it a valid decision threshold.
  out.model.dev_threshold = std::clamp(t, std::nextafter(0.0, 1.0), std::nextafter(1.0, 0.0));
  return out;
}

EvalOutput run_evaluation(const PadModel& model, const Dataset& data, const ProtocolConfig& cfg) {
  EvalOutput out;
  out.test_artefacts = resolve_test_artefacts(data, cfg);
  const std::set<int> wanted(out.test_artefacts.begin(), out.test_artefacts.end());
  const auto idx = data.select([&](const SampleInfo& s) {
    return s.split == Split::kTest &&
           (s.artefact_id == 0 || s.artefact_id == cfg.train_artefact || wanted.count(s.artefact_id) != 0);
  });
  std::vector<std::size_t> excluded;
  out.scores = score_samples(model, data, idx, cfg.eval_bands, cfg, &excluded);
  out.n_excluded = excluded.size();

  ScoreSet set;
  for (const auto& s : out.scores) {
    if (s.artefact_id == 0)
      set.bona.push_back(s.p_ens[1]);
    else
      set.attack[s.artefact_id].push_back(s.p_ens[1]);
  }
  const double threshold = cfg.threshold_mode == ThresholdMode::kFixed ? kDecisionThreshold : model.dev_threshold;
  out.report = make_report(set, cfg.train_artefact, out.test_artefacts, cfg.threshold_mode, threshold);
  out.intra = artefact_metrics(set, cfg.train_artefact, threshold);
  return out;
}

RunRecord run_cross_artefact(const Dataset& data, const ProtocolConfig& cfg, std::uint64_t config_hash) {
  cfg.validate();
  RunRecord rec;
  rec.config_hash = config_hash;
  rec.dataset_hash = data.hash();

  const auto shared = shared_identities(data);
  rec.audit.shared_identities = shared.size();
  rec.audit.identity_disjoint = shared.empty();
  require(shared.empty(), ErrorKind::kProtocol,
          "identity leakage: " + std::to_string(shared.size()) + " identities appear in several splits");
  resolve_test_artefacts(data, cfg);

  data.access_log().clear();
  TrainOutput trained = run_training(data, cfg);
  rec.audit.train_phase_test_reads = data.access_log().count(Split::kTest);
  rec.bands = std::move(trained.bands);

  // Evaluate exactly what the checkpoint holds.
  Checkpoint ck = trained.model.to_checkpoint();
  rec.model = PadModel::from_checkpoint(ck, cfg);

  data.access_log().clear();
  rec.eval = run_evaluation(rec.model, data, cfg);
  rec.audit.eval_phase_non_test_reads =
      data.access_log().count(Split::kTrain) + data.access_log().count(Split::kDev);
  return rec;
}

std::vector<AblationRow> run_ablation(const Dataset& data, const ProtocolConfig& cfg,
                                      const std::function<std::uint64_t(const ProtocolConfig&)>& hash_fn) {
  std::vector<Ablation> variants{Ablation{}};
  for (Component c : kAllComponents) variants.push_back(Ablation{{c}});
  std::vector<AblationRow> rows;
  for (const auto& a : variants) {
    ProtocolConfig c = cfg;
    c.ablation = a;
    AblationRow row;
    row.name = a.name();
    row.ablation = a;
    row.run = run_cross_artefact(data, c, hash_fn ? hash_fn(c) : 0);
    for (const auto& b : row.run.bands)
      row.dev_loss_selected += b.dev_loss[static_cast<std::size_t>(b.selected_epoch)];
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace spectrapad
