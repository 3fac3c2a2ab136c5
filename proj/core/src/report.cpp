#include "spectrapad/report.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "spectrapad/checkpoint.hpp"
#include "spectrapad/csv.hpp"
#include "spectrapad/error.hpp"

namespace spectrapad {

namespace {

std::string row(int train, const std::string& test, ThresholdMode mode, double threshold, double apcer, double bpcer,
                double hter, double eer) {
  return std::to_string(train) + "," + test + "," + to_string(mode) + "," + format_double(threshold) + "," +
         format_double(apcer) + "," + format_double(bpcer) + "," + format_double(hter) + "," + format_double(eer) +
         "\n";
}

nlohmann::json metrics_json(const ArtefactMetrics& m) {
  return {{"test_artefact", m.artefact}, {"threshold", m.threshold}, {"apcer", m.apcer}, {"bpcer", m.bpcer},
          {"hter", m.hter},           {"d_eer", m.d_eer},         {"n_bona", m.n_bona}, {"n_attack", m.n_attack}};
}

}  // namespace

std::string results_csv(const EvalReport& r) {
  std::string out = std::string(kResultsHeader) + "\n";
  for (const auto& m : r.per_artefact)
    out += row(r.train_artefact, std::to_string(m.artefact), r.mode, m.threshold, m.apcer, m.bpcer, m.hter, m.d_eer);
  const auto& a = r.aggregate;
  out += row(r.train_artefact, "mean", r.mode, r.threshold_used, a.apcer.mean, a.bpcer.mean, a.hter.mean, a.d_eer.mean);
  out += row(r.train_artefact, "sd", r.mode, r.threshold_used, a.apcer.sd, a.bpcer.sd, a.hter.sd, a.d_eer.sd);
  return out;
}

std::string intra_csv(const EvalReport& r, const ArtefactMetrics& m) {
  return std::string(kResultsHeader) + "\n" +
         row(r.train_artefact, std::to_string(m.artefact), r.mode, m.threshold, m.apcer, m.bpcer, m.hter, m.d_eer);
}

std::string results_json(const EvalOutput& eval, const std::string& extra_json) {
  const EvalReport& r = eval.report;
  nlohmann::json j;
  j["train_artefact"] = r.train_artefact;
  j["mode"] = to_string(r.mode);
  j["threshold_used"] = r.threshold_used;
  j["sd_across"] = "tested artefacts";
  j["per_artefact"] = nlohmann::json::array();
  for (const auto& m : r.per_artefact) j["per_artefact"].push_back(metrics_json(m));
  auto ms = [](const MeanSd& v) { return nlohmann::json{{"mean", v.mean}, {"sd", v.sd}}; };
  j["aggregate"] = {{"apcer", ms(r.aggregate.apcer)},
                    {"bpcer", ms(r.aggregate.bpcer)},
                    {"hter", ms(r.aggregate.hter)},
                    {"d_eer", ms(r.aggregate.d_eer)}};
  j["intra"] = metrics_json(eval.intra);
  j["n_scored"] = eval.scores.size();
  j["n_excluded"] = eval.n_excluded;
  j["extra"] = nlohmann::json::parse(extra_json);
  return j.dump(2) + "\n";
}

std::string scores_csv(const std::vector<SampleScore>& scores, int artefact) {
  std::string out = "sample_id,identity_id,label,artefact_id,p_attack,bands_used\n";
  for (const auto& s : scores) {
    if (s.artefact_id != 0 && s.artefact_id != artefact) continue;
    out += csv_field(s.sample_id) + "," + csv_field(s.identity_id) + "," + std::to_string(s.label) + "," +
           std::to_string(s.artefact_id) + "," + format_double(s.p_ens[1]) + "," +
           csv_field(s.bands_used.to_string()) + "\n";
  }
  return out;
}

std::string audit_json(const AuditResult& a) {
  nlohmann::json j{{"identity_disjoint", a.identity_disjoint},
                   {"shared_identities", a.shared_identities},
                   {"train_phase_test_reads", a.train_phase_test_reads},
                   {"eval_phase_non_test_reads", a.eval_phase_non_test_reads},
                   {"violations", a.violations()}};
  return j.dump(2) + "\n";
}

std::string run_json(const RunRecord& run) {
  nlohmann::json j;
  j["config_hash"] = hex64(run.config_hash);
  j["dataset_hash"] = hex64(run.dataset_hash);
  j["bands"] = nlohmann::json::array();
  for (const auto& b : run.bands) {
    j["bands"].push_back({{"band", wavelength_nm(b.band)},
                          {"n_eff", b.n_eff},
                          {"n_train_bona", b.n_train[0]},
                          {"n_train_attack", b.n_train[1]},
                          {"n_dev", b.n_dev},
                          {"p_k", b.p_k},
                          {"class_weights", {b.weights.w0, b.weights.w1}},
                          {"dev_loss", b.dev_loss},
                          {"selected_epoch", b.selected_epoch},
                          {"dev_accuracy", b.dev_accuracy}});
  }
  nlohmann::json ens = nlohmann::json::object();
  for (SpectralBand b : kAllBands) {
    const std::size_t k = band_index(b);
    if (!run.model.bands.contains(b)) continue;
    nlohmann::json acc = nullptr;
    if (run.model.ensemble.acc[k]) acc = *run.model.ensemble.acc[k];
    ens[band_name(b)] = {{"acc", acc}, {"w", run.model.ensemble.w[k]}};
  }
  j["ensemble"] = ens;
  j["dev_threshold"] = run.model.dev_threshold;
  j["audit"] = nlohmann::json::parse(audit_json(run.audit));
  return j.dump(2) + "\n";
}

std::string dev_loss_csv(const std::vector<BandTrainRecord>& bands) {
  std::string out = "band,epoch,dev_loss,selected\n";
  for (const auto& b : bands)
    for (std::size_t e = 0; e < b.dev_loss.size(); ++e)
      out += band_name(b.band) + "," + std::to_string(e) + "," + format_double(b.dev_loss[e]) + "," +
             (static_cast<int>(e) == b.selected_epoch ? "1" : "0") + "\n";
  return out;
}

std::string loss_trace_csv(const std::vector<BandTrainRecord>& bands) {
  std::string out = "band,epoch,step,ce,contrastive,total\n";
  for (const auto& b : bands)
    for (const auto& t : b.trace)
      out += band_name(t.band) + "," + std::to_string(t.epoch) + "," + std::to_string(t.step) + "," +
             format_double(t.ce) + "," + format_double(t.contrastive) + "," + format_double(t.total) + "\n";
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorKind::kIo, "cannot write " + path.string());
  f << text;
  if (!f) fail(ErrorKind::kIo, "short write to " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::kIo, "cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_features(const std::filesystem::path& path, const FeatureTable& t) {
  Checkpoint ck;
  ck.put("features.values", t.values);
  Mat labels(static_cast<Eigen::Index>(t.labels.size()), 1), arts(static_cast<Eigen::Index>(t.artefacts.size()), 1);
  for (std::size_t i = 0; i < t.labels.size(); ++i) labels(static_cast<Eigen::Index>(i), 0) = t.labels[i];
  for (std::size_t i = 0; i < t.artefacts.size(); ++i) arts(static_cast<Eigen::Index>(i), 0) = t.artefacts[i];
  ck.put("features.label", labels);
  ck.put("features.artefact", arts);
  ck.save(path);
}

FeatureTable read_features(const std::filesystem::path& path) {
  const Checkpoint ck = Checkpoint::load(path);
  auto shape = [&](const std::string& name) {
    if (!ck.has(name)) fail(ErrorKind::kData, path.string() + ": missing " + name);
    return ck.tensors.at(name).shape;
  };
  const auto vs = shape("features.values");
  require(vs.size() == 2, ErrorKind::kData, path.string() + ": features.values must be 2-D");
  FeatureTable t;
  t.values = ck.get("features.values", vs[0], vs[1]);
  const Mat labels = ck.get("features.label", vs[0], 1);
  const Mat arts = ck.get("features.artefact", vs[0], 1);
  for (Eigen::Index i = 0; i < vs[0]; ++i) {
    t.labels.push_back(static_cast<int>(labels(i, 0)));
    t.artefacts.push_back(static_cast<int>(arts(i, 0)));
  }
  return t;
}

void write_eval_outputs(const std::filesystem::path& dir, const EvalOutput& eval) {
  write_text(dir / "results.csv", results_csv(eval.report));
  write_text(dir / "results.json", results_json(eval));
  write_text(dir / "intra.csv", intra_csv(eval.report, eval.intra));
  std::vector<int> arts = eval.test_artefacts;
  arts.push_back(eval.report.train_artefact);
  for (int a : arts) write_text(dir / "scores" / (std::to_string(a) + ".csv"), scores_csv(eval.scores, a));

  auto table_for = [&](auto pick) {
    FeatureTable t;
    std::vector<Eigen::RowVectorXd> rows;
    for (const auto& s : eval.scores) {
      const Eigen::RowVectorXd* f = pick(s);
      if (!f || f->size() == 0) continue;
      rows.push_back(*f);
      t.labels.push_back(s.label);
      t.artefacts.push_back(s.artefact_id);
    }
    const Eigen::Index d = rows.empty() ? 0 : rows.front().size();
    t.values = Mat(static_cast<Eigen::Index>(rows.size()), d);
    for (std::size_t i = 0; i < rows.size(); ++i) t.values.row(static_cast<Eigen::Index>(i)) = rows[i];
    return t;
  };
  for (SpectralBand b : kAllBands) {
    const std::size_t k = band_index(b);
    FeatureTable t = table_for([k](const SampleScore& s) { return &s.features[k]; });
    if (t.values.rows() > 0) write_features(dir / "features" / (band_name(b) + ".bin"), t);
  }
  write_features(dir / "features" / "fused.bin", table_for([](const SampleScore& s) { return &s.fused_features; }));
}

}  // namespace spectrapad
