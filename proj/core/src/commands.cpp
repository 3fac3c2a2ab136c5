#include "spectrapad/commands.hpp"

#include <filesystem>
#include <map>
#include <functional>
#include <ostream>

#include "spectrapad/checkpoint.hpp"
#include "spectrapad/csv.hpp"
#include "spectrapad/error.hpp"
#include "spectrapad/image_io.hpp"
#include "spectrapad/protocol.hpp"
#include "spectrapad/report.hpp"
#include "spectrapad/rng.hpp"
#include "spectrapad/separability.hpp"

namespace spectrapad {

namespace fs = std::filesystem;

namespace {

std::uint64_t synth_source_hash(const GlobalConfig& cfg) {
  std::string text = "seed=" + std::to_string(cfg.seed) + "\n";
  const std::string snap = cfg.snapshot();
  std::size_t pos = 0;
  while (pos < snap.size()) {
    const std::size_t end = snap.find('\n', pos);
    const std::string line = snap.substr(pos, end - pos);
    if (line.rfind("synth.", 0) == 0) text += line + "\n";
    pos = end == std::string::npos ? snap.size() : end + 1;
  }
  return fnv1a64(text);
}

fs::path out_dir(const CommandOptions& opts, const GlobalConfig& cfg, const char* sub = nullptr) {
  if (opts.out) return *opts.out;
  return sub ? cfg.output_dir / sub : cfg.output_dir;
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create directory " + dir.string() + ": " + ec.message());
}

void print_results(const EvalOutput& eval, std::ostream& log) {
  const auto& r = eval.report;
  log << "threshold mode " << to_string(r.mode) << ", threshold " << format_double(r.threshold_used) << "\n";
  log << "intra artefact " << eval.intra.artefact << ": d_eer " << format_double(eval.intra.d_eer) << ", hter "
      << format_double(eval.intra.hter) << "\n";
  for (const auto& m : r.per_artefact)
    log << "test artefact " << m.artefact << ": apcer " << format_double(m.apcer) << ", bpcer "
        << format_double(m.bpcer) << ", hter " << format_double(m.hter) << ", d_eer " << format_double(m.d_eer)
        << "\n";
  log << "mean d_eer " << format_double(r.aggregate.d_eer.mean) << " +- " << format_double(r.aggregate.d_eer.sd)
      << "\n";
}

Checkpoint make_checkpoint(const RunRecord& run, const GlobalConfig& cfg) {
  Checkpoint ck = run.model.to_checkpoint();
  ck.config_hash = run.config_hash;
  ck.dataset_hash = run.dataset_hash;
  ck.meta["seed"] = std::to_string(cfg.seed);
  ck.meta["train_artefact"] = std::to_string(cfg.protocol.train_artefact);
  ck.meta["bands"] = cfg.protocol.bands.to_string();
  ck.meta["ablation"] = cfg.protocol.ablation.name();
  return ck;
}

void write_run(const fs::path& dir, const RunRecord& run, const GlobalConfig& cfg) {
  make_dir(dir);
  write_text(dir / "config.snapshot", cfg.snapshot());
  make_checkpoint(run, cfg).save(dir / "checkpoint.bin");
  write_eval_outputs(dir, run.eval);
  write_text(dir / "dev_loss.csv", dev_loss_csv(run.bands));
  write_text(dir / "loss_trace.csv", loss_trace_csv(run.bands));
  write_text(dir / "run.json", run_json(run));
  write_text(dir / "audit.json", audit_json(run.audit));
}

void check_audit(const AuditResult& a) {
  require(a.violations() == 0, ErrorKind::kProtocol,
          "split access audit failed: " + std::to_string(a.violations()) + " violation(s)");
}

// ---------------------------------------------------------------- analysis

struct SourceRows {
  std::string source;
  std::vector<ArtefactSeparability> rows;
  std::vector<double> d_fb_sum, d_fb_mean, bandwidth;
};

Mat gather(const FeatureTable& t, const std::function<bool(int label, int artefact)>& keep) {
  std::vector<Eigen::Index> idx;
  for (std::size_t i = 0; i < t.labels.size(); ++i)
    if (keep(t.labels[i], t.artefacts[i])) idx.push_back(static_cast<Eigen::Index>(i));
  Mat m(static_cast<Eigen::Index>(idx.size()), t.values.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) m.row(static_cast<Eigen::Index>(r)) = t.values.row(idx[r]);
  return m;
}

SourceRows separability_for(const std::string& source, const FeatureTable& table,
                            const std::map<int, ArtefactMetrics>& metrics, FbAggregation agg) {
  SourceRows out;
  out.source = source;
  const Mat bona = gather(table, [](int label, int) { return label == 0; });
  for (const auto& [a, m] : metrics) {
    const Mat attack = gather(table, [a](int label, int art) { return label == 1 && art == a; });
    require(bona.rows() >= 2 && attack.rows() >= 2, ErrorKind::kProtocol,
            source + ": artefact " + std::to_string(a) + " needs at least two feature rows per class");
    Mat pooled(bona.rows() + attack.rows(), bona.cols());
    pooled << bona, attack;
    const double bw = median_heuristic(pooled);
    ArtefactSeparability s;
    s.artefact = a;
    s.d_fb = fb_distance(bona, attack, agg);
    s.mmd2 = mmd2_unbiased(bona, attack, bw);
    s.eer = m.d_eer;
    s.hter = m.hter;
    out.rows.push_back(s);
    out.d_fb_sum.push_back(fb_distance(bona, attack, FbAggregation::kSum));
    out.d_fb_mean.push_back(fb_distance(bona, attack, FbAggregation::kMean));
    out.bandwidth.push_back(bw);
  }
  return out;
}

/// Same rows as correlate_metrics, but a constant column yields an
/// "undefined" row instead of aborting the whole table.
std::string correlation_rows(const SourceRows& s) {
  const std::pair<const char*, double ArtefactSeparability::*> feats[] = {{"d_fb", &ArtefactSeparability::d_fb},
                                                                          {"mmd2", &ArtefactSeparability::mmd2}};
  const std::pair<const char*, double ArtefactSeparability::*> errs[] = {{"eer", &ArtefactSeparability::eer},
                                                                         {"hter", &ArtefactSeparability::hter}};
  std::string out;
  for (const auto& [fname, fptr] : feats) {
    for (const auto& [ename, eptr] : errs) {
      std::vector<double> x, y;
      for (const auto& r : s.rows) {
        x.push_back(r.*fptr);
        y.push_back(r.*eptr);
      }
      out += s.source + "," + fname + "," + ename + "," + std::to_string(s.rows.size()) + ",";
      try {
        const SpearmanResult res = spearman_jackknife(x, y);
        out += format_double(res.rho) + "," + format_double(res.ci_lo) + "," + format_double(res.ci_hi) + "," +
               format_double(res.p) + "," + (res.exact_p ? "exact" : "t") + ",ok\n";
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kUndefined) throw;
        out += ",,,,,undefined\n";
      }
    }
  }
  return out;
}

constexpr const char* kAnalysisHeader = "source,feature_metric,error_metric,k,rho,ci_lo,ci_hi,p,p_method,status\n";

std::map<int, ArtefactMetrics> read_results(const fs::path& path) {
  const auto rows = parse_csv(read_text(path));
  require(!rows.empty(), ErrorKind::kData, path.string() + ": empty results file");
  std::map<int, ArtefactMetrics> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    require(r.size() == 8, ErrorKind::kData, path.string() + ": malformed row " + std::to_string(i));
    if (r[1] == "mean" || r[1] == "sd") continue;
    ArtefactMetrics m;
    try {
      m.artefact = std::stoi(r[1]);
      m.threshold = std::stod(r[3]);
      m.apcer = std::stod(r[4]);
      m.bpcer = std::stod(r[5]);
      m.hter = std::stod(r[6]);
      m.d_eer = std::stod(r[7]);
    } catch (const std::exception&) {
      fail(ErrorKind::kData, path.string() + ": non-numeric value in row " + std::to_string(i));
    }
    out[m.artefact] = m;
  }
  return out;
}

}  // namespace

GlobalConfig resolve_config(const CommandOptions& opts, const std::string& command) {
  require(!opts.config_path.empty(), ErrorKind::kConfig, "--config is required");
  GlobalConfig cfg = GlobalConfig::load(opts.config_path);
  for (const auto& kv : opts.overrides) {
    const auto eq = kv.find('=');
    require(eq != std::string::npos, ErrorKind::kConfig, "--set expects key=value, got '" + kv + "'");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    cfg.set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.epochs) cfg.protocol.epochs = *opts.epochs;
  if (opts.threshold_mode) cfg.protocol.threshold_mode = parse_threshold_mode(*opts.threshold_mode);
  if (opts.bands) {
    const BandSet b = parse_band_list(*opts.bands);
    cfg.protocol.eval_bands = b;
    // Training commands only fit models for the requested bands; eval keeps
    // the checkpoint's bands and restricts the fusion mask.
    if (command == "train" || command == "ablate") cfg.protocol.bands = b;
  }
  cfg.protocol.seed = cfg.seed;
  cfg.protocol.threads = default_threads();
  cfg.validate();
  return cfg;
}

Dataset load_dataset(const GlobalConfig& cfg) {
  if (cfg.manifest) {
    const fs::path root = cfg.dataset_root.empty() ? cfg.manifest->parent_path() : cfg.dataset_root;
    return Dataset::from_manifest(DatasetManifest::read(*cfg.manifest), root);
  }
  return Dataset::from_synth(synth_generate(cfg.synth, cfg.seed), synth_source_hash(cfg));
}

void cmd_synth(const CommandOptions& opts, std::ostream& log) {
  const GlobalConfig cfg = resolve_config(opts, "synth");
  const fs::path dir = out_dir(opts, cfg, "synth");
  make_dir(dir);
  const SynthDataset data = synth_generate(cfg.synth, cfg.seed);
  // Manifest paths end in <sample_id>_<nm>.<ext>.
  std::map<std::pair<std::string, SpectralBand>, std::string> path_of;
  for (const auto& r : data.manifest.records)
    path_of[{fs::path(sample_key(r.file_path)).filename().string(), r.band}] = r.file_path;
  std::map<int, long long> counts;
  for (const auto& s : data.samples) {
    ++counts[s.artefact_id];
    for (const auto& [band, img] : s.images) {
      auto it = path_of.find({s.sample_id, band});
      require(it != path_of.end(), ErrorKind::kData, "synth: no manifest record for " + s.sample_id);
      const fs::path p = dir / it->second;
      make_dir(p.parent_path());
      write_pgm16(p, img);
    }
  }
  data.manifest.write(dir / "manifest.csv");
  log << "wrote " << data.samples.size() << " samples (" << data.manifest.records.size() << " images) to "
      << dir.string() << "\n";
  log << "bona fide: " << counts[0] << "\n";
  for (int a = 1; a <= 8; ++a) log << "artefact " << a << ": " << counts[a] << "\n";
}

void cmd_train(const CommandOptions& opts, std::ostream& log) {
  const GlobalConfig cfg = resolve_config(opts, "train");
  const Dataset data = load_dataset(cfg);
  const RunRecord run = run_cross_artefact(data, cfg.protocol, cfg.hash());
  const fs::path dir = out_dir(opts, cfg);
  write_run(dir, run, cfg);
  log << "config hash " << hex64(run.config_hash) << ", dataset hash " << hex64(run.dataset_hash) << "\n";
  for (const auto& b : run.bands)
    log << "band " << band_name(b.band) << ": n_eff " << b.n_eff << ", p_k " << format_double(b.p_k)
        << ", selected epoch " << b.selected_epoch << ", dev accuracy " << format_double(b.dev_accuracy) << "\n";
  print_results(run.eval, log);
  log << "run directory " << dir.string() << "\n";
  check_audit(run.audit);
}

void cmd_eval(const CommandOptions& opts, std::ostream& log) {
  const GlobalConfig cfg = resolve_config(opts, "eval");
  const fs::path ck_path = opts.checkpoint ? *opts.checkpoint : cfg.output_dir / "checkpoint.bin";
  const Checkpoint ck = Checkpoint::load(ck_path);
  const Dataset data = load_dataset(cfg);
  if (!opts.force) {
    require(ck.config_hash == cfg.hash(), ErrorKind::kCompatibility,
            "checkpoint config hash " + hex64(ck.config_hash) + " does not match config " + hex64(cfg.hash()) +
                " (use --force to override)");
    require(ck.dataset_hash == data.hash(), ErrorKind::kCompatibility,
            "checkpoint dataset hash " + hex64(ck.dataset_hash) + " does not match dataset " + hex64(data.hash()) +
                " (use --force to override)");
  }
  const PadModel model = PadModel::from_checkpoint(ck, cfg.protocol);
  require(cfg.protocol.eval_bands.intersect(model.bands) == cfg.protocol.eval_bands, ErrorKind::kConfig,
          "--bands names a band the checkpoint has no model for: " + cfg.protocol.eval_bands.to_string());

  AuditResult audit;
  const auto shared = shared_identities(data);
  audit.shared_identities = shared.size();
  audit.identity_disjoint = shared.empty();
  data.access_log().clear();
  const EvalOutput eval = run_evaluation(model, data, cfg.protocol);
  audit.eval_phase_non_test_reads = data.access_log().count(Split::kTrain) + data.access_log().count(Split::kDev);

  const fs::path dir = out_dir(opts, cfg, "eval");
  make_dir(dir);
  write_eval_outputs(dir, eval);
  write_text(dir / "access_audit.json", audit_json(audit));
  print_results(eval, log);
  log << "fusion mask " << cfg.protocol.eval_bands.to_string() << ", output " << dir.string() << "\n";
  check_audit(audit);
}

void cmd_ablate(const CommandOptions& opts, std::ostream& log) {
  const GlobalConfig cfg = resolve_config(opts, "ablate");
  const Dataset data = load_dataset(cfg);
  const auto hash_fn = [&cfg](const ProtocolConfig& p) {
    GlobalConfig c = cfg;
    c.protocol = p;
    return c.hash();
  };
  const auto rows = run_ablation(data, cfg.protocol, hash_fn);
  const fs::path dir = out_dir(opts, cfg, "ablation");
  make_dir(dir);

  std::string table =
      "configuration,removed,dev_loss_selected,intra_d_eer,intra_hter,mean_d_eer,sd_d_eer,mean_hter,sd_hter\n";
  std::string claims;
  const double full = rows.front().dev_loss_selected;
  for (const auto& r : rows) {
    const auto& agg = r.run.eval.report.aggregate;
    table += r.name + "," + csv_field(r.ablation.to_list()) + "," + format_double(r.dev_loss_selected) + "," +
             format_double(r.run.eval.intra.d_eer) + "," + format_double(r.run.eval.intra.hter) + "," +
             format_double(agg.d_eer.mean) + "," + format_double(agg.d_eer.sd) + "," + format_double(agg.hter.mean) +
             "," + format_double(agg.hter.sd) + "\n";
    const fs::path sub = dir / r.name;
    make_dir(sub);
    write_text(sub / "dev_loss.csv", dev_loss_csv(r.run.bands));
    write_text(sub / "loss_trace.csv", loss_trace_csv(r.run.bands));
    write_text(sub / "results.csv", results_csv(r.run.eval.report));
    write_text(sub / "audit.json", audit_json(r.run.audit));
    if (&r == &rows.front()) continue;
    const bool holds = full <= r.dev_loss_selected;
    claims += std::string(holds ? "holds" : "deviation") + ": full " + format_double(full) +
              (holds ? " <= " : " > ") + r.name + " " + format_double(r.dev_loss_selected) + "\n";
  }
  write_text(dir / "ablation.csv", table);
  write_text(dir / "claims.txt", claims);
  log << table << claims;
  for (const auto& r : rows) check_audit(r.run.audit);
}

void cmd_analyze(const CommandOptions& opts, std::ostream& log) {
  const GlobalConfig cfg = resolve_config(opts, "analyze");
  const fs::path run = opts.run_dir ? *opts.run_dir : cfg.output_dir;
  const auto metrics = read_results(run / "results.csv");
  require(metrics.size() >= 4, ErrorKind::kProtocol,
          "correlation analysis needs at least 4 tested artefacts, found " + std::to_string(metrics.size()));

  std::vector<SourceRows> sources;
  sources.push_back(separability_for("fused", read_features(run / "features" / "fused.bin"), metrics,
                                     cfg.fb_aggregation));
  for (SpectralBand b : kAllBands) {
    const fs::path p = run / "features" / (band_name(b) + ".bin");
    if (fs::exists(p)) sources.push_back(separability_for(band_name(b), read_features(p), metrics, cfg.fb_aggregation));
  }

  std::string sep = "source,test_artefact,d_fb_sum,d_fb_mean,mmd2,bandwidth,d_eer,hter\n";
  for (const auto& s : sources)
    for (std::size_t i = 0; i < s.rows.size(); ++i)
      sep += s.source + "," + std::to_string(s.rows[i].artefact) + "," + format_double(s.d_fb_sum[i]) + "," +
             format_double(s.d_fb_mean[i]) + "," + format_double(s.rows[i].mmd2) + "," +
             format_double(s.bandwidth[i]) + "," + format_double(s.rows[i].eer) + "," + format_double(s.rows[i].hter) +
             "\n";

  const std::string fused = std::string(kAnalysisHeader) + correlation_rows(sources.front());
  std::string per_band = kAnalysisHeader;
  for (std::size_t i = 1; i < sources.size(); ++i) per_band += correlation_rows(sources[i]);

  const fs::path dir = opts.out ? *opts.out : run;
  make_dir(dir);
  write_text(dir / "separability.csv", sep);
  write_text(dir / "analysis.csv", fused);
  write_text(dir / "analysis_bands.csv", per_band);
  log << fused;
}

int run_command(const std::string& command, const CommandOptions& opts, std::ostream& log, std::ostream& err) {
  try {
    if (command == "synth")
      cmd_synth(opts, log);
    else if (command == "train")
      cmd_train(opts, log);
    else if (command == "eval")
      cmd_eval(opts, log);
    else if (command == "ablate")
      cmd_ablate(opts, log);
    else if (command == "analyze")
      cmd_analyze(opts, log);
    else
      fail(ErrorKind::kConfig, "unknown command '" + command + "'");
    return 0;
  } catch (const Error& e) {
    err << "spectrapad: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "spectrapad: I/O error: " << e.what() << "\n";
    return exit_code(ErrorKind::kIo);
  } catch (const std::exception& e) {
    err << "spectrapad: error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace spectrapad
