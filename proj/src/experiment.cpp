#include "xtalk/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "xtalk/csv.hpp"
#include "xtalk/errors.hpp"
#include "xtalk/parallel.hpp"
#include "xtalk/random.hpp"
#include "xtalk/spectrum_pipeline.hpp"

namespace xtalk {

namespace {

using ojson = nlohmann::ordered_json;

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_json(const fs::path& path, const ojson& j) { write_text(path, j.dump(2) + "\n"); }

std::string num(double v) { return format_number(v); }

Dataset load_dataset(const fs::path& out, const std::string& ring) {
  const auto path = artifacts::dataset(out, ring);
  if (!fs::exists(path)) throw InputError("missing dataset " + path.string() + " (run gen first)");
  return read_dataset(path);
}

FittedModel load_model(const fs::path& out, const std::string& ring, ModelKind kind) {
  const auto path = artifacts::model(out, ring, kind);
  if (!fs::exists(path)) throw InputError("missing model " + path.string() + " (run fit first)");
  return read_model(path);
}

ojson quantiles_json(const Quantiles& q) {
  return {{"p10", q.p10}, {"p25", q.p25}, {"p50", q.p50}, {"p75", q.p75}, {"p90", q.p90}};
}

// CSV rendered as a markdown table; numbers rounded for reading.
std::string csv_to_markdown(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::ostringstream md;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = csv::split(line);
    md << '|';
    for (const auto& c : cells) {
      std::string shown = c;
      if (!header) {
        char* end = nullptr;
        const double v = std::strtod(c.c_str(), &end);
        if (!c.empty() && end == c.c_str() + c.size() && c.find('.') != std::string::npos) {
          char buf[32];
          std::snprintf(buf, sizeof buf, "%.4f", v);
          shown = buf;
        }
      }
      md << ' ' << shown << " |";
    }
    md << '\n';
    if (header) {
      md << '|';
      for (std::size_t k = 0; k < cells.size(); ++k) md << " --- |";
      md << '\n';
      header = false;
    }
  }
  return md.str();
}

}  // namespace

Experiment::Experiment(ExperimentConfig cfg)
    : cfg_(std::move(cfg)),
      mesh_(build_mesh(cfg_.mesh.unit_length_mm, cfg_.mesh.rows, cfg_.mesh.cols)),
      truth_(cfg_.ground_truth, mesh_.size()) {
  validate(cfg_);
}

RingBench Experiment::bench(const std::string& ring) const {
  const RingConfig rc = make_ring(mesh_, ring_preset(ring));
  const RingPhysics phys = derive_ring_physics(rc, cfg_.optics.round_trip_amplitude, cfg_.optics.phase_offset);
  return RingBench(mesh_, rc, phys, truth_);
}

NoiseSpec Experiment::noise_for(const std::string& ring) const {
  NoiseSpec n = cfg_.noise;
  n.seed = derive_seed(cfg_.noise.seed, ring_stream(ring));
  return n;
}

DatasetOptions Experiment::sampling_for(const std::string& ring) const {
  DatasetOptions o = cfg_.sampling;
  o.sampling_seed = derive_seed(cfg_.sampling.sampling_seed, ring_stream(ring));
  o.split_seed = derive_seed(cfg_.sampling.split_seed, ring_stream(ring));
  return o;
}

namespace artifacts {
fs::path dataset(const fs::path& out, const std::string& ring) { return out / "datasets" / (ring + ".csv"); }
fs::path model(const fs::path& out, const std::string& ring, ModelKind kind) {
  return out / "models" / (ring + "_" + to_string(kind) + ".json");
}
fs::path fit_summary(const fs::path& out) { return out / "tables" / "model_rmse.csv"; }
fs::path eval_summary(const fs::path& out) { return out / "tables" / "eval_summary.json"; }
fs::path lr_weights(const fs::path& out, const std::string& ring) {
  return out / "tables" / ("lr_weights_" + ring + ".csv");
}
fs::path cross_eval(const fs::path& out) { return out / "tables" / "cross_eval.csv"; }
fs::path sweep(const fs::path& out, const std::string& ring) { return out / "tables" / ("sweep_" + ring + ".csv"); }
fs::path sweep_summary(const fs::path& out) { return out / "tables" / "sweep_summary.json"; }
fs::path compensation(const fs::path& out) { return out / "tables" / "compensation.csv"; }
fs::path compensation_summary(const fs::path& out) { return out / "tables" / "compensation_summary.json"; }
fs::path report(const fs::path& out) { return out / "report.md"; }
fs::path resolved_config(const fs::path& out) { return out / "config.json"; }
}  // namespace artifacts

void cmd_gen(const ExperimentConfig& cfg, const fs::path& out, unsigned jobs, std::size_t dump_spectra) {
  const Experiment ex(cfg);
  write_json(artifacts::resolved_config(out), to_json(cfg));
  for (const auto& ring : cfg.rings) {
    const RingBench bench = ex.bench(ring);
    const NoiseSpec noise = ex.noise_for(ring);
    const Dataset ds = build_dataset(bench, noise, ex.sampling_for(ring), jobs);
    write_dataset(artifacts::dataset(out, ring), ds);

    if (dump_spectra > 0) {
      // Raw spectra of the first samples, replayable through `extract`.
      const std::size_t k = std::min(dump_spectra, ds.size());
      const fs::path dir = out / "spectra" / ring;
      const DriftTrack drift(noise.drift_step_std_pm, noise.seed, 2 * ds.size() + 1);
      const std::vector<double> zeros(ds.puc_ids.size(), 0.0);
      std::vector<std::string> ids;
      std::vector<std::vector<double>> phases;
      for (std::size_t j = 0; j < k; ++j) {
        std::vector<double> ph(ds.puc_ids.size());
        for (std::size_t i = 0; i < ph.size(); ++i) {
          ph[i] = ds.phases(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
        }
        char name[32];
        std::snprintf(name, sizeof name, "s%05zu", j);
        write_spectrum_triple(dir, name, bench.measure(zeros, noise, drift, 2 * j),
                              bench.measure(ph, noise, drift, 2 * j + 1),
                              bench.measure(zeros, noise, drift, 2 * j + 2));
        ids.emplace_back(name);
        phases.push_back(std::move(ph));
      }
      write_phase_table(dir / "phases.csv", ds.puc_ids, ids, phases);
    }
  }
}

void cmd_fit(const ExperimentConfig& cfg, const fs::path& out, const std::vector<ModelKind>& kinds,
             unsigned jobs) {
  validate(cfg);
  std::vector<Dataset> data;
  for (const auto& ring : cfg.rings) data.push_back(load_dataset(out, ring));
  parallel_for(data.size() * kinds.size(), jobs, [&](std::size_t t) {
    const Dataset& ds = data[t / kinds.size()];
    const ModelKind kind = kinds[t % kinds.size()];
    write_model(artifacts::model(out, ds.ring_id, kind), fit_model(kind, ds, cfg.models));
  });
}

void cmd_eval(const ExperimentConfig& cfg, const fs::path& out) {
  validate(cfg);
  std::ostringstream table;
  table << "ring,model,train_rmse_pm,test_rmse_pm,n_train,n_test,flags\n";
  ojson summary;
  summary["models"] = ojson::array();
  summary["lr_weight_distance_spearman"] = ojson::object();
  for (const auto& ring : cfg.rings) {
    for (ModelKind kind : kAllModels) {
      const FittedModel m = load_model(out, ring, kind);
      std::string flags;
      for (const auto& f : m.flags) flags += (flags.empty() ? "" : ";") + f;
      table << ring << ',' << to_string(kind) << ',' << num(m.train_rmse) << ','
            << (m.test_rmse ? num(*m.test_rmse) : "") << ',' << m.n_train << ',' << m.n_test << ','
            << flags << '\n';
      summary["models"].push_back(to_json(m));
      if (kind == ModelKind::Lr) {
        const auto diag = weight_distance_diagnostics(m.lr, m.puc_ids, m.distances);
        std::ostringstream w;
        w << "puc_id,distance_mm,weight_pm_per_pi\n";
        for (const auto& r : diag.rows) w << r.puc_id << ',' << num(r.distance) << ',' << num(r.weight) << '\n';
        write_text(artifacts::lr_weights(out, ring), w.str());
        summary["lr_weight_distance_spearman"][ring] = diag.spearman;
      }
    }
  }
  write_text(artifacts::fit_summary(out), table.str());
  write_json(artifacts::eval_summary(out), summary);
}

CrossEvalMatrix cmd_cross_eval(const ExperimentConfig& cfg, const fs::path& out, unsigned jobs) {
  validate(cfg);
  std::vector<Dataset> data;
  std::vector<FittedModel> models;
  for (const auto& ring : cfg.rings) {
    data.push_back(load_dataset(out, ring));
    models.push_back(load_model(out, ring, ModelKind::Thdm));
  }
  std::vector<const Dataset*> ptrs;
  for (const auto& d : data) ptrs.push_back(&d);
  const CrossEvalMatrix mx = cross_eval(models, ptrs, jobs);
  std::ostringstream csv;
  csv << "evaluated_ring";
  for (const auto& r : mx.rings) csv << ",trained_" << r;
  csv << '\n';
  for (std::size_t m = 0; m < mx.rings.size(); ++m) {
    csv << mx.rings[m];
    for (double v : mx.rmse[m]) csv << ',' << num(v);
    csv << '\n';
  }
  write_text(artifacts::cross_eval(out), csv.str());
  return mx;
}

void cmd_sweep(const ExperimentConfig& cfg, const fs::path& out, unsigned jobs) {
  validate(cfg);
  ojson summary = ojson::object();
  summary["std_convention"] = "population (ddof=0) over subsets";
  for (const auto& ring : cfg.rings) {
    const Dataset ds = load_dataset(out, ring);
    std::ostringstream csv;
    csv << "model,size,train_rmse_mean,train_rmse_std,test_rmse_mean,test_rmse_std\n";
    ojson per_ring = ojson::object();
    for (ModelKind kind : kAllModels) {
      const auto res = size_sweep(ds, kind, cfg.sweep.sizes, cfg.sweep.n_subsets,
                                  derive_seed(cfg.sweep.seed, ring_stream(ring)), cfg.models, jobs);
      ojson pts = ojson::array();
      for (const auto& p : res.points) {
        csv << to_string(kind) << ',' << p.size << ',' << num(p.train_mean) << ',' << num(p.train_std) << ','
            << num(p.test_mean) << ',' << num(p.test_std) << '\n';
        pts.push_back({{"size", p.size},
                       {"train_mean", p.train_mean},
                       {"train_std", p.train_std},
                       {"test_mean", p.test_mean},
                       {"test_std", p.test_std}});
      }
      per_ring[to_string(kind)] = pts;
    }
    summary[ring] = per_ring;
    write_text(artifacts::sweep(out, ring), csv.str());
  }
  write_json(artifacts::sweep_summary(out), summary);
}

void cmd_compensate(const ExperimentConfig& cfg, const fs::path& out, unsigned jobs) {
  const Experiment ex(cfg);
  std::ostringstream csv;
  csv << "trained_ring,evaluated_ring,sample_id,delta_meas_pm,delta_pred_pm,phi_comp_rad,per_puc_phi_rad,"
         "delta_post_comp_pm\n";
  ojson summary;
  summary["percentile_rule"] = "linear interpolation between closest ranks, position q(n-1)";
  summary["model"] = "thdm";
  summary["pairs"] = ojson::object();

  std::vector<FittedModel> models;
  for (const auto& ring : cfg.rings) models.push_back(load_model(out, ring, ModelKind::Thdm));
  for (const auto& eval_ring : cfg.rings) {
    const Dataset ds = load_dataset(out, eval_ring);
    const RingBench bench = ex.bench(eval_ring);
    const auto seed = derive_seed(cfg.compensation.seed, ring_stream(eval_ring));
    const auto rows = pick_test_samples(ds, cfg.compensation.n_samples, seed);
    for (const auto& m : models) {
      const std::vector<double> dist = ds.distances;
      const ShiftPredictor pred = [&m, dist](std::span<const double> ph) {
        return predict_thdm(m.thdm, ph, dist);
      };
      const auto recs = run_compensation(bench, ex.noise_for(eval_ring), pred, ds, rows,
                                         derive_seed(seed, ring_stream(m.ring_id)), jobs);
      for (const auto& r : recs) {
        csv << m.ring_id << ',' << eval_ring << ',' << r.sample_id << ',' << num(r.delta_meas) << ','
            << num(r.delta_pred) << ',' << num(r.phi_comp) << ',' << num(r.per_puc_phi) << ','
            << num(r.delta_post_comp) << '\n';
      }
      const BoxplotSummary box = boxplot_summary(recs);
      summary["pairs"][m.ring_id + "->" + eval_ring] = {
          {"trained_ring", m.ring_id},
          {"evaluated_ring", eval_ring},
          {"n", recs.size()},
          {"delta_meas", quantiles_json(box.delta_meas)},
          {"delta_pred", quantiles_json(box.delta_pred)},
          {"delta_post_comp", quantiles_json(box.delta_post_comp)}};
    }
  }
  write_text(artifacts::compensation(out), csv.str());
  write_json(artifacts::compensation_summary(out), summary);
}

std::string cmd_report(const fs::path& out) {
  std::vector<fs::path> needed = {artifacts::resolved_config(out), artifacts::fit_summary(out),
                                  artifacts::cross_eval(out), artifacts::sweep_summary(out),
                                  artifacts::compensation_summary(out)};
  std::vector<std::string> rings;
  if (fs::exists(artifacts::resolved_config(out))) {
    const auto cfg = parse_config(read_text(artifacts::resolved_config(out)),
                                  artifacts::resolved_config(out).string());
    rings = cfg.rings;
    for (const auto& r : rings) needed.push_back(artifacts::sweep(out, r));
  }
  std::string missing;
  for (const auto& p : needed) {
    if (!fs::exists(p)) missing += "\n  " + p.string();
  }
  if (!missing.empty()) throw InputError("missing artifacts:" + missing);

  std::ostringstream md;
  md << "# Thermal crosstalk experiment report\n\n";
  md << "## Model accuracy\n\nRMSE of the fitted models on each ring (pm).\n\n"
     << csv_to_markdown(read_text(artifacts::fit_summary(out))) << '\n';
  md << "## Cross-ring evaluation\n\nThDM trained on the column ring, tested on the row ring (RMSE, pm).\n\n"
     << csv_to_markdown(read_text(artifacts::cross_eval(out))) << '\n';
  md << "## Training-set size sweep\n\nMean and population std over resampled subsets (pm).\n\n";
  for (const auto& r : rings) {
    md << "### " << r << "\n\n" << csv_to_markdown(read_text(artifacts::sweep(out, r))) << '\n';
  }
  md << "## Compensation\n\nPercentiles of the shift before and after compensation with ThDM (pm).\n\n";
  const auto comp = nlohmann::json::parse(read_text(artifacts::compensation_summary(out)));
  md << "| trained -> evaluated | quantity | p10 | p25 | p50 | p75 | p90 |\n"
     << "| --- | --- | --- | --- | --- | --- | --- |\n";
  for (const auto& [key, pair] : comp.at("pairs").items()) {
    for (const char* q : {"delta_meas", "delta_pred", "delta_post_comp"}) {
      const auto& v = pair.at(q);
      char buf[160];
      std::snprintf(buf, sizeof buf, "| %s | %s | %.4f | %.4f | %.4f | %.4f | %.4f |\n", key.c_str(), q,
                    v.at("p10").get<double>(), v.at("p25").get<double>(), v.at("p50").get<double>(),
                    v.at("p75").get<double>(), v.at("p90").get<double>());
      md << buf;
    }
  }
  md << "\nPercentile rule: " << comp.at("percentile_rule").get<std::string>() << ".\n";
  write_text(artifacts::report(out), md.str());
  return md.str();
}

void cmd_extract(const fs::path& spectra_dir, double fsr, const fs::path& samples_csv, unsigned jobs) {
  const ExtractedBatch batch = extract_batch(spectra_dir, fsr, jobs);
  std::ostringstream s;
  write_samples_csv(s, batch);
  write_text(samples_csv, s.str());
}

void cmd_run(const ExperimentConfig& cfg, const fs::path& out, unsigned jobs) {
  cmd_gen(cfg, out, jobs);
  cmd_fit(cfg, out, {std::begin(kAllModels), std::end(kAllModels)}, jobs);
  cmd_eval(cfg, out);
  cmd_cross_eval(cfg, out, jobs);
  cmd_sweep(cfg, out, jobs);
  cmd_compensate(cfg, out, jobs);
  cmd_report(out);
}

}  // namespace xtalk
