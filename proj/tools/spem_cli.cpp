// spem: command-line front end for corpus generation, blink injection,
// training, imputation, refinement, evaluation and reporting.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "spem/blinks.hpp"
#include "spem/checkpoint.hpp"
#include "spem/harness.hpp"
#include "spem/plots.hpp"
#include "spem/resample.hpp"
#include "spem/synthgen.hpp"

namespace fs = std::filesystem;
using namespace spem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error("cannot read " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void spit(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw Error("cannot write " + p.string());
  out << text;
}

// A directory with manifest.json is read through the manifest so split
// assignments survive; otherwise every *.csv is loaded.
Dataset load_any(const fs::path& dir) {
  const auto manifest = dir / "manifest.json";
  return fs::exists(manifest) ? load_manifest(manifest) : load_sequences(dir);
}

std::vector<GazeSequence> pick(const Dataset& ds, const std::string& split) {
  if (split == "all") return ds.sequences;
  const Split want = parse_split(split);
  std::vector<GazeSequence> out;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (ds.split[i] == want) out.push_back(ds.sequences[i]);
  return out;
}

fs::path mask_path(const fs::path& dir, const std::string& id) { return dir / (id + ".mask"); }

MissingMask coarse_mask_of(const MissingMask& fine, std::size_t factor) {
  const std::size_t n = (fine.length() + factor - 1) / factor;
  std::vector<std::size_t> per(n, 0), out;
  for (auto i : fine.indices()) ++per[i / factor];
  for (std::size_t b = 0; b < n; ++b) {
    const std::size_t width = std::min(factor, fine.length() - b * factor);
    if (2 * per[b] > width) out.push_back(b);
  }
  return MissingMask(std::move(out), n);
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Smooth-pursuit gaze reconstruction: decimate, impute, upsample, refine."};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic corpus");
  std::string gen_config, gen_out;
  std::size_t gen_participants = 0, gen_test = 0;
  std::uint64_t gen_seed = 1;
  bool gen_recorded = false;
  gen->add_option("--config", gen_config, "Corpus JSON (participants, tasks, model ranges)");
  gen->add_option("--participants", gen_participants, "Override participant count");
  gen->add_option("--seed", gen_seed, "Random seed");
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_flag("--recorded", gen_recorded, "Add natural blinks with artifacts");
  gen->add_option("--test-participants", gen_test, "Participants assigned to the test split (0: no split)");

  // stats
  auto* st = app.add_subcommand("stats", "Blink statistics of a corpus");
  std::string st_data, st_out;
  blinks::DetectionParams st_params;
  st->add_option("--data", st_data, "Corpus directory")->required();
  st->add_option("--out", st_out, "Output JSON")->required();
  st->add_option("--slope-thresh", st_params.slope_thresh, "deg/sample");
  st->add_option("--stable-run", st_params.stable_run, "samples");
  st->add_option("--merge-gap", st_params.merge_gap, "samples");

  // inject
  auto* inj = app.add_subcommand("inject", "Insert artificial blinks or the 4 s gap");
  std::string inj_in, inj_out, inj_mask, inj_stats, inj_gap = "blinks", inj_split = "all";
  std::uint64_t inj_seed = 1;
  std::size_t inj_max = 0;
  inj->add_option("--input", inj_in, "Sequence CSV or corpus directory")->required();
  inj->add_option("--stats", inj_stats, "Blink statistics JSON");
  inj->add_option("--seed", inj_seed, "Random seed");
  inj->add_option("--out", inj_out, "Output CSV or directory")->required();
  inj->add_option("--mask", inj_mask, "Mask sidecar (file mode)");
  inj->add_option("--gap", inj_gap, "blinks | large-gap");
  inj->add_option("--split", inj_split, "Directory mode: all | train | test");
  inj->add_option("--max", inj_max, "Directory mode: at most this many sequences");

  // train
  auto* tr = app.add_subcommand("train", "Train a SAITS or RAE model");
  std::string tr_method, tr_data, tr_stats, tr_config, tr_out, tr_split = "train";
  int tr_fold = 0, tr_folds = 1;
  std::uint64_t tr_seed = 1;
  std::size_t tr_factor = 30;
  bool tr_paper = false;
  tr->add_option("--method", tr_method, "saits | rae")->required();
  tr->add_option("--data", tr_data, "Corpus directory")->required();
  tr->add_option("--stats", tr_stats, "Blink statistics JSON (saits artificial masks)");
  tr->add_option("--config", tr_config, "Model config JSON, merged over the desk defaults");
  tr->add_flag("--paper-scale", tr_paper, "Start from the paper-scale config");
  tr->add_option("--fold", tr_fold, "Fold index");
  tr->add_option("--folds", tr_folds, "Fold count");
  tr->add_option("--split", tr_split, "Sequences to train on: all | train | test");
  tr->add_option("--factor", tr_factor, "Decimation factor");
  tr->add_option("--seed", tr_seed, "Random seed");
  tr->add_option("--out", tr_out, "Checkpoint path")->required();

  // impute
  auto* im = app.add_subcommand("impute", "Decimate, impute and (optionally) upsample/refine");
  std::string im_method, im_in, im_out, im_model, im_rae, im_library, im_scenario = "U", im_config;
  std::size_t im_factor = 30;
  bool im_splice = false;
  im->add_option("--method", im_method, "pchip | ssa | knn | saits")->required();
  im->add_option("--input", im_in, "Corrupted CSV or directory")->required();
  im->add_option("--out", im_out, "Output CSV or directory")->required();
  im->add_option("--model", im_model, "SAITS checkpoint");
  im->add_option("--rae", im_rae, "RAE checkpoint (scenario RAE)");
  im->add_option("--library", im_library, "KNN library corpus directory (complete sequences)");
  im->add_option("--scenario", im_scenario, "D | U | RAE");
  im->add_option("--config", im_config, "Method config JSON ({\"ssa\": {...}, \"knn\": {...}})");
  im->add_option("--factor", im_factor, "Decimation factor");
  im->add_flag("--splice-gaps", im_splice, "Refine only inside gaps");

  // refine
  auto* rf = app.add_subcommand("refine", "Apply a trained RAE to an upsampled sequence");
  std::string rf_model, rf_in, rf_mask, rf_out;
  bool rf_splice = false;
  rf->add_option("--model", rf_model, "RAE checkpoint")->required();
  rf->add_option("--input", rf_in, "Upsampled CSV")->required();
  rf->add_option("--mask", rf_mask, "Mask sidecar");
  rf->add_option("--out", rf_out, "Output CSV")->required();
  rf->add_flag("--splice-gaps", rf_splice, "Replace only mask positions");

  // eval
  auto* ev = app.add_subcommand("eval", "Score reconstructions against ground truth");
  std::string ev_orig, ev_imp, ev_mask, ev_method, ev_out, ev_scenario = "U";
  std::size_t ev_factor = 30;
  ev->add_option("--original", ev_orig, "Ground-truth CSV or directory")->required();
  ev->add_option("--imputed", ev_imp, "Reconstruction CSV or directory")->required();
  ev->add_option("--mask", ev_mask, "Mask file or directory of <id>.mask")->required();
  ev->add_option("--method", ev_method, "Method label")->required();
  ev->add_option("--scenario", ev_scenario, "D | U | RAE");
  ev->add_option("--factor", ev_factor, "Decimation factor (scenario D)");
  ev->add_option("--out", ev_out, "Reports JSON")->required();

  // report
  auto* rp = app.add_subcommand("report", "Aggregate report files into a table");
  std::vector<std::string> rp_in;
  std::string rp_out;
  rp->add_option("--reports", rp_in, "Reports JSON files")->required();
  rp->add_option("--out", rp_out, "Table CSV")->required();

  // plot
  auto* pl = app.add_subcommand("plot", "Overlay and spectrogram SVGs for experiment artifacts");
  std::string pl_dir;
  pl->add_option("--results", pl_dir, "Experiment output directory")->required();

  // experiment
  auto* ex = app.add_subcommand("experiment", "Run a full experiment from a JSON config");
  std::string ex_config, ex_out;
  bool ex_plots = false;
  ex->add_option("--config", ex_config, "Experiment JSON")->required();
  ex->add_option("--out", ex_out, "Output directory (overrides the config)");
  ex->add_flag("--plots", ex_plots, "Emit SVG plots afterwards");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      synth::CorpusSpec spec = gen_config.empty() ? synth::CorpusSpec{}
                                                  : synth::corpus_spec_from_json(slurp(gen_config));
      if (gen_participants) spec.n_participants = gen_participants;
      Dataset ds = gen_recorded ? synth::make_recorded_corpus(spec, {}, gen_seed).second
                                : synth::make_corpus(spec, gen_seed);
      if (gen_test) {
        if (gen_test >= spec.n_participants) throw Error("gen: --test-participants must leave training participants");
        ds = split_by_participant(ds, spec.n_participants - gen_test, gen_test, mix_seed(gen_seed, 0x5917));
      }
      save_dataset(gen_out, ds);
      std::cout << "wrote " << ds.size() << " sequences to " << gen_out << "\n";
    } else if (*st) {
      const auto stats = blinks::blink_statistics(load_any(st_data), st_params);
      blinks::write_stats(st_out, stats);
      std::cout << "blinks: " << stats.durations.size() << " over " << stats.counts.size()
                << " sequences\n";
    } else if (*inj) {
      const GapMode mode = parse_gap_mode(inj_gap);
      blinks::BlinkStats stats;
      if (mode == GapMode::Blinks) {
        if (inj_stats.empty()) throw Error("inject: --stats is required for blink injection");
        stats = blinks::read_stats(inj_stats);
      }
      if (fs::is_directory(inj_in)) {
        std::size_t n = 0;
        for (const auto& s : pick(load_any(inj_in), inj_split)) {
          if (!s.complete()) continue;
          if (inj_max && n >= inj_max) break;
          const auto id = s.meta().id();
          const auto r = corrupt(s, stats, mode, mix_seed(inj_seed, hash_string(id)));
          write_sequence(fs::path(inj_out) / (id + ".csv"), r.corrupted);
          write_mask(mask_path(inj_out, id), r.truth);
          ++n;
        }
        std::cout << "corrupted " << n << " sequences\n";
      } else {
        const auto s = read_sequence(inj_in);
        const auto r = corrupt(s, stats, mode, inj_seed);
        write_sequence(inj_out, r.corrupted);
        write_mask(inj_mask.empty() ? fs::path(inj_out).replace_extension(".mask") : fs::path(inj_mask),
                   r.truth);
      }
    } else if (*tr) {
      const Dataset ds = load_any(tr_data);
      const auto seqs = pick(ds, fs::exists(fs::path(tr_data) / "manifest.json") ? tr_split : "all");
      if (seqs.empty()) throw Error("train: no sequences selected");
      if (tr_method == "saits") {
        SaitsConfig cfg = tr_paper ? SaitsConfig::paper() : SaitsConfig::desk();
        if (!tr_config.empty()) {
          auto j = nlohmann::json::parse(saits_config_to_json(cfg));
          j.update(nlohmann::json::parse(slurp(tr_config)));
          cfg = saits_config_from_json(j.dump());
        }
        blinks::BlinkStats stats = tr_stats.empty() ? blinks::BlinkStats{} : blinks::read_stats(tr_stats);
        std::vector<GazeSequence> coarse;
        for (const auto& s : seqs) {
          const auto c = downsample(mask_detected_blinks(s, {}), tr_factor);
          try {
            coarse.push_back(zscore(c).first);
          } catch (const Error&) {
          }
        }
        cfg.seq_len = coarse.front().size();
        cfg.factor = tr_factor;
        auto r = train_saits(coarse, cfg, stats, tr_seed, tr_fold, tr_folds);
        save_checkpoint(tr_out, r.model);
        std::cout << "best epoch " << r.best_epoch << ", validation loss "
                  << r.val_loss[static_cast<std::size_t>(r.best_epoch - 1)] << "\n";
      } else if (tr_method == "rae") {
        RaeConfig cfg = tr_paper ? RaeConfig::paper() : RaeConfig::desk();
        if (!tr_config.empty()) {
          auto j = nlohmann::json::parse(rae_config_to_json(cfg));
          j.update(nlohmann::json::parse(slurp(tr_config)));
          cfg = rae_config_from_json(j.dump());
        }
        cfg.factor = tr_factor;
        std::vector<GazeSequence> complete;
        for (const auto& s : seqs)
          if (s.complete()) complete.push_back(s);
        auto r = train_rae(complete, cfg, tr_seed, tr_fold);
        save_checkpoint(tr_out, r.model);
        std::cout << "best epoch " << r.best_epoch << ", validation MSE "
                  << r.val_loss[static_cast<std::size_t>(r.best_epoch - 1)] << "\n";
      } else {
        throw Error("train: --method must be saits or rae");
      }
    } else if (*im) {
      PipelineConfig pc;
      pc.factor = im_factor;
      pc.splice_gaps = im_splice;
      if (!im_config.empty()) {
        const auto j = nlohmann::json::parse(slurp(im_config));
        if (j.contains("ssa")) {
          pc.ssa.window_L = j["ssa"].value("window_L", pc.ssa.window_L);
          pc.ssa.rank_r = j["ssa"].value("rank_r", pc.ssa.rank_r);
          pc.ssa.energy_threshold = j["ssa"].value("energy_threshold", pc.ssa.energy_threshold);
        }
        if (j.contains("knn")) {
          pc.knn.k = j["knn"].value("k", pc.knn.k);
          pc.knn.context = j["knn"].value("context", pc.knn.context);
        }
      }
      MethodModels mm;
      const auto method = canonical_method(im_method);
      if (method == "SAITS") {
        if (im_model.empty()) throw Error("impute: --model is required for saits");
        mm.saits = std::make_shared<SaitsModel>(load_saits(im_model));
      }
      if (method == "KNN") {
        if (im_library.empty()) throw Error("impute: --library is required for knn");
        for (const auto& s : load_any(im_library).sequences)
          if (s.complete()) mm.knn_library.push_back(zscore(downsample(s, pc.factor)).first);
      }
      const Scenario sc = parse_scenario(im_scenario);
      std::shared_ptr<RaeModel> rae;
      if (sc == Scenario::Refined) {
        if (im_rae.empty()) throw Error("impute: --rae is required for scenario RAE");
        rae = std::make_shared<RaeModel>(load_rae(im_rae));
      }
      const auto imputer = make_imputer(method, mm, pc);
      auto run = [&](const GazeSequence& s) {
        const auto r = run_pipeline(s, *imputer, rae.get(), sc, pc);
        return sc == Scenario::Downsampled ? r.coarse_imputed : sc == Scenario::Upsampled ? *r.upsampled : *r.refined;
      };
      if (fs::is_directory(im_in)) {
        std::size_t n = 0;
        for (const auto& s : load_sequences(im_in).sequences) {
          write_sequence(fs::path(im_out) / (s.meta().id() + ".csv"), run(s));
          ++n;
        }
        std::cout << "imputed " << n << " sequences\n";
      } else {
        write_sequence(im_out, run(read_sequence(im_in)));
      }
    } else if (*rf) {
      const auto model = load_rae(rf_model);
      const auto s = read_sequence(rf_in);
      const MissingMask mask = rf_mask.empty() ? MissingMask({}, s.size()) : read_mask(rf_mask, s.size());
      write_sequence(rf_out, refine(model, s, mask, rf_splice));
    } else if (*ev) {
      const Scenario sc = parse_scenario(ev_scenario);
      const auto label = canonical_method(ev_method) + suffix(sc);
      std::vector<SequenceReport> reports;
      auto score = [&](const GazeSequence& truth, const GazeSequence& rec, const MissingMask& fine_mask) {
        SequenceReport r;
        r.sequence = truth.meta().id();
        r.method = label;
        if (sc == Scenario::Downsampled)
          r.report = metrics::evaluate(downsample(truth, ev_factor), rec, coarse_mask_of(fine_mask, ev_factor));
        else
          r.report = metrics::evaluate(truth, rec, fine_mask);
        reports.push_back(std::move(r));
      };
      if (fs::is_directory(ev_imp)) {
        for (const auto& rec : load_sequences(ev_imp).sequences) {
          const auto id = rec.meta().id();
          const auto truth = read_sequence(fs::path(ev_orig) / (id + ".csv"));
          score(truth, rec, read_mask(mask_path(ev_mask, id), truth.size()));
        }
      } else {
        const auto truth = read_sequence(ev_orig);
        score(truth, read_sequence(ev_imp), read_mask(ev_mask, truth.size()));
      }
      spit(ev_out, reports_to_json(reports));
    } else if (*rp) {
      std::vector<SequenceReport> all;
      std::vector<std::string> order;
      for (const auto& f : rp_in)
        for (auto& r : reports_from_json(slurp(f))) {
          if (std::find(order.begin(), order.end(), r.method) == order.end()) order.push_back(r.method);
          all.push_back(std::move(r));
        }
      spit(rp_out, table_to_csv(aggregate(all, order)));
      std::cout << slurp(rp_out);
    } else if (*pl) {
      for (const auto& p : plots::emit_plots(pl_dir)) std::cout << p.string() << "\n";
    } else if (*ex) {
      auto cfg = experiment_config_from_json(slurp(ex_config));
      if (!ex_out.empty()) cfg.output_dir = ex_out;
      if (cfg.output_dir.empty()) throw Error("experiment: no output directory");
      if (ex_plots && cfg.plot_sequences == 0) cfg.plot_sequences = 3;
      const auto res = run_experiment(cfg);
      std::cout << table_to_csv(res.table);
      if (ex_plots) plots::emit_plots(cfg.output_dir);
      for (const auto& f : res.failures) std::cerr << "error: " << f << "\n";
      if (!res.ok()) return 2;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
