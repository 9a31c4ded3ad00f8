// qcseis command-line entry point.
//
// Exit codes: 0 success, 1 selftest failure, 2 bad flags or config, 3 I/O
// failure, 4 training divergence, 5 checkpoint/data mismatch.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "qcseis/config.hpp"
#include "qcseis/trainer.hpp"
#include "selftest.hpp"

namespace fs = std::filesystem;
using namespace qcseis;

namespace {

enum Exit { kOk = 0, kSelftest = 1, kUsage = 2, kIo = 3, kDiverged = 4, kMismatch = 5 };

struct Mismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << j.dump(2) << '\n';
  if (!os) throw IoError("write failed for " + path.string());
}

SeismicDataset load_split(const fs::path& dir, const char* name) {
  const auto path = dir / name;
  if (!fs::exists(path)) throw IoError("missing dataset file " + path.string() + " (run gen-data first)");
  return read_seis(path);
}

// ---- gen-data --------------------------------------------------------------

struct GenDataArgs {
  std::string task;
  std::string out;
  std::size_t n = 100;
  std::size_t height = 64, width = 64;
  std::uint64_t seed = 0;
  bool clean = false;
};

int cmd_gen_data(const GenDataArgs& a) {
  RunConfig cfg;
  json data{{"task", a.task}, {"n_patches", a.n}, {"height", a.height}, {"width", a.width}, {"seed", a.seed},
            {"dir", a.out}};
  cfg = run_config_from_json(json{{"data", data}});
  apply_seed_override(cfg);
  const auto res = build_dataset(cfg.data.degradation, cfg.data.gather, cfg.data.n_patches, cfg.data.dir);
  if (a.clean) {
    // Control set: the input is the clean target itself.
    for (const auto& f : res.files) {
      if (f.extension() == ".json") {
        std::ifstream is(f);
        json side = json::parse(is);
        side["clean_input"] = true;
        is.close();
        write_json(f, side);
        continue;
      }
      SeismicDataset ds = read_seis(f);
      for (auto& e : ds.entries) {
        e.degraded = e.target;
        std::fill(e.mask.begin(), e.mask.end(), 1);
      }
      write_seis(f, ds);
    }
  }
  std::cout << "task " << to_string(cfg.data.degradation.task) << " train " << res.split.train << " val "
            << res.split.val << " test " << res.split.test;
  for (const auto& f : res.files) std::cout << " | " << f.filename().string() << " " << fs::file_size(f) << " B";
  std::cout << '\n';
  return kOk;
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string resume;
  int workers = 0;
  bool verbose = false;
};

int cmd_train(const TrainArgs& a) {
  RunConfig cfg = load_run_config(a.config);
  apply_seed_override(cfg);
  if (a.workers > 0) cfg.train.workers = a.workers;

  const fs::path out = cfg.out_dir;
  fs::create_directories(out);
  write_json(out / "resolved_config.json", run_config_to_json(cfg));

  const SeismicDataset train = load_split(cfg.data.dir, "train.seis");
  const SeismicDataset val = load_split(cfg.data.dir, "val.seis");
  if (train.task != cfg.data.degradation.task)
    throw Mismatch("dataset task '" + to_string(train.task) + "' differs from config task '" +
                   to_string(cfg.data.degradation.task) + "'");

  TrainerOptions opts{out, a.verbose};
  std::unique_ptr<Trainer> trainer;
  if (!a.resume.empty()) {
    trainer = Trainer::resume(a.resume, opts);
    if (!(trainer->model().config() == [&] {
          NetConfig m = cfg.model;
          m.kind = trainer->model().config().kind;
          return m;
        }()))
      throw ArchitectureMismatch("resume checkpoint architecture differs from the config model section");
    trainer->set_epochs(cfg.train.epochs);
    trainer->set_workers(cfg.train.workers);
  } else {
    trainer = std::make_unique<Trainer>(cfg.family(), cfg.model, cfg.train, opts);
  }
  trainer->fit(train, &val);

  double last_train = 0;
  for (const auto& r : trainer->history())
    if (r.split == "train") last_train = r.mae;
  json summary{{"family", to_string(trainer->family())},
               {"epochs", trainer->epochs_done()},
               {"steps", trainer->global_step()},
               {"final_train_mae", last_train},
               {"best_val_mae", trainer->best_val_mae()},
               {"clip_events", trainer->clip_events()},
               {"history", (out / "history.csv").string()},
               {"checkpoint", (out / "last.qckp").string()}};
  std::cout << summary.dump() << '\n';
  return kOk;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string report = "report.csv";
  std::string spectra_dir;
  bool identity = false;
  int workers = 0;
};

void dump_spectra(const fs::path& dir, std::size_t id, const DatasetEntry& e, std::span<const real> pred) {
  const std::size_t T = e.target.t, S = e.target.s, mid = S / 2;
  std::vector<double> tt(T), tp(T), td(T);
  for (std::size_t t = 0; t < T; ++t) {
    tt[t] = e.target.at(t, mid);
    tp[t] = pred[t * S + mid];
    td[t] = e.degraded.at(t, mid);
  }
  const auto st = amplitude_spectrum(tt, e.target.dt);
  const auto sp = amplitude_spectrum(tp, e.target.dt);
  const auto sd = amplitude_spectrum(td, e.target.dt);
  {
    std::ofstream os(dir / ("sample_" + std::to_string(id) + "_spectrum.csv"));
    os << "frequency_hz,target,prediction,degraded\n" << std::setprecision(8);
    for (std::size_t k = 0; k < st.frequency_hz.size(); ++k)
      os << st.frequency_hz[k] << ',' << st.magnitude[k] << ',' << sp.magnitude[k] << ',' << sd.magnitude[k] << '\n';
    if (!os) throw IoError("cannot write spectra to " + dir.string());
  }
  const std::vector<real> target(e.target.data.begin(), e.target.data.end());
  const auto ft = fk_spectrum(target, T, S, e.target.dt, e.target.dx);
  const auto fp = fk_spectrum(pred, T, S, e.target.dt, e.target.dx);
  std::ofstream os(dir / ("sample_" + std::to_string(id) + "_fk.csv"));
  os << "frequency_hz,wavenumber_per_m,target_db,prediction_db\n" << std::setprecision(8);
  for (std::size_t r = 0; r < ft.rows(); ++r)
    for (std::size_t c = 0; c < ft.cols(); ++c)
      os << ft.frequency_hz[r] << ',' << ft.wavenumber_per_m[c] << ',' << ft.db[r * ft.cols() + c] << ','
         << fp.db[r * fp.cols() + c] << '\n';
  if (!os) throw IoError("cannot write spectra to " + dir.string());
}

int cmd_eval(const EvalArgs& a) {
  const SeismicDataset ds = read_seis(a.data);
  std::unique_ptr<Network> net;
  std::function<Tensor(const Tensor&)> predict;
  if (a.identity) {
    predict = [](const Tensor& x) { return x; };
  } else {
    if (a.checkpoint.empty()) throw CLI::ValidationError("--checkpoint is required unless --identity is given");
    const Checkpoint ck = read_checkpoint(a.checkpoint);
    const std::string family = ck.meta.value("family", "");
    const std::string main = family == "gan" ? "generator" : "unet";
    if (!ck.meta.contains("models") || !ck.meta["models"].contains(main))
      throw CheckpointError("checkpoint has no '" + main + "' model");
    const NetConfig cfg = net_config_from_json(ck.meta["models"][main]);
    if (static_cast<std::size_t>(cfg.height) != ds.t || static_cast<std::size_t>(cfg.width) != ds.s)
      throw Mismatch("checkpoint expects " + std::to_string(cfg.height) + "x" + std::to_string(cfg.width) +
                     " patches, data has " + std::to_string(ds.t) + "x" + std::to_string(ds.s));
    if (family_for_task(ds.task) != (family == "gan" ? Family::Gan : Family::UNet))
      throw Mismatch("checkpoint family '" + family + "' cannot evaluate task '" + to_string(ds.task) + "'");
    net = make_network(cfg);
    import_network(*net, main, ck);
    net->set_workers(a.workers > 0 ? a.workers : default_workers());
    predict = [&net](const Tensor& x) { return net->forward(x, Mode::Eval); };
  }

  const EvalReport rep = evaluate(ds, predict);
  rep.write_csv(a.report);
  if (!a.spectra_dir.empty()) {
    fs::create_directories(a.spectra_dir);
    NoGradGuard guard;
    for (std::size_t i = 0; i < ds.entries.size(); ++i) {
      const std::size_t idx[1] = {i};
      const Batch b = make_batch(ds, idx);
      const Tensor p = predict(b.degraded);
      dump_spectra(a.spectra_dir, i, ds.entries[i], p.data());
    }
  }
  const auto agg = rep.aggregate();
  json summary{{"task", rep.task},     {"samples", rep.samples.size()}, {"mae", agg.mae},
               {"rmse", agg.rmse},     {"ssim", agg.ssim},               {"report", a.report}};
  summary["psnr_db"] = std::isfinite(agg.psnr_db) ? json(agg.psnr_db) : json("inf");
  std::cout << summary.dump() << '\n';
  return kOk;
}

// ---- selftest ----------------------------------------------------------------

int cmd_selftest(const cli::SelftestOptions& o) {
  const auto results = cli::run_selftest(o, std::cout);
  std::size_t failed = 0;
  for (const auto& r : results) {
    if (!r.passed) {
      if (failed == 0) std::cerr << "selftest failed: " << r.name << " (" << r.detail << ")\n";
      ++failed;
    }
  }
  std::cout << (failed ? "FAILED " : "OK ") << results.size() - failed << "/" << results.size() << " checks passed\n";
  return failed ? kSelftest : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantum-classical hybrid networks for seismic restoration"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* g = app.add_subcommand("gen-data", "Generate a synthetic dataset (train/val/test SEIS files)");
  g->add_option("--task", gen.task, "interpolation_random | interpolation_regular | denoise | lfe")->required();
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--n", gen.n, "Number of patches (split 8:1:1)")->capture_default_str();
  g->add_option("--height", gen.height, "Time samples per patch")->capture_default_str();
  g->add_option("--width", gen.width, "Traces per patch")->capture_default_str();
  g->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
  g->add_flag("--clean", gen.clean, "Store the clean target as the input too");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a QC-GAN or QC-UNet from a JSON config");
  t->add_option("--config", tr.config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  t->add_option("--resume", tr.resume, "Checkpoint to continue from")->check(CLI::ExistingFile);
  t->add_option("--workers", tr.workers, "Quantum-layer worker threads (default: config)");
  t->add_flag("--verbose", tr.verbose, "Per-epoch progress on stderr");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score a checkpoint on a SEIS file");
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint (.qckp)");
  e->add_option("--data", ev.data, "SEIS file")->required();
  e->add_option("--report", ev.report, "Per-sample metrics CSV")->capture_default_str();
  e->add_option("--spectra-dir", ev.spectra_dir, "Write amplitude and F-K spectra CSVs here");
  e->add_flag("--identity", ev.identity, "Score the degraded input itself instead of a model");
  e->add_option("--workers", ev.workers, "Quantum-layer worker threads (default: all cores)");

  cli::SelftestOptions st;
  auto* s = app.add_subcommand("selftest", "Run the numerical verification suite");
  s->add_option("--inject-fault", st.inject_fault, "Deliberately break a component (ry)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kUsage;
  }

  try {
    if (*g) return cmd_gen_data(gen);
    if (*t) return cmd_train(tr);
    if (*e) return cmd_eval(ev);
    if (*s) return cmd_selftest(st);
  } catch (const CLI::Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kUsage;
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.what() << '\n';
    return kUsage;
  } catch (const DivergenceError& err) {
    std::cerr << "diverged: " << err.what() << '\n';
    return kDiverged;
  } catch (const ArchitectureMismatch& err) {
    std::cerr << "mismatch: " << err.what() << '\n';
    return kMismatch;
  } catch (const Mismatch& err) {
    std::cerr << "mismatch: " << err.what() << '\n';
    return kMismatch;
  } catch (const IoError& err) {
    std::cerr << "i/o error: " << err.what() << '\n';
    return kIo;
  } catch (const FormatError& err) {
    std::cerr << "i/o error: " << err.what() << '\n';
    return kIo;
  } catch (const std::filesystem::filesystem_error& err) {
    std::cerr << "i/o error: " << err.what() << '\n';
    return kIo;
  } catch (const std::invalid_argument& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kUsage;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kIo;
  }
  return kOk;
}
