// Copyright 2026 The listener-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

// vividlistener: dataset generation, training, sampling, evaluation and
// inspection for the listener generator.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vivid/vivid.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace vivid;

namespace {

// ---------------------------------------------------------------------------
// Run-directory plumbing

/// Exclusive lock file held for the lifetime of one command.
class RunLock {
 public:
  explicit RunLock(const fs::path& dir) : path_(dir / ".vivid.lock") {
    fs::create_directories(dir);
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (f == nullptr) {
      fail(Errc::io, "run directory " + dir.string() + " is locked by another command (remove " + path_.string() +
                         " if it is stale)");
    }
    std::fclose(f);
  }
  ~RunLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  fs::path path_;
};

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_hash(const fs::path& p) { return hex64(fnv1a64(binio::read_file(p))); }

/// Hash over the manifest and every sample file it lists.
std::string dataset_hash(const DatasetManifest& m) {
  std::uint64_t h = fnv1a64(binio::read_file(m.root / "manifest.json"));
  for (const auto& e : m.samples) h = fnv1a64(binio::read_file(m.root / e.path), h);
  return hex64(h);
}

void write_run_json(const fs::path& path, const std::string& command, const std::vector<std::string>& argv,
                    const RunConfig& cfg, const json& inputs) {
  const json j{{"tool", "vividlistener"},
               {"format_version", 1},
               {"command", command},
               {"argv", argv},
               {"config", to_json(cfg)},
               {"inputs", inputs}};
  binio::write_file(path, j.dump(2) + "\n");
}

bool directory_has_entries(const fs::path& dir) {
  return fs::exists(dir) && fs::is_directory(dir) && fs::directory_iterator(dir) != fs::directory_iterator();
}

// ---------------------------------------------------------------------------
// Options shared by every subcommand

struct Globals {
  std::string profile = "desk";
  std::string config;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> argv;

  RunConfig resolve() const {
    std::optional<fs::path> path;
    if (!config.empty()) path = fs::path(config);
    return resolve_config(profile, path, seed, std::getenv("VLDN_SEED"));
  }
};

void print_header(const std::string& command, const RunConfig& cfg) {
  std::printf("%s: profile=%s seed=%llu (%s) L=%lld T=%d ddim=%d batch=%d lr=%g epochs=%d\n", command.c_str(),
              cfg.profile.c_str(), static_cast<unsigned long long>(cfg.seed), cfg.seed_source.c_str(),
              static_cast<long long>(cfg.model.frames), cfg.model.timesteps, cfg.ddim_steps, cfg.train.batch_size,
              cfg.train.adam.lr, cfg.train.epochs);
  std::fflush(stdout);
}

// ---------------------------------------------------------------------------
// gen-data

struct GenDataArgs {
  std::string out;
  std::optional<std::size_t> n;
  std::optional<long long> frames;
  std::optional<double> test_fraction;
  bool force = false;
};

int cmd_gen_data(const Globals& g, const GenDataArgs& a) {
  RunConfig cfg = g.resolve();
  if (a.n) cfg.data.n_samples = *a.n;
  if (a.frames) {
    require(*a.frames > 0 && *a.frames % kFramesPerTag == 0, Errc::usage,
            "--frames must be a positive multiple of 6 (30 fps motion over 5 Hz tags), got " + std::to_string(*a.frames));
    cfg.data.frames = *a.frames;
    cfg.model.frames = *a.frames;
  }
  if (a.test_fraction) cfg.data.test_fraction = *a.test_fraction;
  cfg.validate();

  const fs::path out(a.out);
  if (directory_has_entries(out)) {
    require(a.force, Errc::usage, "output directory " + out.string() + " is not empty (pass --force to overwrite)");
    // Only the files this command writes are removed.
    for (const char* name : {"manifest.json", "samples", "stats.txt", "run.json"}) fs::remove_all(out / name);
  }
  RunLock lock(out);
  const DatasetManifest m = generate_synthetic_dataset(cfg.data, out);
  write_run_json(out / "run.json", "gen-data", g.argv, cfg, json::object());
  std::printf("wrote %zu samples (train %zu, test %zu, L=%lld) to %s\n", m.samples.size(), m.train.size(),
              m.test.size(), static_cast<long long>(m.frames), out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// train-predictor

struct TrainPredictorArgs {
  std::string data;
  std::string out;
  std::optional<int> epochs;
};

int cmd_train_predictor(const Globals& g, const TrainPredictorArgs& a) {
  RunConfig cfg = g.resolve();
  if (a.epochs) cfg.predictor_train.epochs = *a.epochs;
  cfg.validate();
  const DatasetManifest m = read_manifest(a.data);
  const fs::path out(a.out);
  RunLock lock(out);
  std::printf("train-predictor: seed=%llu (%s) epochs=%d batch=%d lr=%g hidden=%lld layers=%d\n",
              static_cast<unsigned long long>(cfg.seed), cfg.seed_source.c_str(), cfg.predictor_train.epochs,
              cfg.predictor_train.batch_size, cfg.predictor_train.adam.lr,
              static_cast<long long>(cfg.predictor.hidden), cfg.predictor.layers);
  std::fflush(stdout);

  const auto encoder = make_text_encoder(cfg.model.text_encoder, cfg.model.d_text);
  const auto train = load_items<float>(m, m.train, *encoder);
  const auto heldout = load_items<float>(m, m.test, *encoder);
  IntensityPredictor<float> p(cfg.predictor);
  std::string csv = "epoch,mse\n";
  const PredictorReport r = train_predictor(p, train, heldout, cfg.predictor_train, [&](int epoch, double mse) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%d,%.9g\n", epoch, mse);
    csv += buf;
    std::printf("epoch %d mse %.6f\n", epoch, mse);
    std::fflush(stdout);
  });
  const json report{{"train_mse", r.train_mse},
                    {"heldout_mse", r.heldout_mse},
                    {"baseline_mse", r.baseline_mse},
                    {"arousal_pearson", r.arousal_pearson},
                    {"valence_pearson", r.valence_pearson},
                    {"heldout_items", heldout.size()}};
  binio::write_file(out / "predictor_loss.csv", csv);
  binio::write_file(out / "predictor_report.json", report.dump(2) + "\n");
  save_checkpoint(predictor_checkpoint(p, true, json{{"report", report}}), out / "predictor.vlck");
  write_run_json(out / "run.json", "train-predictor", g.argv, cfg, json{{"data", dataset_hash(m)}});
  std::printf("held-out VA MSE %.6f (zero baseline %.6f), arousal r=%.3f, valence r=%.3f\n", r.heldout_mse,
              r.baseline_mse, r.arousal_pearson, r.valence_pearson);
  std::printf("wrote %s\n", (out / "predictor.vlck").c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string data;
  std::string predictor;
  std::string out;
  std::optional<int> epochs;
  bool resume = false;
  bool dry_run = false;
};

int cmd_train(const Globals& g, const TrainArgs& a) {
  RunConfig cfg = g.resolve();
  if (a.epochs) cfg.train.epochs = *a.epochs;
  require(!a.predictor.empty(), Errc::usage,
          "train needs --predictor <checkpoint>: the frozen intensity predictor written by train-predictor");
  const DatasetManifest m = read_manifest(a.data);
  // The dataset fixes the sequence length.
  cfg.model.frames = m.frames;
  cfg.data.frames = m.frames;
  cfg.validate();
  print_header("train", cfg);
  const auto predictor = load_predictor<float>(a.predictor);
  const fs::path out(a.out);
  const fs::path resume = a.resume ? out / "checkpoint.vlck" : fs::path();
  if (a.resume) {
    require(fs::exists(resume), Errc::missing_file, "--resume: no checkpoint at " + resume.string());
    const Checkpoint ck = load_checkpoint(resume);
    require(ck.header.at("config") == to_json(cfg.model), Errc::usage,
            "--resume: checkpoint model config differs from the resolved config");
    std::printf("resuming from epoch %d\n", ck.header.at("epoch").get<int>());
  }
  if (a.dry_run) return 0;

  RunLock lock(out);
  json inputs{{"data", dataset_hash(m)}, {"predictor", file_hash(a.predictor)}};
  if (a.resume) inputs["resume"] = file_hash(resume);
  write_run_json(out / "run.json", "train", g.argv, cfg, inputs);

  const auto encoder = make_text_encoder(cfg.model.text_encoder, cfg.model.d_text);
  const auto items = load_items<float>(m, m.train, *encoder);
  ListenerModel<float> model(cfg.model);
  const NoiseSchedule schedule = cosine_schedule(cfg.model.timesteps, cfg.schedule_offset);
  const auto result =
      train_diffusion(model, *predictor, items, schedule, m.stats, cfg.train, out, resume, [](const EpochLog& e) {
        std::printf("epoch %d total %.6f simple %.6f emotional %.6f vel %.6f\n", e.epoch, e.loss.total,
                    e.loss.simple, e.loss.emotional, e.loss.vel);
        std::fflush(stdout);
      });
  std::printf("wrote %s and %s\n", result.checkpoint.c_str(), (out / "loss.csv").c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// sample

struct SampleArgs {
  std::string checkpoint;
  std::string data;
  std::string id;
  std::string split;
  std::string text;
  std::optional<double> valence;
  std::optional<double> arousal;
  std::optional<int> ddim_steps;
  std::string out;
  std::string out_dir;
  std::string plot;
  std::string csv;
  std::vector<long long> channels{0, 1, 2, 50, 51, 52};
};

void check_va(const std::optional<double>& v, const char* flag) {
  if (v) require(*v >= -1.0 && *v <= 1.0, Errc::usage, std::string(flag) + " must be in [-1, 1], got " + std::to_string(*v));
}

/// Conditions for a dataset sample with optional text and VA overrides.
DyadSample with_overrides(DyadSample s, const SampleArgs& a) {
  if (!a.text.empty()) s.text.description = a.text;
  if (a.valence) s.tags.va.col(0).setConstant(*a.valence);
  if (a.arousal) s.tags.va.col(1).setConstant(*a.arousal);
  return s;
}

/// Ad-hoc conditions: a still speaker at the training mean pose, silent
/// audio, the given text and constant VA tags.
ConditionInputs<float> adhoc_conditions(const SampleArgs& a, const LoadedModel& lm, const TextEncoder& encoder) {
  require(!a.text.empty() && a.valence && a.arousal, Errc::usage,
          "ad-hoc sampling needs --text, --valence and --arousal (or --data with --id)");
  const Eigen::Index L = lm.model->config().frames;
  MotionSequence speaker;
  speaker.frames = lm.stats.speaker.mean.replicate(L, 1);
  MelFeatures audio{MatD::Zero(kMelBins, kAudioFramesPerMotionFrame * L)};
  IntensityTrack tags;
  tags.va.resize(L / kFramesPerTag, 2);
  tags.va.col(0).setConstant(*a.valence);
  tags.va.col(1).setConstant(*a.arousal);
  return ConditionInputs<float>::build(speaker, audio, a.text, tags, lm.stats, encoder);
}

void export_extras(const MotionSequence& m, const SampleArgs& a, const std::string& title) {
  if (!a.plot.empty()) {
    std::vector<Eigen::Index> ch(a.channels.begin(), a.channels.end());
    binio::write_file(a.plot, svg_channel_plot(m.frames, ch, title));
  }
  if (!a.csv.empty()) binio::write_file(a.csv, frames_csv(m.frames));
}

int cmd_sample(const Globals& g, const SampleArgs& a) {
  RunConfig cfg = g.resolve();
  check_va(a.valence, "--valence");
  check_va(a.arousal, "--arousal");
  require(!a.checkpoint.empty(), Errc::usage, "sample needs --checkpoint");
  const bool batch = !a.out_dir.empty();
  require(batch != !a.out.empty(), Errc::usage, "pass exactly one of --out (one sample) or --out-dir (a split)");
  require(!batch || !a.data.empty(), Errc::usage, "--out-dir needs --data");
  require(!batch || (a.plot.empty() && a.csv.empty()), Errc::usage, "--plot and --csv apply to single samples");

  LoadedModel lm = load_model(a.checkpoint);
  cfg.model = lm.model->config();
  if (a.ddim_steps) {
    cfg.ddim_steps = *a.ddim_steps;
  } else if (cfg.ddim_steps > cfg.model.timesteps) {
    std::fprintf(stderr, "note: checkpoint has T=%d, sampling with %d DDIM steps\n", cfg.model.timesteps,
                 cfg.model.timesteps);
    cfg.ddim_steps = cfg.model.timesteps;
  }
  cfg.validate();
  const auto encoder = make_text_encoder(cfg.model.text_encoder, cfg.model.d_text);
  const NoiseSchedule schedule = cosine_schedule(cfg.model.timesteps, cfg.schedule_offset);
  json inputs{{"checkpoint", file_hash(a.checkpoint)}};

  auto run_one = [&](const ConditionInputs<float>& in, const std::string& key) {
    return sample_listener(*lm.model, in, schedule, cfg.ddim_steps, mix_seed(cfg.seed, fnv1a64(key)), lm.stats.listener);
  };

  if (batch) {
    const DatasetManifest m = read_manifest(a.data);
    inputs["data"] = dataset_hash(m);
    const std::string split = a.split.empty() ? "test" : a.split;
    require(split == "test" || split == "train", Errc::usage, "--split must be test or train");
    const auto& ids = split == "test" ? m.test : m.train;
    const fs::path out(a.out_dir);
    RunLock lock(out);
    write_run_json(out / "run.json", "sample", g.argv, cfg, inputs);
    for (const auto& id : ids) {
      const DyadSample s = with_overrides(m.load(id), a);
      s.validate();
      save_motion(run_one(ConditionInputs<float>::build(s, lm.stats, *encoder), id), out / (id + ".vldm"));
    }
    std::printf("wrote %zu samples to %s\n", ids.size(), out.c_str());
    return 0;
  }

  MotionSequence motion;
  std::string title;
  if (!a.id.empty()) {
    require(!a.data.empty(), Errc::usage, "--id needs --data");
    const DatasetManifest m = read_manifest(a.data);
    inputs["data"] = dataset_hash(m);
    const DyadSample s = with_overrides(m.load(a.id), a);
    s.validate();
    motion = run_one(ConditionInputs<float>::build(s, lm.stats, *encoder), a.id);
    title = a.id;
  } else {
    motion = run_one(adhoc_conditions(a, lm, *encoder), "adhoc");
    title = a.text;
  }
  const fs::path out(a.out);
  save_motion(motion, out);
  export_extras(motion, a, title);
  write_run_json(out.string() + ".run.json", "sample", g.argv, cfg, inputs);
  std::printf("wrote %s (%lld frames)\n", out.c_str(), static_cast<long long>(motion.length()));
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string data;
  std::string generated;
  std::string out;
  std::string split = "test";
  bool against_self = false;
};

int cmd_eval(const Globals& g, const EvalArgs& a) {
  RunConfig cfg = g.resolve();
  const DatasetManifest m = read_manifest(a.data);
  require(a.split == "test" || a.split == "train", Errc::usage, "--split must be test or train");
  require(a.against_self != !a.generated.empty(), Errc::usage, "pass exactly one of --generated or --against-self");
  const auto& ids = a.split == "test" ? m.test : m.train;
  std::vector<DyadSample> reference;
  for (const auto& id : ids) reference.push_back(m.load(id));

  std::map<std::string, MotionSequence> generated;
  json inputs{{"data", dataset_hash(m)}};
  if (a.against_self) {
    for (const auto& s : reference) generated[s.sample_id] = s.listener_motion;
  } else {
    const fs::path dir(a.generated);
    require(fs::is_directory(dir), Errc::missing_file, "--generated: no directory " + dir.string());
    std::uint64_t h = fnv1a64("");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.path().extension() == ".vldm") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const std::string bytes = binio::read_file(f);
      h = fnv1a64(bytes, h);
      generated[f.stem().string()] = load_motion(f);
    }
    inputs["generated"] = hex64(h);
  }
  const metrics::MetricReport report = metrics::evaluate_suite(metrics::pair_by_id(generated, reference), cfg.metrics);
  std::cout << metrics::report_table(report);
  const fs::path out(a.out);
  RunLock lock(out);
  metrics::write_report(report, out / "metrics.json", out / "metrics.csv");
  write_run_json(out / "run.json", "eval", g.argv, cfg, inputs);
  std::printf("wrote %s and %s\n", (out / "metrics.json").c_str(), (out / "metrics.csv").c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// inspect

void inspect_dataset(const fs::path& dir) {
  const DatasetManifest m = read_manifest(dir);
  std::printf("dataset %s\n  samples %zu (train %zu, test %zu)\n  frames %lld\n  seed %llu\n  hash %s\n",
              dir.c_str(), m.samples.size(), m.train.size(), m.test.size(), static_cast<long long>(m.frames),
              static_cast<unsigned long long>(m.seed), dataset_hash(m).c_str());
}

void inspect_sample(const fs::path& p) {
  const DyadSample s = decode_sample(binio::read_file(p), p.string(), p.stem().string());
  s.validate();
  std::printf("sample %s\n  frames %lld, mel bins %lld, audio frames %lld, tags %lld\n  text \"%s\"\n",
              s.sample_id.c_str(), static_cast<long long>(s.length()), static_cast<long long>(s.speaker_audio.bins()),
              static_cast<long long>(s.speaker_audio.frames()), static_cast<long long>(s.tags.length()),
              s.text.description.c_str());
  std::printf("  mean valence %.4f, mean arousal %.4f\n", s.tags.va.col(0).mean(), s.tags.va.col(1).mean());
}

void inspect_motion(const fs::path& p) {
  const MotionSequence m = load_motion(p);
  std::printf("motion %s\n  frames %lld, channels %lld\n", p.c_str(), static_cast<long long>(m.frames.rows()),
              static_cast<long long>(m.frames.cols()));
  if (m.frames.rows() >= 2 && m.frames.cols() == kMotionDims) {
    std::printf("  temporal variance exp %.6g, pose %.6g\n",
                metrics::temporal_variance({MatD(m.frames.leftCols(kExprDims))}),
                metrics::temporal_variance({MatD(m.frames.rightCols(kPoseDims))}));
  }
}

void inspect_checkpoint(const fs::path& p) {
  const Checkpoint ck = load_checkpoint(p);
  std::size_t scalars = 0;
  for (const auto& t : ck.tensors) scalars += t.data.size();
  json header = ck.header;
  header.erase("normalization_stats");
  std::printf("checkpoint %s\n  tensors %zu, scalars %zu\n  header %s\n", p.c_str(), ck.tensors.size(), scalars,
              header.dump(2).c_str());
}

int cmd_inspect(const std::string& target) {
  const fs::path p(target);
  if (fs::is_directory(p)) {
    inspect_dataset(p);
    return 0;
  }
  const std::string bytes = binio::read_file(p);
  const std::string magic = bytes.substr(0, 4);
  if (magic == "VLDX") {
    inspect_sample(p);
  } else if (magic == "VLDM") {
    inspect_motion(p);
  } else if (magic == "VLCK") {
    inspect_checkpoint(p);
  } else if (p.extension() == ".json") {
    json j;
    try {
      j = json::parse(bytes);
    } catch (const json::parse_error& e) {
      fail(Errc::bad_magic, p.string() + ": invalid JSON: " + e.what());
    }
    if (j.value("format", "") == "vivid-metrics") {
      std::cout << metrics::report_table(metrics::report_from_json(j));
    } else {
      std::cout << j.dump(2) << "\n";
    }
  } else {
    fail(Errc::bad_magic, p.string() + ": unrecognized file (expected a dataset directory, .vldx, .vldm, .vlck or .json)");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Globals g;
  g.argv.assign(argv + 1, argv + argc);

  CLI::App app{"Listener motion generation: data, training, sampling and evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--profile", g.profile, "Built-in settings: desk or paper")->check(CLI::IsMember({"desk", "paper"}));
  app.add_option("--config", g.config, "INI file applied on top of the profile");
  app.add_option("--seed", g.seed, "Run seed (overrides VLDN_SEED and the config file)");

  GenDataArgs gd;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dyadic dataset");
  gen->add_option("--out", gd.out, "Output directory")->required();
  gen->add_option("--n", gd.n, "Number of samples");
  gen->add_option("--frames", gd.frames, "Frames per sample (multiple of 6)");
  gen->add_option("--test-fraction", gd.test_fraction, "Share of samples held out");
  gen->add_flag("--force", gd.force, "Overwrite a non-empty output directory");

  TrainPredictorArgs tp;
  auto* trp = app.add_subcommand("train-predictor", "Train and freeze the VA intensity predictor");
  trp->add_option("--data", tp.data, "Dataset directory")->required();
  trp->add_option("--out", tp.out, "Run directory")->required();
  trp->add_option("--epochs", tp.epochs, "Override predictor epochs");

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train the diffusion listener generator");
  tr->add_option("--data", ta.data, "Dataset directory")->required();
  tr->add_option("--predictor", ta.predictor, "Frozen predictor checkpoint from train-predictor");
  tr->add_option("--out", ta.out, "Run directory")->required();
  tr->add_option("--epochs", ta.epochs, "Override training epochs");
  tr->add_flag("--resume", ta.resume, "Continue from <out>/checkpoint.vlck");
  tr->add_flag("--dry-run", ta.dry_run, "Resolve and print the configuration, then stop");

  SampleArgs sa;
  auto* smp = app.add_subcommand("sample", "Generate listener motion");
  smp->add_option("--checkpoint", sa.checkpoint, "Model checkpoint")->required();
  smp->add_option("--data", sa.data, "Dataset directory for --id or --out-dir");
  smp->add_option("--id", sa.id, "Dataset sample whose conditions are used");
  smp->add_option("--split", sa.split, "Split sampled with --out-dir (test or train)");
  smp->add_option("--text", sa.text, "Listener description");
  smp->add_option("--valence", sa.valence, "Constant valence in [-1, 1]");
  smp->add_option("--arousal", sa.arousal, "Constant arousal in [-1, 1]");
  smp->add_option("--ddim-steps", sa.ddim_steps, "Override DDIM steps");
  smp->add_option("--out", sa.out, "Output motion file (.vldm)");
  smp->add_option("--out-dir", sa.out_dir, "Output directory for a whole split");
  smp->add_option("--plot", sa.plot, "Write an SVG of selected channels");
  smp->add_option("--csv", sa.csv, "Write the frame table as CSV");
  smp->add_option("--channels", sa.channels, "Channels drawn by --plot");

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "Compute the metric suite");
  ev->add_option("--data", ea.data, "Dataset directory")->required();
  ev->add_option("--generated", ea.generated, "Directory of <sample_id>.vldm files");
  ev->add_option("--out", ea.out, "Report directory")->required();
  ev->add_option("--split", ea.split, "Reference split (test or train)");
  ev->add_flag("--against-self", ea.against_self, "Evaluate the reference motion against itself");

  std::string target;
  auto* ins = app.add_subcommand("inspect", "Describe a dataset, sample, motion, checkpoint or report");
  ins->add_option("path", target, "File or dataset directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : exit_code(Errc::usage);
  }

  try {
    if (*gen) return cmd_gen_data(g, gd);
    if (*trp) return cmd_train_predictor(g, tp);
    if (*tr) return cmd_train(g, ta);
    if (*smp) return cmd_sample(g, sa);
    if (*ev) return cmd_eval(g, ea);
    if (*ins) return cmd_inspect(target);
  } catch (const Error& e) {
    std::fprintf(stderr, "error (%s): %s\n", errc_name(e.code()), e.what());
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
