// groupact: train, detect, evaluate, simulate, export-truth.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include <groupact/groupact.hpp>

namespace fs = std::filesystem;
using namespace groupact;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kModel = 3 };

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes through a temporary file renamed into place on success.
void write_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out << content;
    if (!out.flush()) throw DataError("cannot write " + path);
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw DataError("cannot write " + path);
  }
}

TrackSet load_tracks(const std::string& path, ParseMode mode) {
  std::istringstream in(read_file(path));
  std::vector<ParseIssue> issues;
  auto ts = parse_tracks(in, mode, &issues);
  for (const auto& i : issues) std::cerr << path << ": skipped line " << i.line << ": " << i.message << '\n';
  return ts;
}

AnnotationSet load_annotations(const std::string& path) {
  std::istringstream in(read_file(path));
  return parse_annotations(in);
}

ActivityModelBank load_bank(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("cannot open model " + path);
  return load_model(in);
}

std::vector<FrameDetection> load_detections(const std::string& path) {
  std::istringstream in(read_file(path));
  return parse_detections(in);
}

struct Options {
  // train
  std::vector<std::string> tracks, annotations;
  std::string out;
  std::size_t window = 25, dt = 5, states = 2, mixtures = 2, stride = 5, max_segments = 150, iters = 30;
  std::uint64_t seed = 0;
  bool synchronous = false;
  // detect
  std::string model, gr = "sv", baseline;
  int variant = 1;
  std::optional<std::size_t> det_window, det_dt;
  double tc = 0.1, to = 0.95, tr = 0.3;
  bool smooth = false, debug = false;
  // evaluate
  std::string detections, truth, csv;
  Frame warmup = 0;
  // simulate
  std::string spec;
  std::optional<std::uint64_t> sim_seed;
  bool lenient = false;
};

int cmd_train(const Options& o) {
  if (o.tracks.size() != o.annotations.size())
    throw CLI::ValidationError("--tracks and --annotations must be given the same number of times");
  const auto mode = o.lenient ? ParseMode::Lenient : ParseMode::Strict;
  std::vector<Dataset> data;
  for (std::size_t k = 0; k < o.tracks.size(); ++k)
    data.push_back({load_tracks(o.tracks[k], mode), load_annotations(o.annotations[k])});
  TrainingConfig cfg;
  cfg.bank.window = o.window;
  cfg.bank.slack = o.dt;
  cfg.bank.tc = o.tc;
  cfg.bank.to = o.to;
  cfg.bank.tr = o.tr;
  cfg.states = o.states;
  cfg.mixtures = o.mixtures;
  cfg.stride = o.stride;
  cfg.max_segments = o.max_segments;
  cfg.max_iters = o.iters;
  cfg.seed = o.seed;
  cfg.synchronous = o.synchronous;
  if (cfg.bank.window < 2 || cfg.bank.slack >= cfg.bank.window)
    throw CLI::ValidationError("--window must be at least 2 and --dt below it");
  const auto res = train_bank(data, Taxonomy::standard(), cfg);
  write_atomic(o.out, save_model_string(res.bank));
  for (const auto& l : res.log) {
    std::cout << l.name;
    if (!l.pair_log_likelihoods.empty())
      std::cout << " pair_segments=" << l.pair_segments << " pair_ll=" << l.pair_log_likelihoods.back();
    if (!l.group_log_likelihoods.empty())
      std::cout << " group_segments=" << l.group_segments << " group_ll=" << l.group_log_likelihoods.back();
    if (l.mixture_fallback) std::cout << " (single-component fallback)";
    std::cout << '\n';
  }
  return kOk;
}

int cmd_detect(const Options& o) {
  const auto bank = load_bank(o.model);
  const auto tracks = load_tracks(o.tracks.at(0), o.lenient ? ParseMode::Lenient : ParseMode::Strict);
  PipelineConfig cfg;
  cfg.gr = o.gr == "p" ? GrKind::P : o.gr == "v" ? GrKind::V : GrKind::SV;
  cfg.variant = o.variant;
  cfg.majority_vote = o.baseline == "mv";
  cfg.tc = o.tc;
  cfg.to = o.to;
  cfg.tr = o.tr;
  cfg.window = o.det_window;
  cfg.slack = o.det_dt;
  cfg.smooth = o.smooth;
  cfg.debug = o.debug;
  std::vector<FrameDetection> dets;
  try {
    dets = run_pipeline(bank, tracks, cfg);
  } catch (const std::invalid_argument& e) {
    throw CLI::ValidationError(e.what());
  }
  std::ostringstream out;
  write_detections(out, dets);
  write_atomic(o.out, out.str());
  std::size_t skipped = 0;
  for (const auto& d : dets) skipped += !d.skipped.empty();
  std::cout << "frames=" << dets.size() << " skipped=" << skipped << '\n';
  return kOk;
}

int cmd_evaluate(const Options& o) {
  const auto dets = load_detections(o.detections);
  const auto truth = load_annotations(o.truth);
  std::set<Frame> exclude;
  if (const auto r = truth.frame_range())
    for (Frame t = r->first; t < r->first + o.warmup; ++t) exclude.insert(t);
  const auto rep = score(dets, truth, Taxonomy::standard(), exclude);
  write_report(std::cout, rep);
  if (!o.csv.empty()) {
    std::ostringstream csv;
    write_activity_csv(csv, rep);
    write_atomic(o.csv, csv.str());
  }
  return kOk;
}

int cmd_simulate(const Options& o) {
  ScenarioSpec spec;
  try {
    spec = scenario_from_json(nlohmann::json::parse(read_file(o.spec)));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad scenario spec: ") + e.what());
  }
  if (o.sim_seed) spec.seed = *o.sim_seed;
  const auto sc = generate(spec);
  std::ostringstream tracks, ann;
  write_tracks(tracks, sc.tracks);
  write_annotations(ann, sc.annotations);
  write_atomic(o.out + ".tracks.csv", tracks.str());
  write_atomic(o.out + ".annotations.jsonl", ann.str());
  std::cout << "persons=" << sc.tracks.persons().size() << " samples=" << sc.tracks.size()
            << " records=" << sc.annotations.records().size() << '\n';
  return kOk;
}

int cmd_export_truth(const Options& o) {
  const auto truth = load_annotations(o.truth);
  std::ostringstream out;
  write_detections(out, truth_detections(truth));
  write_atomic(o.out, out.str());
  return kOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Group activity detection from bounding-box tracks.\n\n"
               "Formats:\n"
               "  tracks       CSV lines 'frame,person,x,y,w,h'; '#' starts a comment line\n"
               "  annotations  one JSON object per line:\n"
               "               {\"kind\":\"sym\",\"group_id\":\"g1\",\"label\":\"Fight\",\"frames\":[0,299],\"members\":[1,2,3]}\n"
               "               {\"kind\":\"asym\",\"label\":\"Approach\",\"frames\":[0,299],\"groups\":[\"a4\",\"g1\"]}\n"
               "  model        versioned JSON document written by 'train'\n"
               "  detections   one JSON object per frame: groups (id, label, members), links between\n"
               "               groups (slower group first) and an optional 'skipped' reason\n"
               "  scenario     JSON spec of agents, groups and interactions for 'simulate'\n\n"
               "Exit codes: 0 ok, 1 usage, 2 data error, 3 model error."};
  app.require_subcommand(1);
  Options o;

  auto add_parse_mode = [&](CLI::App* c) {
    auto* strict = c->add_flag("--strict", "Abort on the first malformed track line (default)");
    c->add_flag("--lenient", o.lenient, "Skip malformed track lines and report them")->excludes(strict);
  };
  auto add_thresholds = [&](CLI::App* c) {
    c->add_option("--tc", o.tc, "Active-person threshold on body-size change")->check(CLI::Range(0.0, 1.0));
    c->add_option("--to", o.to, "Pair-seed correlation threshold")->check(CLI::Range(0.0, 1.0));
    c->add_option("--tr", o.tr, "Representative-subset threshold")->check(CLI::Range(0.0, 1.0));
  };

  auto* train = app.add_subcommand("train", "Fit one model per activity from annotated tracks");
  train->add_option("--tracks", o.tracks, "Track CSV (repeatable, paired with --annotations)")->required();
  train->add_option("--annotations", o.annotations, "Annotation file (repeatable)")->required();
  train->add_option("--out", o.out, "Model file to write")->required();
  train->add_option("--window", o.window, "Correlation window length L in frames")->check(CLI::PositiveNumber);
  train->add_option("--dt", o.dt, "Alignment slack at the window end in frames");
  train->add_option("--states", o.states, "Emitting states per model")->check(CLI::Range(1, 8));
  train->add_option("--mixtures", o.mixtures, "Gaussian components per emission")->check(CLI::Range(1, 8));
  train->add_option("--stride", o.stride, "Frames between training windows")->check(CLI::PositiveNumber);
  train->add_option("--max-segments", o.max_segments, "Training windows kept per activity");
  train->add_option("--iters", o.iters, "Maximum EM iterations");
  train->add_option("--seed", o.seed, "Seed for initialization");
  train->add_flag("--synchronous", o.synchronous, "Train synchronous pair HMMs (advance probability 1)");
  add_thresholds(train);
  add_parse_mode(train);

  auto* detect = app.add_subcommand("detect", "Detect groups and activities frame by frame");
  detect->add_option("--tracks", o.tracks, "Track CSV")->required()->expected(1);
  detect->add_option("--model", o.model, "Model file")->required();
  detect->add_option("--out", o.out, "Detections file to write")->required();
  detect->add_option("--gr", o.gr, "Group representative: p, v or sv")->check(CLI::IsMember({"p", "v", "sv"}));
  detect->add_option("--variant", o.variant, "Symmetric labels: 1 seed label, 2 group-feature HMM")
      ->check(CLI::IsMember({1, 2}));
  detect->add_option("--baseline", o.baseline, "Inter-group labels by majority vote ('mv')")
      ->check(CLI::IsMember({"mv"}));
  detect->add_option("--window", o.det_window, "Override the model's window length")->check(CLI::PositiveNumber);
  detect->add_option("--dt", o.det_dt, "Override the model's alignment slack");
  detect->add_option("--seed", o.seed, "Accepted for symmetry; detection is deterministic");
  detect->add_flag("--smooth", o.smooth, "Majority filter of labels over +-2 frames");
  detect->add_flag("--debug", o.debug, "Record group-representative details");
  add_thresholds(detect);
  add_parse_mode(detect);

  auto* evaluate = app.add_subcommand("evaluate", "Score detections against annotations");
  evaluate->add_option("--detections", o.detections, "Detections file")->required();
  evaluate->add_option("--truth", o.truth, "Annotation file")->required();
  evaluate->add_option("--csv", o.csv, "Also write per-activity miss/false-alarm rates as CSV");
  evaluate->add_option("--warmup", o.warmup, "Leave out this many frames at the start of the truth");

  auto* simulate = app.add_subcommand("simulate", "Generate tracks and annotations from a scenario spec");
  simulate->add_option("--spec", o.spec, "Scenario JSON")->required();
  simulate->add_option("--out", o.out, "Output prefix (.tracks.csv, .annotations.jsonl)")->required();
  simulate->add_option("--seed", o.sim_seed, "Override the scenario seed");

  auto* truth = app.add_subcommand("export-truth", "Write annotations in the detections format");
  truth->add_option("--truth", o.truth, "Annotation file")->required();
  truth->add_option("--out", o.out, "Detections file to write")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*train) return cmd_train(o);
    if (*detect) return cmd_detect(o);
    if (*evaluate) return cmd_evaluate(o);
    if (*simulate) return cmd_simulate(o);
    if (*truth) return cmd_export_truth(o);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ModelError& e) {
    std::cerr << "model error: " << e.what() << '\n';
    return kModel;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
