// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include <unistd.h>

#include <groupact/groupact.hpp>

#include "metric_fixtures.hpp"
#include "oracle.hpp"
#include "scenario_bank.hpp"

using namespace groupact;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Shared by the pipeline criteria: one bank trained on reseeded variants of
// every scenario, and its synchronous counterpart.
struct Banks {
  BankTrainingResult ahmm;
  double ahmm_seconds = 0;
  std::optional<BankTrainingResult> sync;
};

Banks& banks() {
  static Banks b = [] {
    Banks out;
    const auto t0 = Clock::now();
    out.ahmm = scenarios::train_on(scenarios::all_names());
    out.ahmm_seconds = seconds_since(t0);
    return out;
  }();
  return b;
}

const BankTrainingResult& sync_bank() {
  auto& b = banks();
  if (!b.sync) b.sync = scenarios::train_on(scenarios::all_names(), true);
  return *b.sync;
}

Outcome criterion1() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> len(1, 5), states(1, 3), slack(0, 5);
  double worst = 0;
  int cases = 0;
  for (int rep = 0; rep < 250; ++rep) {
    std::size_t T = len(rng), S = len(rng);
    if (S > T) std::swap(S, T);
    const auto m = oracle::random_model(rng, states(rng), 2 + rep % 3);
    const auto fi = oracle::random_sequence(rng, S, m.dim()), fj = oracle::random_sequence(rng, T, m.dim());
    const std::size_t dt = slack(rng);
    const double truth = oracle::brute_force(m, fi, fj, dt);
    const double got = ahmm_forward(m, fi, fj, dt).log_likelihood;
    ++cases;
    if (truth == 0.0) {
      if (got != kNegInf) worst = INFINITY;
      continue;
    }
    worst = std::max(worst, std::abs(std::expm1(got - std::log(truth))));
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-9 && secs < 10.0,
          std::to_string(cases) + " cases, max rel err " + fmt(worst) + ", " + fmt(secs) + " s"};
}

Outcome criterion2() {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<std::size_t> len(1, 25), states(1, 3);
  double worst = 0;
  for (int rep = 0; rep < 150; ++rep) {
    const std::size_t T = len(rng);
    const auto m = oracle::random_model(rng, states(rng), 6, true);
    const auto fi = oracle::random_sequence(rng, T, 6), fj = oracle::random_sequence(rng, T, 6);
    const double a = ahmm_forward(m, fi, fj, 5).log_likelihood;
    const double b = pair_hmm_log_likelihood(m, fi, fj);
    worst = std::max(worst, std::abs(std::expm1(a - b)));
  }
  return {worst < 1e-9, "150 cases, max rel err " + fmt(worst)};
}

Outcome criterion3() {
  const auto& bank = banks().ahmm.bank;
  double worst = 0;
  std::size_t profiles = 0;
  for (const auto& name : scenarios::all_names()) {
    const auto sc = generate(scenarios::load(name));
    PipelineDiagnostics diag;
    run_pipeline(bank, sc.tracks, {}, std::nullopt, &diag);
    worst = std::max(worst, diag.max_normalization_error);
    profiles += diag.profiles;
  }
  // Every ordered evaluable pair at every frame of one scenario.
  const auto sc = generate(scenarios::load("fight_approach"));
  const auto r = *sc.tracks.frame_range();
  for (Frame t = r.first; t <= r.last; ++t) {
    FrameContext ctx(bank, sc.tracks, t);
    for (PersonId i : ctx.persons())
      for (PersonId j : ctx.persons())
        if (i != j) ctx.profile(i, j);
    worst = std::max(worst, ctx.max_normalization_error());
    profiles += ctx.profiles_computed();
  }
  return {profiles > 0 && worst <= 1e-9,
          std::to_string(profiles) + " profiles, max |sum - 1| " + fmt(worst)};
}

bool non_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] < v[i - 1] - 1e-9 * std::max(1.0, std::abs(v[i - 1]))) return false;
  return true;
}

Outcome criterion4() {
  bool mono = true;
  std::size_t checked = 0;
  for (const BankTrainingResult* res : {static_cast<const BankTrainingResult*>(&banks().ahmm), &sync_bank()})
    for (const auto& l : res->log) {
      mono = mono && non_decreasing(l.pair_log_likelihoods) && non_decreasing(l.group_log_likelihoods);
      ++checked;
    }
  // Two well separated 2-d components.
  std::mt19937_64 rng(5);
  const std::vector<std::vector<double>> means = {{-3.0, 1.0}, {2.5, -2.0}};
  Sequence xs(2);
  for (int n = 0; n < 600; ++n) {
    const auto& mu = means[n % 3 == 0 ? 1 : 0];
    std::vector<double> x{std::normal_distribution<double>(mu[0], 0.8)(rng),
                          std::normal_distribution<double>(mu[1], 0.6)(rng)};
    xs.push_back(x);
  }
  EmOptions opts;
  opts.seed = 1;
  const auto em = fit_em(xs, 2, opts);
  mono = mono && non_decreasing(em.log_likelihoods);
  double worst = 0;
  for (const auto& mu : means) {
    double best = INFINITY;
    for (const auto& c : em.mixture.components()) {
      double d = 0;
      for (std::size_t k = 0; k < 2; ++k) d = std::max(d, std::abs(c.mean[k] - mu[k]));
      best = std::min(best, d);
    }
    worst = std::max(worst, best);
  }
  return {mono && worst <= 0.3, std::to_string(checked) + " activity fits monotone=" + (mono ? "yes" : "no") +
                                    ", max mean error " + fmt(worst)};
}

Outcome criterion5() {
  const auto t0 = Clock::now();
  const double train_secs = banks().ahmm_seconds;
  bool ok = true;
  std::string detail;
  for (const auto& name : {"walk_together", "fight", "run_together", "approach", "split", "chase"}) {
    const auto sc = generate(scenarios::load(name));
    const auto run = scenarios::evaluate(banks().ahmm.bank, sc);
    const double g = *run.report.gcer.value(), e = *run.report.eder.value();
    ok = ok && g == 0.0 && e <= 0.05 && g <= e;
    detail += std::string(name) + " gcer=" + fmt(g) + " eder=" + fmt(e) + "; ";
  }
  const double secs = train_secs + seconds_since(t0);
  ok = ok && secs < 60.0;
  return {ok, detail + "train+detect " + fmt(secs) + " s"};
}

Outcome criterion6() {
  const auto sc = generate(scenarios::load("fight_approach"));
  const auto run = scenarios::evaluate(banks().ahmm.bank, sc);
  const auto skip = scenarios::warmup(sc.annotations, banks().ahmm.bank.config.window);
  std::size_t both = 0, frames = 0;
  for (const auto& d : run.detections) {
    if (skip.contains(d.frame) || !sc.annotations.annotated(d.frame)) continue;
    ++frames;
    const DetectedGroup *fight = nullptr, *lone = nullptr;
    for (const auto& g : d.groups) {
      if (g.members == std::vector<PersonId>{1, 2, 3} && g.label == "Fight") fight = &g;
      if (g.members == std::vector<PersonId>{4}) lone = &g;
    }
    bool linked = false;
    if (fight && lone)
      for (const auto& l : d.links)
        linked = linked || (l.label == "Approach" && ((l.first == fight->id && l.second == lone->id) ||
                                                      (l.first == lone->id && l.second == fight->id)));
    both += linked;
  }
  const double e = *run.report.eder.value();
  return {e <= 0.10 && run.report.gcer.value() <= run.report.eder.value(),
          "eder=" + fmt(e) + ", both levels correct in " + std::to_string(both) + "/" + std::to_string(frames) +
              " frames"};
}

Outcome criterion7() {
  bool ok = true;
  std::string detail;
  for (const auto& name : {"outlier", "outlier2"}) {
    const auto sc = generate(scenarios::load(name));
    auto eder = [&](GrKind gr, bool mv) {
      PipelineConfig cfg;
      cfg.gr = gr;
      cfg.majority_vote = mv;
      const auto run = scenarios::evaluate(banks().ahmm.bank, sc, cfg);
      ok = ok && run.report.gcer.value() <= run.report.eder.value();
      return *run.report.eder.value();
    };
    const double p = eder(GrKind::P, false), mv = eder(GrKind::V, true);
    const double sv = eder(GrKind::SV, false), v = eder(GrKind::V, false);
    ok = ok && p <= mv && sv <= v;
    detail += std::string(name) + " P=" + fmt(p) + " MV=" + fmt(mv) + " SV=" + fmt(sv) + " V=" + fmt(v) + "; ";
  }
  return {ok, detail};
}

Outcome criterion8() {
  const auto spec = scenarios::load("async_walk");
  const auto sc = generate(spec);
  int max_offset = 0;
  for (const auto& g : spec.groups)
    for (const auto& [id, delay] : g.async) max_offset = std::max(max_offset, static_cast<int>(delay));
  const auto a = scenarios::evaluate(banks().ahmm.bank, sc);
  const auto s = scenarios::evaluate(sync_bank().bank, sc);
  const double ga = *a.report.gcer.value(), gs = *s.report.gcer.value();
  return {max_offset >= 3 && ga <= gs,
          "offset " + std::to_string(max_offset) + " frames, gcer ahmm=" + fmt(ga) + " sync=" + fmt(gs)};
}

bool same(const Ratio& r, std::size_t num, std::size_t den) { return r.numerator == num && r.denominator == den; }

Outcome criterion9() {
  const auto truth = fixtures::ten_frame_truth();
  const auto tax = Taxonomy::standard();
  bool ok = true;
  const auto one = score(fixtures::one_error_detections(), truth, tax);
  ok = ok && one.frames == 10 && same(one.tfer, 1, 10) && same(one.gcer, 0, 10) && same(one.eder, 1, 10);
  ok = ok && *one.eder.value() == 0.1;
  ok = ok && same(one.activities.at("Ignore").fa, 1, 10) && same(one.activities.at("Approach").miss, 1, 10);

  const auto mixed = score(fixtures::mixed_error_detections(), truth, tax);
  ok = ok && same(mixed.gcer, 2, 10) && same(mixed.tfer, 4, 10) && same(mixed.eder, 4, 10);
  ok = ok && same(mixed.activities.at("Fight").miss, 3, 10) && same(mixed.activities.at("Approach").miss, 3, 10);
  ok = ok && same(mixed.activities.at("single").miss, 1, 10) && same(mixed.activities.at("Chase").fa, 1, 10);
  ok = ok && same(mixed.activities.at("WalkTogether").fa, 1, 10) && same(mixed.activities.at("Split").fa, 0, 10);
  ok = ok && mixed.error_frames == std::vector<Frame>{2, 5, 7, 8};
  for (const auto* r : {&one, &mixed}) ok = ok && r->gcer.numerator <= r->eder.numerator;
  return {ok, "one-error eder=" + fmt(*one.eder.value()) + ", mixed gcer=" + fmt(*mixed.gcer.value()) +
                  " tfer=" + fmt(*mixed.tfer.value()) + " eder=" + fmt(*mixed.eder.value())};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool run_chain(const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string cli = GROUPACT_CLI;
  auto sh = [&](const std::string& args) {
    const std::string cmd = "\"" + cli + "\" " + args + " > \"" + (dir / "stdout.txt").string() + "\" 2>&1";
    const std::string prev = slurp(dir / "log.txt");
    const int rc = std::system(cmd.c_str());
    std::ofstream(dir / "log.txt", std::ios::binary) << prev << slurp(dir / "stdout.txt");
    return rc == 0;
  };
  std::string train = "train --seed 3 --out \"" + (dir / "model.json").string() + "\"";
  for (const auto& name : scenarios::all_names()) {
    const auto prefix = (dir / name).string();
    const auto seed = scenarios::load(name).seed + 1000;
    if (!sh("simulate --spec \"" + scenarios::path(name) + "\" --seed " + std::to_string(seed) + " --out \"" +
            prefix + "\""))
      return false;
    train += " --tracks \"" + prefix + ".tracks.csv\" --annotations \"" + prefix + ".annotations.jsonl\"";
  }
  if (!sh(train)) return false;
  const auto eval = (dir / "eval").string();
  if (!sh("simulate --spec \"" + scenarios::path("fight_approach") + "\" --out \"" + eval + "\"")) return false;
  if (!sh("detect --tracks \"" + eval + ".tracks.csv\" --model \"" + (dir / "model.json").string() + "\" --out \"" +
          (dir / "det.jsonl").string() + "\""))
    return false;
  return sh("evaluate --detections \"" + (dir / "det.jsonl").string() + "\" --truth \"" + eval +
            ".annotations.jsonl\" --warmup 25 --csv \"" + (dir / "rates.csv").string() + "\"");
}

Outcome criterion10() {
  const auto base = fs::temp_directory_path() / ("groupact_accept_" + std::to_string(::getpid()));
  const fs::path a = base / "a", b = base / "b";
  if (!run_chain(a) || !run_chain(b)) return {false, "CLI chain failed, see " + base.string()};
  std::size_t files = 0;
  std::vector<std::string> differ;
  for (const auto& entry : fs::directory_iterator(a)) {
    ++files;
    if (slurp(entry.path()) != slurp(b / entry.path().filename())) differ.push_back(entry.path().filename().string());
  }
  if (!differ.empty()) return {false, differ.front() + " differs between runs"};
  fs::remove_all(base);
  return {files > 0, std::to_string(files) + " files byte-identical across two runs"};
}

} // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1 ahmm-oracle-equivalence", criterion1}, {"2 hmm-degeneracy", criterion2},
      {"3 correlation-normalization", criterion3}, {"4 em-monotonicity", criterion4},
      {"5 planted-scenario-recovery", criterion5}, {"6 hierarchical-fight-approach", criterion6},
      {"7 grad-vs-mv-ordering", criterion7},       {"8 ahmm-vs-hmm-ordering", criterion8},
      {"9 metrics-exactness", criterion9},         {"10 determinism", criterion10},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
