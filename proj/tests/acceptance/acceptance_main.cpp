#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "../oracles.hpp"
#include "gsda/attack.hpp"
#include "gsda/experiment.hpp"
#include "gsda/metrics.hpp"
#include "gsda/model.hpp"
#include "gsda/shapes.hpp"
#include "gsda/spectral.hpp"

using namespace gsda;
using Clock = std::chrono::steady_clock;

namespace {

// Tolerances and thresholds.
constexpr double kOrthoTol = 1e-8;
constexpr double kLambdaZeroTol = 1e-8;
constexpr double kRoundTripTol = 1e-9;
constexpr double kParsevalRelTol = 1e-8;
constexpr double kTransformSeconds = 60.0;
constexpr double kEnergyFloor = 0.85;
constexpr double kFdStep = 1e-4;
constexpr double kFdRelTol = 1e-4;
constexpr double kFdGradFloor = 1e-6;
constexpr double kVictimAccuracy = 0.90;
constexpr double kVictimSeconds = 300.0;
constexpr double kUntargetedRate = 0.95;
constexpr double kTargetedRate = 0.85;
constexpr double kAttackSeconds = 1800.0;
constexpr double kIdentityRelTol = 1e-8;
constexpr double kIdentityZero = 1e-12;
constexpr double kInversionAllowance = 0.02;
constexpr double kSorRatio = 0.1;
constexpr double kKVariation = 0.5;

constexpr int kSuiteSize = 100;
constexpr int kKSuiteSize = 30;
constexpr std::uint64_t kPoolSeed = 1000;
constexpr int kPoolPerClass = 25;
constexpr std::uint64_t kSuiteSeed = 0;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

struct Outcome {
  bool pass = false;
  std::string detail;
  bool report_only = false;
};

nlohmann::json g_report = nlohmann::json::object();

// ---- shared state -------------------------------------------------------------

struct Victim {
  Classifier model;
  double test_accuracy = 0.0;
  double train_seconds = 0.0;
  bool deterministic = false;
};

const Victim& victim() {
  static const Victim v = [] {
    const auto ds = gen_dataset(DatasetConfig{});
    Victim out;
    const auto t0 = Clock::now();
    out.model = Classifier(ModelConfig{});
    train(out.model, ds.train, TrainConfig{});
    out.train_seconds = seconds_since(t0);
    out.test_accuracy = accuracy(out.model, ds.test);
    Classifier again{ModelConfig{}};
    train(again, ds.train, TrainConfig{});
    out.deterministic = again.parameters() == out.model.parameters();
    return out;
  }();
  return v;
}

// Correctly classified clouds from a fresh dataset the victim never saw.
const std::vector<PointCloud>& suite_clouds() {
  static const std::vector<PointCloud> clouds = [] {
    DatasetConfig dc;
    dc.seed = kPoolSeed;
    dc.per_class = kPoolPerClass;
    auto ds = gen_dataset(dc);
    std::vector<PointCloud> pool = ds.train;
    pool.insert(pool.end(), ds.test.begin(), ds.test.end());
    return select_correct(victim().model, pool, kSuiteSize);
  }();
  return clouds;
}

int worker_count() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

struct TimedSuite {
  SuiteOutput out;
  double seconds = 0.0;
};

TimedSuite run_suite(const std::vector<PointCloud>& clouds, AttackConfig cfg, AttackMethod method, int jobs) {
  cfg.record_trace = false;
  const auto t0 = Clock::now();
  TimedSuite s{run_attack_suite(victim().model, clouds, cfg, method, jobs, kSuiteSeed), 0.0};
  s.seconds = seconds_since(t0);
  return s;
}

AttackConfig defaults(AttackMode mode) {
  AttackConfig cfg;
  cfg.mode = mode;
  return cfg;
}

const TimedSuite& untargeted_suite() {
  static const TimedSuite s = run_suite(suite_clouds(), defaults(AttackMode::kUntargeted), AttackMethod::kGsda, 1);
  return s;
}

const TimedSuite& targeted_suite() {
  static const TimedSuite s = run_suite(suite_clouds(), defaults(AttackMode::kTargeted), AttackMethod::kGsda, 1);
  return s;
}

// Every attack result produced so far, for the energy identity.
std::vector<std::pair<std::string, const SuiteOutput*>> g_results;

void remember(const std::string& tag, const SuiteOutput& out) {
  for (const auto& r : g_results)
    if (r.second == &out) return;
  g_results.emplace_back(tag, &out);
}

std::vector<AdversarialInstance> as_instances(const SuiteOutput& out) {
  std::vector<AdversarialInstance> set;
  for (std::size_t i = 0; i < out.results.size(); ++i) {
    const auto& row = out.report.rows[i];
    PointCloud c = out.results[i].adversarial;
    c.label = row.true_label;
    set.push_back({row.id, c, row.target_label, out.results[i].success});
  }
  return set;
}

// ---- criteria -------------------------------------------------------------------

Outcome transform_correctness() {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> cls(0, kNumShapeClasses - 1);
  const int ns[] = {64, 256};
  const int ks[] = {5, 10, 20};
  double worst_ortho = 0.0, worst_lambda = 0.0, worst_rt = 0.0, worst_parseval = 0.0, worst_oracle = 0.0;
  int oracle_checked = 0;
  const auto t0 = Clock::now();
  for (int trial = 0; trial < 200; ++trial) {
    const int n = ns[trial % 2];
    const int k = ks[(trial / 2) % 3];
    const auto cloud = synth_shape({cls(rng), n, rng(), 0.01});
    const auto basis = graph_basis(cloud.points, k);
    const Eigen::MatrixXd gram = basis.U.transpose() * basis.U;
    worst_ortho = std::max(worst_ortho, (gram - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff());
    worst_lambda = std::max(worst_lambda, std::abs(basis.lambdas(0)));
    const auto x_hat = gft(basis, cloud.points);
    worst_rt = std::max(worst_rt, (igft(basis, x_hat) - cloud.points).cwiseAbs().maxCoeff());
    const double e_in = cloud.points.squaredNorm();
    worst_parseval = std::max(worst_parseval, std::abs(x_hat.values.squaredNorm() - e_in) / e_in);
    if (n == 64 && trial % 10 == 0) {
      const auto ref = oracle::jacobi_eigen(oracle::reference_laplacian(cloud.points, k));
      worst_oracle = std::max(worst_oracle, (ref.values - basis.lambdas).cwiseAbs().maxCoeff());
      ++oracle_checked;
    }
  }
  const double secs = seconds_since(t0);
  g_report["transform"] = {{"max_orthogonality_error", worst_ortho}, {"max_abs_lambda0", worst_lambda},
                           {"max_roundtrip_error", worst_rt},        {"max_parseval_rel", worst_parseval},
                           {"max_jacobi_eigenvalue_gap", worst_oracle}, {"seconds", secs}};
  const bool pass = worst_ortho < kOrthoTol && worst_lambda < kLambdaZeroTol && worst_rt < kRoundTripTol &&
                    worst_parseval < kParsevalRelTol && worst_oracle < kOrthoTol && secs < kTransformSeconds;
  return {pass, "200 clouds: |U'U-I|=" + fmt(worst_ortho) + " |l0|=" + fmt(worst_lambda) + " roundtrip=" +
                    fmt(worst_rt) + " parseval=" + fmt(worst_parseval) + " jacobi_gap(" +
                    std::to_string(oracle_checked) + ")=" + fmt(worst_oracle) + " time=" + fmt(secs, 3) + "s"};
}

Outcome energy_concentration() {
  bool pass = true;
  std::string detail;
  for (const char* name : {"sphere", "cylinder", "torus", "cone"}) {
    const auto cloud = synth_shape({shape_class_id(name), 1024, 0, 0.01});
    const auto basis = graph_basis(cloud.points, 10);
    const double frac = low_frequency_energy_fraction(gft(basis, cloud.points), 32);
    g_report["energy_lowest_32"][name] = frac;
    pass = pass && frac >= kEnergyFloor;
    detail += std::string(detail.empty() ? "" : " ") + name + "=" + fmt(frac);
  }
  return {pass, "lowest-32 energy at n=1024 K=10: " + detail};
}

struct FdTotals {
  int checked = 0;
  int skipped = 0;
  double max_rel = 0.0;

  void add(const oracle::FdReport& r) {
    checked += r.checked;
    skipped += r.skipped;
    max_rel = std::max(max_rel, r.max_rel);
  }
  bool ok() const { return checked > 0 && max_rel < kFdRelTol; }
  std::string str() const {
    return "rel=" + fmt(max_rel, 3) + " (" + std::to_string(checked) + " checked, " + std::to_string(skipped) +
           " at kinks)";
  }
};

Outcome gradient_oracles() {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  FdTotals input, cham, haus, composite;
  auto same_nn = [](const Points& clean, const Points& a, const Points& b) {
    const auto ra = oracle::reference_nearest(a, clean);
    const auto rb = oracle::reference_nearest(b, clean);
    return ra.index == rb.index && ra.worst == rb.worst;
  };
  for (int trial = 0; trial < 20; ++trial) {
    ModelConfig mc;
    mc.seed = 100 + static_cast<std::uint64_t>(trial);
    const Classifier model(mc);
    const Points clean = oracle::random_ball_points(16, rng);
    const Points adv = clean + 0.05 * oracle::random_ball_points(16, rng);
    const Objective obj = trial % 2 ? Objective::targeted(trial % 8) : Objective::untargeted(trial % 8);
    auto same_pattern = [&](const Points& a, const Points& b) {
      return oracle::reference_forward(model, a).pattern == oracle::reference_forward(model, b).pattern;
    };

    const auto ig = model.input_gradient(adv, obj);
    input.add(oracle::check_gradient(
        [&](const Eigen::MatrixX3d& x) { return oracle::reference_loss(oracle::reference_forward(model, x).logits, obj); },
        same_pattern, adv, ig.gradient, kFdStep, kFdGradFloor));

    cham.add(oracle::check_gradient([&](const Eigen::MatrixX3d& x) { return chamfer(x, clean, false).value; },
                                    [&](const Eigen::MatrixX3d& a, const Eigen::MatrixX3d& b) { return same_nn(clean, a, b); },
                                    adv, chamfer(adv, clean, true).gradient, kFdStep, kFdGradFloor));
    haus.add(oracle::check_gradient([&](const Eigen::MatrixX3d& x) { return hausdorff(x, clean, false).value; },
                                    [&](const Eigen::MatrixX3d& a, const Eigen::MatrixX3d& b) { return same_nn(clean, a, b); },
                                    adv, hausdorff(adv, clean, true).gradient, kFdStep, kFdGradFloor));

    const auto basis = graph_basis(clean, 10);
    const auto x_hat = gft(basis, clean);
    Eigen::MatrixX3d delta(16, 3);
    for (Eigen::Index i = 0; i < 16; ++i)
      for (int c = 0; c < 3; ++c) delta(i, c) = 0.3 * u(rng) * std::abs(x_hat.values(i, c));
    const double beta = 2.0;
    const auto loss = spectral_adversarial_loss(model, basis, clean, {delta}, obj, beta, 5.0, 0.5);
    // Reference composite built from the loop-based forward pass and brute-force nearest neighbors.
    auto to_points = [&](const Eigen::MatrixX3d& d) -> Points { return basis.U * (x_hat.values + d); };
    auto total = [&](const Eigen::MatrixX3d& d) {
      const Points p = to_points(d);
      const auto nn = oracle::reference_nearest(p, clean);
      double cd = 0.0;
      for (double s : nn.sq) cd += s / static_cast<double>(nn.sq.size());
      const double hd = nn.sq[static_cast<std::size_t>(nn.worst)];
      return oracle::reference_loss(oracle::reference_forward(model, p).logits, obj) + beta * (5.0 * cd + 0.5 * hd);
    };
    composite.add(oracle::check_gradient(
        total,
        [&](const Eigen::MatrixX3d& a, const Eigen::MatrixX3d& b) {
          const Points pa = to_points(a), pb = to_points(b);
          return same_nn(clean, pa, pb) && same_pattern(pa, pb);
        },
        delta, loss.gradient, kFdStep, kFdGradFloor));
  }
  g_report["gradients"] = {{"input", {input.max_rel, input.checked, input.skipped}},
                           {"chamfer", {cham.max_rel, cham.checked, cham.skipped}},
                           {"hausdorff", {haus.max_rel, haus.checked, haus.skipped}},
                           {"composite", {composite.max_rel, composite.checked, composite.skipped}}};
  return {input.ok() && cham.ok() && haus.ok() && composite.ok(),
          "input " + input.str() + "; chamfer " + cham.str() + "; hausdorff " + haus.str() + "; dL/dDelta " +
              composite.str()};
}

Outcome victim_quality() {
  const auto& v = victim();
  g_report["victim"] = {{"test_accuracy", v.test_accuracy}, {"train_seconds", v.train_seconds},
                        {"deterministic", v.deterministic}};
  return {v.test_accuracy >= kVictimAccuracy && v.deterministic && v.train_seconds < kVictimSeconds,
          "test accuracy=" + fmt(v.test_accuracy) + " deterministic=" + (v.deterministic ? "yes" : "no") +
              " train time=" + fmt(v.train_seconds, 3) + "s"};
}

// Post-hoc check of |delta| <= eps_max |x_hat| with the basis rebuilt from the clean cloud.
int bound_violations(const std::vector<PointCloud>& clouds, const SuiteOutput& out, const AttackConfig& cfg) {
  int bad = 0;
  for (std::size_t i = 0; i < clouds.size(); ++i) {
    const auto x_hat = gft(graph_basis(clouds[i].points, cfg.k), clouds[i].points);
    const Eigen::MatrixX3d bound = cfg.eps_max * x_hat.values.cwiseAbs();
    if (!(out.results[i].delta.values.cwiseAbs().array() <= bound.array()).all()) ++bad;
  }
  return bad;
}

Outcome attack_success() {
  const auto& clouds = suite_clouds();
  const auto& un = untargeted_suite();
  const auto& tg = targeted_suite();
  remember("untargeted", un.out);
  remember("targeted", tg.out);
  const int bad = bound_violations(clouds, un.out, defaults(AttackMode::kUntargeted)) +
                  bound_violations(clouds, tg.out, defaults(AttackMode::kTargeted));
  const double secs = un.seconds + tg.seconds;
  const auto& a = un.out.report.aggregates;
  const auto& b = tg.out.report.aggregates;
  g_report["attack"] = {{"clouds", clouds.size()},
                        {"untargeted", to_json(un.out.report, false)["aggregates"]},
                        {"targeted", to_json(tg.out.report, false)["aggregates"]},
                        {"bound_violations", bad},
                        {"seconds", secs}};
  const bool pass = static_cast<int>(clouds.size()) == kSuiteSize && a.success_rate >= kUntargetedRate &&
                    b.success_rate >= kTargetedRate && bad == 0 && secs < kAttackSeconds;
  return {pass, std::to_string(clouds.size()) + " clouds: untargeted=" + fmt(a.success_rate) + " targeted=" +
                    fmt(b.success_rate) + " bound violations=" + std::to_string(bad) + " time=" + fmt(secs, 4) +
                    "s"};
}

Outcome energy_identity() {
  const auto& clouds = suite_clouds();
  remember("untargeted", untargeted_suite().out);
  remember("targeted", targeted_suite().out);
  double worst = 0.0;
  int count = 0;
  for (const auto& [tag, out] : g_results) {
    for (std::size_t i = 0; i < out->results.size(); ++i) {
      const auto& r = out->results[i];
      const double d = (r.adversarial.points - clouds[i].points).norm();
      const double e = r.delta.values.norm();
      if (std::max(d, e) >= kIdentityZero) worst = std::max(worst, std::abs(d - e) / std::max(d, e));
      ++count;
    }
  }
  g_report["energy_identity"] = {{"results", count}, {"max_rel", worst}};
  return {count > 0 && worst < kIdentityRelTol,
          std::to_string(count) + " results: max |D_norm-E_delta|/max=" + fmt(worst, 3)};
}

std::vector<TimedSuite> g_eps_suites;

Outcome eps_sensitivity() {
  const double eps[] = {0.5, 1.0, 2.0, 3.0};
  std::vector<double> rates;
  g_eps_suites.reserve(3);
  for (double e : eps) {
    if (e == 3.0) {
      rates.push_back(untargeted_suite().out.report.aggregates.success_rate);
      continue;
    }
    auto cfg = defaults(AttackMode::kUntargeted);
    cfg.eps_max = e;
    g_eps_suites.push_back(run_suite(suite_clouds(), cfg, AttackMethod::kGsda, worker_count()));
    remember("eps_" + fmt(e), g_eps_suites.back().out);
    rates.push_back(g_eps_suites.back().out.report.aggregates.success_rate);
  }
  int inversions = 0;
  double largest = 0.0;
  for (std::size_t i = 1; i < rates.size(); ++i) {
    if (rates[i] < rates[i - 1]) {
      ++inversions;
      largest = std::max(largest, rates[i - 1] - rates[i]);
    }
  }
  g_report["eps_sensitivity"] = {{"eps", eps}, {"success_rate", rates}, {"inversions", inversions}};
  std::string detail = "success at eps 0.5/1/2/3: " + fmt(rates[0]) + "/" + fmt(rates[1]) + "/" + fmt(rates[2]) +
                       "/" + fmt(rates[3]);
  if (inversions == 0) return {true, detail};
  if (inversions == 1 && largest <= kInversionAllowance + 1e-12) {
    return {true, detail + " (one inversion of " + fmt(100 * largest, 3) + " pp, report-only)", true};
  }
  return {false, detail + " (" + std::to_string(inversions) + " inversions, largest " + fmt(100 * largest, 3) + " pp)"};
}

TimedSuite g_xyz;

Outcome defense_trend() {
  g_xyz = run_suite(suite_clouds(), defaults(AttackMode::kUntargeted), AttackMethod::kXyzBaseline, worker_count());
  remember("xyz", g_xyz.out);
  DefenseSpec sor{DefenseKind::kSor};
  sor.sor.drop_ratio = kSorRatio;
  auto retained = [&](const SuiteOutput& out, double& before, double& after) {
    before = out.report.aggregates.success_rate;
    after = evaluate_defense(victim().model, as_instances(out), sor).success_rate;
    return before > 0.0 ? after / before : 0.0;
  };
  double g0, g1, x0, x1;
  const double rg = retained(untargeted_suite().out, g0, g1);
  const double rx = retained(g_xyz.out, x0, x1);
  g_report["defense"] = {{"gsda", {{"undefended", g0}, {"sor", g1}, {"retained", rg}}},
                         {"xyz", {{"undefended", x0}, {"sor", x1}, {"retained", rx}}}};
  return {x0 > 0.0 && g0 > 0.0 && rg > rx,
          "SOR 0.1 retained: gsda " + fmt(g1) + "/" + fmt(g0) + "=" + fmt(rg) + " vs xyz " + fmt(x1) + "/" + fmt(x0) +
              "=" + fmt(rx)};
}

double mean_chamfer_of_successes(const SuiteOutput& out, std::size_t limit) {
  double sum = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < std::min(limit, out.report.rows.size()); ++i) {
    if (!out.report.rows[i].success) continue;
    sum += out.report.rows[i].distortion.d_c;
    ++n;
  }
  return n ? sum / n : 0.0;
}

TimedSuite g_k5, g_k20;

Outcome k_insensitivity() {
  const std::vector<PointCloud> clouds(suite_clouds().begin(),
                                       suite_clouds().begin() + std::min<std::size_t>(kKSuiteSize, suite_clouds().size()));
  auto cfg = defaults(AttackMode::kUntargeted);
  cfg.k = 5;
  g_k5 = run_suite(clouds, cfg, AttackMethod::kGsda, worker_count());
  cfg.k = 20;
  g_k20 = run_suite(clouds, cfg, AttackMethod::kGsda, worker_count());
  remember("k5", g_k5.out);
  remember("k20", g_k20.out);
  const double c5 = mean_chamfer_of_successes(g_k5.out, clouds.size());
  const double c10 = mean_chamfer_of_successes(untargeted_suite().out, clouds.size());
  const double c20 = mean_chamfer_of_successes(g_k20.out, clouds.size());
  const double s5 = g_k5.out.report.aggregates.success_rate, s20 = g_k20.out.report.aggregates.success_rate;
  const double variation = std::min(c5, c20) > 0.0 ? std::abs(c5 - c20) / std::min(c5, c20) : INFINITY;
  g_report["k_sensitivity"] = {{"mean_d_c", {{"5", c5}, {"10", c10}, {"20", c20}}},
                               {"success_rate", {{"5", s5}, {"20", s20}}},
                               {"variation", variation}};
  return {variation < kKVariation,
          "mean D_c K=5/10/20: " + fmt(c5) + "/" + fmt(c10) + "/" + fmt(c20) + " (success " + fmt(s5) + "/" +
              fmt(s20) + ") variation=" + fmt(variation, 3)};
}

TimedSuite g_again_un, g_again_tg;

Outcome determinism() {
  g_again_un = run_suite(suite_clouds(), defaults(AttackMode::kUntargeted), AttackMethod::kGsda, 1);
  g_again_tg = run_suite(suite_clouds(), defaults(AttackMode::kTargeted), AttackMethod::kGsda, 1);
  remember("untargeted_rerun", g_again_un.out);
  remember("targeted_rerun", g_again_tg.out);
  const auto& again_un = g_again_un;
  const auto& again_tg = g_again_tg;
  const bool un = deterministic_payload(again_un.out.report) == deterministic_payload(untargeted_suite().out.report);
  const bool tg = deterministic_payload(again_tg.out.report) == deterministic_payload(targeted_suite().out.report);
  const std::string h1 = fnv1a_hex(deterministic_payload(untargeted_suite().out.report));
  const std::string h2 = fnv1a_hex(deterministic_payload(targeted_suite().out.report));
  g_report["determinism"] = {{"untargeted_hash", h1}, {"targeted_hash", h2}, {"untargeted", un}, {"targeted", tg}};
  return {un && tg, std::string("report payloads identical: untargeted ") + (un ? "yes" : "no") + " (" + h1 +
                        "), targeted " + (tg ? "yes" : "no") + " (" + h2 + ")"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  std::string report_path = "acceptance_report.json";
  app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',');
  app.add_option("--report", report_path, "Where to write measured values");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"transform correctness", transform_correctness},
      {"energy concentration", energy_concentration},
      {"gradient oracles", gradient_oracles},
      {"victim quality", victim_quality},
      {"attack success", attack_success},
      {"spectral/data energy identity", energy_identity},
      {"eps sensitivity", eps_sensitivity},
      {"defense robustness trend", defense_trend},
      {"K insensitivity", k_insensitivity},
      {"determinism", determinism},
  };
  // The energy identity runs last so it covers every attack result produced by the others.
  const int order[] = {1, 2, 3, 4, 5, 7, 8, 9, 10, 6};
  int failures = 0;
  for (int id : order) {
    const auto i = static_cast<std::size_t>(id - 1);
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s  %2d  %-30s %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
    g_report["criteria"][std::to_string(id)] = {{"pass", o.pass}, {"report_only", o.report_only}, {"detail", o.detail}};
  }
  std::ofstream(report_path) << g_report.dump(2) << "\n";
  return failures == 0 ? 0 : 1;
}
