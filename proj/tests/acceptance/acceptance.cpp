// Acceptance run: one PASS/FAIL line per criterion, with the measured
// numbers and wall time. Exits nonzero if any criterion fails.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "slepqns/filter.hpp"
#include "slepqns/scenario.hpp"
#include "slepqns/slepian.hpp"

using namespace slepqns;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct Outcome {
  bool pass = true;
  std::string detail;
};

void note(Outcome& o, bool ok, const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  if (!o.detail.empty()) o.detail += "; ";
  o.detail += buf;
  if (!ok) o.detail += " [fail]";
  o.pass = o.pass && ok;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

ScenarioConfig config(ScenarioKind kind, std::uint64_t seed, const nlohmann::json& patch = nlohmann::json::object()) {
  auto doc = default_scenario_document(kind);
  doc.merge_patch(patch);
  doc["seed"] = seed;
  return parse_scenario_config(doc);
}

Outcome shannon() {
  Outcome o;
  const std::pair<int, int> cases[] = {{200, 3}, {400, 6}, {800, 12}, {1600, 25}};
  for (const auto& [n, k] : cases) {
    const int got = shannon_number({n, 0.008});
    note(o, got == k, "N=%d K=%d", n, got);
  }
  return o;
}

Outcome dpss_correctness() {
  Outcome o;
  const DpssParams big{500, 7.0 / 500};
  const auto tapers = compute_dpss(big, 13);
  double ortho = 0.0;
  for (int a = 0; a <= 13; ++a)
    for (int b = 0; b <= a; ++b) {
      double dot = 0.0;
      for (int i = 0; i < big.n; ++i) dot += tapers[a].values[i] * tapers[b].values[i];
      ortho = std::max(ortho, std::abs(dot - (a == b ? 1.0 : 0.0)));
    }
  note(o, ortho < 1e-10, "orthonormality residual %.2e (N=500, orders 0..13)", ortho);

  // Dense oracle in long double over cases whose eigenvalue gaps it resolves.
  using MatrixLd = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  const long double pi = 3.141592653589793238462643383279502884L;
  const std::pair<int, double> cases[] = {{32, 0.04}, {64, 0.008}, {64, 0.04}, {96, 0.02},
                                          {128, 0.008}, {128, 0.02}, {128, 0.04}};
  double worst = 0.0;
  for (const auto& [n, w] : cases) {
    MatrixLd k(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        k(i, j) = i == j ? 2.0L * w : std::sin(2.0L * pi * static_cast<long double>(w) * (i - j)) / (pi * (i - j));
    Eigen::SelfAdjointEigenSolver<MatrixLd> es(k);
    const int top = std::min(n - 1, shannon_number({n, w}) + 1);
    const auto ours = compute_dpss({n, w}, top);
    for (int order = 0; order <= top; ++order) {
      double plus = 0.0, minus = 0.0;
      for (int i = 0; i < n; ++i) {
        const double d = static_cast<double>(es.eigenvectors()(i, n - 1 - order));
        plus = std::max(plus, std::abs(d - ours[order].values[i]));
        minus = std::max(minus, std::abs(d + ours[order].values[i]));
      }
      worst = std::max(worst, std::min(plus, minus));
    }
  }
  note(o, worst < 1e-8, "dense Toeplitz eigenvector error %.2e (7 cases, N<=128, orders 0..K+1)", worst);

  const int kk = shannon_number(big);
  double conc = 0.0;
  for (int order = 0; order < kk; ++order)
    conc = std::max(conc, std::abs(concentration_ratio(tapers[order], big.w) - tapers[order].eigenvalue));
  note(o, conc < 1e-6, "concentration vs eigenvalue %.2e (k<%d)", conc, kk);
  return o;
}

Outcome ideal_filter_convergence() {
  Outcome o;
  double prev = kInf;
  for (int n : {200, 400, 800, 1600}) {
    const double d = rho_l1_distance({n, 0.008}, 1e-6);
    note(o, d < prev, "N=%d L1=%.4g", n, d);
    prev = d;
  }
  return o;
}

Outcome filter_identities() {
  Outcome o;
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> g;
  std::uniform_int_distribution<int> len(16, 600);
  std::uniform_real_distribution<double> u(0.02, 0.98);
  double parseval = 0.0, alias = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Waveform w;
    w.dt = 1e-6 * (1 + trial % 10);
    const int n = len(rng);
    for (int i = 0; i < n; ++i) w.omega.push_back(300.0 * g(rng));
    const FilterCurve f(w);
    // (2/pi) times the integral over the whole line is (4/pi) times the half line.
    parseval = std::max(parseval, std::abs(4.0 / std::numbers::pi * f.integrate(0.0, kInf) / w.power() - 1.0));
    const double wn = std::numbers::pi / w.dt;
    for (int j = 0; j < 5; ++j) {
      const double om = u(rng) * wn;
      const double want = om * om / ((2 * wn - om) * (2 * wn - om));
      alias = std::max(alias, std::abs(f(2 * wn - om) / f(om) / want - 1.0));
    }
  }
  note(o, parseval < 1e-6, "Parseval rel error %.2e", parseval);
  note(o, alias < 1e-9, "alias ratio rel error %.2e", alias);
  return o;
}

Outcome oracle_equivalence() {
  Outcome o;
  int within = 0, total = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    // Same Lorentzian, centred at zero frequency.
    const auto cfg = config(ScenarioKind::kLorentzianVsRse, seed, {{"psd", {{"center_hz", 0.0}}}});
    const auto study = lorentzian_study(cfg, false);
    for (const EstimatorTrack* t : {&study.dpss, &study.rse}) {
      if (t->records.empty()) continue;
      for (std::size_t p = 0; p < t->records.size(); ++p) {
        ++total;
        within += std::abs(t->records[p].value - t->expected[p]) <= 3.0 * t->records[p].std_dev();
      }
    }
  }
  const double frac = total ? static_cast<double>(within) / total : 0.0;
  note(o, total == 5 * 2 * 41 && frac >= 0.95, "%d/%d DPSS+RSE estimates within 3 SE (%.1f%%)", within, total,
       100 * frac);
  return o;
}

Outcome leakage_bias() {
  Outcome o;
  const auto cfg = config(ScenarioKind::kLorentzianVsRse, 1);
  const auto study = lorentzian_study(cfg, true);
  const auto& lz = std::get<Lorentzian>(cfg.psd.variant());
  const double lo_shoulder = lz.center - 2 * lz.width, hi_shoulder = lz.center + 2 * lz.width;
  int rse_worse = 0, low = 0, outside = 0, dpss_ok = 0, sd_ok = 0;
  std::string bad;
  for (std::size_t p = 0; p < study.truth.size(); ++p) {
    const double om = study.dpss.omega[p];
    const double ed = std::abs(study.dpss.expected[p] / study.truth[p] - 1);
    const double er = std::abs(study.rse.expected[p] / study.truth[p] - 1);
    if (om <= kTwoPi * 2000.0) {
      ++low;
      rse_worse += er > ed;
    }
    if (om < lo_shoulder || om > hi_shoulder) {
      ++outside;
      if (ed < 0.05) {
        ++dpss_ok;
      } else {
        char b[48];
        std::snprintf(b, sizeof b, " %.2fkHz:%.1f%%", om / kTwoPi / 1e3, 100 * ed);
        bad += b;
      }
    }
    sd_ok += study.dpss.expected_sd[p] < study.rse.expected_sd[p];
  }
  note(o, rse_worse == low, "RSE error > DPSS error at %d/%d points in 0-2 kHz", rse_worse, low);
  note(o, dpss_ok == outside, "DPSS |rel error| < 5%% at %d/%d points outside %.2f-%.2f kHz%s", dpss_ok, outside,
       lo_shoulder / kTwoPi / 1e3, hi_shoulder / kTwoPi / 1e3, bad.empty() ? "" : (", over at" + bad).c_str());
  note(o, sd_ok == static_cast<int>(study.truth.size()), "DPSS sd < RSE sd at %d/%zu points", sd_ok,
       study.truth.size());
  return o;
}

Outcome comb_aliasing() {
  Outcome o;
  const auto cfg = config(ScenarioKind::kCombVsDpss, 1);
  const auto study = comb_study(cfg, true);
  const auto& panel = study.comb.at(0);
  const double nyq = panel.effective_nyquist / kTwoPi / 1e3;
  note(o, std::abs(nyq - 12.7) <= 0.1, "T_B=%.0f us effective Nyquist %.3f kHz", panel.protocol.base_duration * 1e6,
       nyq);
  double dev = 0.0;
  for (std::size_t i = 0; i < panel.truth.size(); ++i) {
    const double f = panel.exact->harmonics[i] / kTwoPi;
    if (f >= 5000.0 && f <= 12700.0) dev = std::max(dev, std::abs(panel.exact->values[i] / panel.truth[i] - 1));
  }
  note(o, dev > 0.10, "largest comb deviation in 5-12.7 kHz %.1f%%", 100 * dev);

  const WaveformSpec& spec = cfg.panels.at(1).waveform;
  const double om = kTwoPi * 23900.0;
  const auto taper = compute_dpss(spec.params(), 0)[0];
  const Setting s = make_setting({build_waveform(spec, taper, om)}, om, spec.w, spec.dt, cfg.integration);
  const double rel = expected_estimate(cfg.psd, s.filter, s.passband, cfg.integration) / cfg.psd(om) - 1;
  note(o, std::abs(rel) < 0.10, "DPSS (dt=%.1f us, N=%d, Nyquist %.1f kHz) at 23.9 kHz rel error %+.2f%%",
       spec.dt * 1e6, spec.n, spec.nyquist() / kTwoPi / 1e3, 100 * rel);
  return o;
}

Outcome detection(double& fisher_ratio) {
  Outcome o;
  const int pts[] = {4, 5};
  std::vector<double> zk[2], zs[2], za[2];
  int iterations = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto d = detection_study(config(ScenarioKind::kDetectLine, seed), false);
    if (seed == 1) fisher_ratio = max_fisher_correction_ratio(d);
    for (int i = 0; i < 2; ++i) {
      zk[i].push_back(d.z_k0.test.z[pts[i]]);
      zs[i].push_back(d.z_ssqm.test.z[pts[i]]);
      za[i].push_back(d.z_aqm.test.z[pts[i]]);
    }
    for (const auto& r : d.aqm) iterations = std::max(iterations, r.iterations);
  }
  for (int i = 0; i < 2; ++i) {
    const double k = median(zk[i]), s = median(zs[i]), a = median(za[i]);
    const double f = pts[i] * 1.75;
    note(o, a >= 3.0, "median z at %.2f kHz: AQM %.2f", f, a);
    note(o, s >= 2.5, "SSQM %.2f", s);
    note(o, k < s && k < a, "k=0 %.2f", k);
  }
  note(o, iterations <= 10, "AQM iterations <= %d", iterations);
  return o;
}

Outcome refinement() {
  Outcome o;
  std::vector<double> offset, height;
  int shrink = 0, runs = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed, ++runs) {
    const auto b = bayes_study(config(ScenarioKind::kBayesRefine, seed), false);
    int qt = 0, qp = 0;
    for (int q = 0; q < b.grid.count; ++q) {
      if (b.truth[q] > b.truth[qt]) qt = q;
      if (b.posterior.mean(q) > b.posterior.mean(qp)) qp = q;
    }
    offset.push_back(std::abs(qp - qt));
    height.push_back(std::abs(b.posterior.mean(qp) / b.truth[qt] - 1));
    const auto [pl, ph] = b.prior.credible_interval(0.95);
    const auto [ql, qh] = b.posterior.credible_interval(0.95);
    double wp = 0.0, wq = 0.0;
    for (int q = 0; q < b.grid.count; ++q) {
      const double f = b.grid.centre(q) / kTwoPi;
      if (f >= 5400.0 && f <= 10300.0) {
        wp += ph(q) - pl(q);
        wq += qh(q) - ql(q);
      }
    }
    shrink += wq < wp;
  }
  note(o, median(offset) <= 1.0, "median peak offset %.1f segments", median(offset));
  note(o, median(height) < 0.20, "median peak height error %.1f%%", 100 * median(height));
  note(o, shrink == runs, "0.95 interval narrower than prior in %d/%d seeds", shrink, runs);
  return o;
}

}  // namespace

int main() {
  int failed = 0;
  const auto run = [&](int id, double limit_s, const char* name, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = body();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limit_s > 0 && s >= limit_s) note(o, false, "runtime over %.0f s", limit_s);
    std::printf("criterion %2d %s  %s: %s (%.1f s)\n", id, o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), s);
    std::fflush(stdout);
    failed += !o.pass;
  };

  double fisher_ratio = kInf;
  run(1, 1, "Shannon numbers", shannon);
  run(2, 30, "DPSS correctness", dpss_correctness);
  run(3, 60, "ideal-filter convergence", ideal_filter_convergence);
  run(4, 0, "Parseval and alias identities", filter_identities);
  run(5, 300, "simulator vs oracle", oracle_equivalence);
  run(6, 60, "leakage bias", leakage_bias);
  run(7, 120, "comb aliasing", comb_aliasing);
  run(8, 600, "line detection", [&] { return detection(fisher_ratio); });
  run(9, 600, "Bayesian refinement", refinement);
  run(10, 0, "Fisher covariance term", [&] {
    Outcome o;
    note(o, fisher_ratio < 0.01, "largest covariance/leading ratio %.3f%%", 100 * fisher_ratio);
    return o;
  });
  std::printf("%d criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
