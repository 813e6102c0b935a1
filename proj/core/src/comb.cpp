#include "slepqns/comb.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "slepqns/errors.hpp"
#include "slepqns/qubit_sim.hpp"

namespace slepqns {
namespace {
constexpr double kPi = std::numbers::pi;
}

void CombProtocol::validate() const {
  if (!(base_duration > 0.0)) throw ParameterError("comb base duration must be positive");
  if (h_max < 1 || repetitions < 1) throw ParameterError("comb needs h_max >= 1 and R >= 1");
  if (switches < 0) throw ParameterError("switch count must be non-negative");
  if (samples_per_base < 1 || (switches > 0 && samples_per_base % (2 * switches) != 0))
    throw ParameterError("samples per base must be a multiple of twice the switch count");
  if (!(power > 0.0)) throw ParameterError("comb power target must be positive");
}

Waveform CombProtocol::base(int j) const {
  validate();
  if (j < 1 || j > h_max) throw ParameterError("comb base index out of range");
  const double duration = base_duration / j;
  const double amplitude = std::sqrt(power / (repetitions * duration));
  Waveform w = cpmg_rse(switches, amplitude, duration, samples_per_base);
  w.label = "comb-base-" + std::to_string(j);
  return w;
}

Waveform CombProtocol::repeated(int j) const {
  Waveform w = repeat_base(base(j), repetitions);
  w.label = "comb-" + std::to_string(j) + "x" + std::to_string(repetitions);
  return w;
}

double CombProtocol::harmonic(int m) const { return 2.0 * kPi * m / base_duration; }

std::vector<double> CombProtocol::segment_durations() const {
  validate();
  std::vector<double> out;
  for (int j = 1; j <= h_max; ++j) {
    const double t = base_duration / j;
    if (switches == 0) {
      out.push_back(t);
      continue;
    }
    out.push_back(t / (2.0 * switches));
    if (switches > 1) out.push_back(t / switches);
  }
  return out;
}

CombSystem comb_system(const CombProtocol& protocol) {
  protocol.validate();
  const int h = protocol.h_max;
  CombSystem sys;
  sys.matrix = Eigen::MatrixXd::Zero(h, h);
  for (int m = 1; m <= h; ++m) sys.harmonics.push_back(protocol.harmonic(m));
  for (int j = 1; j <= h; ++j) {
    const Waveform base = protocol.base(j);
    const double scale = 2.0 * protocol.repetitions / base.duration();
    for (int m = j; m <= h; m += j) sys.matrix(j - 1, m - 1) = scale * filter_eval(base, protocol.harmonic(m));
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(sys.matrix);
  const auto& sv = svd.singularValues();
  sys.condition_number = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
  return sys;
}

std::vector<double> comb_expected_signals(const CombProtocol& protocol, const PsdModel& model, CombExpectation mode,
                                          const IntegrationOptions& options) {
  protocol.validate();
  std::vector<double> out;
  for (int j = 1; j <= protocol.h_max; ++j) {
    if (mode == CombExpectation::kExact) {
      out.push_back(expected_signal(model, FilterCurve(protocol.repeated(j)), options));
      continue;
    }
    const Waveform base = protocol.base(j);
    const double t = base.duration();
    const double limit = options.cutoff_factor * kPi / base.dt;
    const double fundamental = 2.0 * kPi / t;
    // The h = 0 tooth carries half its weight on the half line.
    double sum = 0.5 * filter_eval(base, 0.0) * model(0.0);
    for (int h = 1; h * fundamental <= limit; ++h) sum += filter_eval(base, h * fundamental) * model(h * fundamental);
    out.push_back(2.0 * protocol.repetitions / t * sum);
  }
  return out;
}

CombReconstruction comb_reconstruct(const CombSystem& system, const std::vector<double>& signals,
                                    double condition_limit) {
  const Eigen::Index rows = system.matrix.rows();
  if (static_cast<Eigen::Index>(signals.size()) != rows) throw ParameterError("one signal per comb base is required");
  if (rows < system.matrix.cols()) throw ParameterError("comb system must be square or overdetermined");
  CombReconstruction out;
  out.harmonics = system.harmonics;
  out.condition_number = system.condition_number;
  if (!std::isfinite(system.condition_number) ||
      system.condition_number > 1.0 / std::numeric_limits<double>::epsilon())
    throw NumericError("comb system is numerically singular (condition number " +
                       std::to_string(system.condition_number) + ")");
  out.ill_conditioned = system.condition_number > condition_limit;
  const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(signals.data(), rows);
  const Eigen::VectorXd x = system.matrix.colPivHouseholderQr().solve(b);
  out.values.assign(x.data(), x.data() + x.size());
  return out;
}

}  // namespace slepqns
