#pragma once

#include <Eigen/Dense>
#include <vector>

#include "slepqns/filter.hpp"
#include "slepqns/noise_model.hpp"
#include "slepqns/waveform.hpp"

namespace slepqns {

// CPMG bases of durations T_B / j, j = 1..h_max, each repeated R times.
struct CombProtocol {
  double base_duration = 0.0;  // T_B of the longest base
  int h_max = 1;
  int repetitions = 1;
  int switches = 2;
  int samples_per_base = 64;
  double power = 900.0;  // normalization of each repeated waveform

  void validate() const;
  Waveform base(int j) const;      // duration T_B / j, scaled as inside repeated(j)
  Waveform repeated(int j) const;  // R copies of base(j)
  double harmonic(int m) const;    // 2 pi m / T_B
  // Segment durations of all bases, for effective_nyquist.
  std::vector<double> segment_durations() const;
};

enum class CombExpectation { kExact, kDeltaComb };

struct CombSystem {
  Eigen::MatrixXd matrix;  // rows j = 1..h_max, columns m = 1..h_max
  std::vector<double> harmonics;
  double condition_number = 0.0;
};

// G_jm = (2R / T_j) F_base_j(omega_m) when m is a multiple of j, else 0.
CombSystem comb_system(const CombProtocol& protocol);

// Expected signals of each repeated base: exact finite-R filters against the
// model, or the delta-comb sum over every harmonic below the cutoff.
std::vector<double> comb_expected_signals(const CombProtocol& protocol, const PsdModel& model,
                                          CombExpectation mode, const IntegrationOptions& options = {});

struct CombReconstruction {
  std::vector<double> harmonics;
  std::vector<double> values;
  double condition_number = 0.0;
  bool ill_conditioned = false;
};

// Least-squares solution of signals = G S with condition-number reporting;
// a numerically singular system raises NumericError.
CombReconstruction comb_reconstruct(const CombSystem& system, const std::vector<double>& signals,
                                    double condition_limit = 1e12);

}  // namespace slepqns
