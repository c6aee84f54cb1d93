#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "semicorr/grid.hpp"
#include "semicorr/medium.hpp"
#include "semicorr/noise.hpp"

namespace semicorr {

enum class Provenance { Empirical, Exact, Semiclassical };
std::string to_string(Provenance p);

// C_{A,B}(tau_l) on the symmetric lag grid tau_l = l * dtau, l = -J..J.
struct CorrelationRecord {
  Eigen::Vector2d a = Eigen::Vector2d::Zero(), b = Eigen::Vector2d::Zero();
  double dtau = 0;
  Eigen::VectorXd values;
  Provenance provenance = Provenance::Empirical;
  double window = 0;  // averaging window T (empirical)
  long ensemble = 0;
  // Per-realization records (empirical), one column each.
  Eigen::MatrixXd realizations;
  double tail_ratio = 0;  // truncation tail estimate / max |C| (exact)
  std::vector<std::string> warnings;

  long half_width() const { return (values.size() - 1) / 2; }
  double tau(long l) const { return static_cast<double>(l) * dtau; }
  Eigen::VectorXd taus() const;
  double at(long l) const { return values(l + half_width()); }
  // C(-tau): the lag reflection of this record.
  CorrelationRecord reflected() const;
};

// Receiver time series sampled at t = t0 + j dt; one column per realization.
struct TraceSet {
  double dt = 0;
  double t0 = 0;
  Eigen::MatrixXd values;
};

// Fixed-window estimator: with t0 = burn_in + tau_max and window T,
//   C(tau_l) = (1/T) sum_{t in [t0, t0 + T)} u_A(t) u_B(t - tau_l) dt,
// so every lag averages the same samples. window = 0 takes the longest window
// the record allows. Realizations are averaged.
CorrelationRecord empirical_correlation(const TraceSet& a, const TraceSet& b, double tau_max, double burn_in,
                                        double window = 0);

// Centered differences in tau, second-order one-sided at the ends.
CorrelationRecord correlation_derivative(const CorrelationRecord& rec);

struct SimulationOptions {
  double dt = 0;          // 0: cfl_time_step(m, g, 0.25)
  double tau_max = 1;
  double window = 0;      // 0: 200 tau_max
  double burn_in = -1;    // < 0: 5 T_att
  long ensemble = 1;
  long first_realization = 0;
  int batch = 32;         // realizations advanced together
  int threads = 1;
};

// Resolved run lengths of a simulation.
struct SimulationPlan {
  double dt, tau_max, window, burn_in;
  long steps;
};
SimulationPlan plan_simulation(const Medium& m, const Grid& g, const SimulationOptions& opt);

// Drives u_tt + a u_t - div(n grad u) = f from rest with the noise model's
// forcing (spatial mean removed) and records u at the receiver nodes for
// every step. Returns one TraceSet per receiver.
std::vector<TraceSet> simulate_traces(const Medium& m, const NoiseModel& nm, const std::vector<std::size_t>& nodes,
                                      const SimulationOptions& opt);

// simulate_traces + empirical_correlation for a receiver pair.
CorrelationRecord simulate_correlation(const Medium& m, const NoiseModel& nm, const Eigen::Vector2d& a,
                                       const Eigen::Vector2d& b, const SimulationOptions& opt,
                                       std::vector<TraceSet>* traces = nullptr);

struct ExactOptions {
  double dt = 0;             // 0: cfl_time_step(m, g, 0.25)
  double horizon = 0;        // 0: 8 T_att
  double tail_warning = 0.01;
};

// Stationary correlation of the discrete scheme,
//   C(tau) = sum_s dt <G(s + tau, A, .), Gamma G(s, B, .)>,
// from point impulses at A and B (reciprocity) projected on the noise factor,
// truncated at the horizon. Lags are multiples of the time step up to tau_max.
CorrelationRecord exact_correlation(const Medium& m, const NoiseModel& nm, const Eigen::Vector2d& a,
                                    const Eigen::Vector2d& b, double tau_max, const ExactOptions& opt = {});

// CSV with columns tau,value,provenance.
void write_csv(const std::string& path, const CorrelationRecord& rec);
// Aligned overlay tau,<name>... of records on the same lag grid.
void write_overlay_csv(const std::string& path, const std::vector<std::string>& names,
                       const std::vector<const CorrelationRecord*>& recs);
nlohmann::json record_metadata(const CorrelationRecord& rec);
// Trace CSV: t, then one column per realization.
void write_traces_csv(const std::string& path, const TraceSet& t);

// Relative L2 distance of two records on the lags with tau_lo <= |tau| <= tau_hi
// (sign = +1 / -1 restricts to positive / negative lags, 0 keeps both).
double relative_l2(const CorrelationRecord& x, const CorrelationRecord& ref, double tau_lo, double tau_hi, int sign = 0);

}  // namespace semicorr
