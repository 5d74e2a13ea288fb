#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "angadapt/goal_metric.hpp"
#include "angadapt/haar.hpp"
#include "angadapt/harmonics.hpp"
#include "angadapt/transport.hpp"

namespace angadapt {

enum class AdaptMode { robust, non_robust, fixed, fpn_uniform };

/// A priori refinement window for fixed mode (azimuth phi, polar cosine mu).
struct FixedBounds {
  double phi_lo = 1.47976;
  double phi_hi = 1.661832;
  double mu_lo = 0.0;
  double mu_hi = 1.0;
  int level = 4;
};

struct AdaptConfig {
  AdaptMode mode = AdaptMode::robust;
  double tau = 1e-3;
  int max_level = 8;
  int steps = 8;
  double ratio = 10.0;
  double coarsen_fraction = 0.01;
  double flux_floor = 1e-300;
  FpnConfig surrogate{1, 1.0};
  FixedBounds fixed;
  /// When false, wall_seconds is reported as 0 so that records are reproducible byte for byte.
  bool timing = true;

  /// Throws DomainError on out-of-range values.
  void validate() const;
};

/// The transport problem being adapted: mesh, goal region and solver settings.
struct Problem {
  std::shared_ptr<const DgMesh> mesh;
  int goal_region = 2;
  SolveOptions solver;
  /// Overrides each operator's default preconditioner when set.
  std::optional<Preconditioner> preconditioner;
  /// Without an override, FP_n systems up to this many unknowns use the
  /// direct preconditioner.
  std::size_t direct_limit = 100000;
  AngularDomain domain;
  /// Reference detector response for relative errors and effectivities.
  std::optional<double> reference;
};

struct AdaptRow {
  int step = 0;
  std::size_t ndof = 0;
  double mean_angle_dofs = 0.0;
  double detector = 0.0;
  double rel_error = std::numeric_limits<double>::quiet_NaN();
  double effectivity = std::numeric_limits<double>::quiet_NaN();
  double underresolved_pct = 0.0;
  double wall_seconds = 0.0;
};

/// Everything known at the end of one adapt step, before the maps change.
/// Pointers are null when the quantity does not exist in the current mode
/// or step.
struct StepState {
  const AdaptRow* row = nullptr;
  const TransportOperator* op = nullptr;
  const HaarTransport* haar = nullptr;
  const std::vector<double>* forward = nullptr;
  const std::vector<double>* adjoint = nullptr;
  const std::vector<double>* resolved_forward = nullptr;
  const std::vector<double>* resolved_adjoint = nullptr;
  const std::vector<char>* underresolved = nullptr;
  const MetricField* metric = nullptr;
};

using StepObserver = std::function<void(const StepState&)>;

struct AdaptResult {
  std::vector<AdaptRow> rows;
  bool completed = false;
  std::string failure;
};

/// Two-sided ratio test per node on scalar fluxes. Either adjoint span may
/// be empty, in which case only the forward pair is tested.
std::vector<char> mark_underresolved(std::span<const double> haar, std::span<const double> haar_adj,
                                     std::span<const double> fpn, std::span<const double> fpn_adj,
                                     double ratio, double floor);

/// Haar field with the blocks of flagged nodes replaced by the projection of
/// the FP_n field onto those nodes' trees.
std::vector<double> assemble_resolved_field(const HaarTransport& haar, std::span<const double> x,
                                            const FpnTransport& fpn, std::span<const double> y,
                                            const std::vector<char>& flags);

struct ThresholdStats {
  int refined = 0;     ///< patches subdivided (hemisphere count)
  int coarsened = 0;   ///< patches whose wavelets were removed
  int capped = 0;      ///< refinement requests blocked by max_level
};

/// New tree for one node from the metric of its coefficient block.
/// Subdivided patch p with g(p) = max of its wavelet metrics: g > 1
/// subdivides its leaf children below max_level; g < coarsen_fraction with
/// only leaf children removes its wavelets (never at level 0). A base
/// octant that is still a leaf is subdivided when its scaling metric
/// exceeds 1. In the hemisphere setting the block covers octants 0..3 and
/// every change is mirrored to the lower octants.
TreePtr threshold_adapt(const AngleTree& tree, std::span<const double> metric, int octants,
                        int max_level, double coarsen_fraction, TreeRegistry& registry,
                        ThresholdStats* stats = nullptr);

std::vector<TreePtr> threshold_adapt(const MetricField& metric, const HaarTransport& op,
                                     int max_level, double coarsen_fraction,
                                     TreeRegistry& registry, ThresholdStats* stats = nullptr);

/// Detector response of a fixed-refinement Haar solve.
double fixed_response(const Problem& problem, const FixedBounds& bounds);

/// Runs the configured mode. A solver failure stops the loop and is
/// reported in the result together with the rows completed so far.
AdaptResult run(const Problem& problem, const AdaptConfig& config,
                const StepObserver& observer = {});

}  // namespace angadapt
