#include "angadapt/adapt_driver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <string>

#include "angadapt/errors.hpp"
#include "angadapt/projection.hpp"

namespace angadapt {

void AdaptConfig::validate() const {
  if (!(tau > 0.0)) throw DomainError("adapt: tau must be positive");
  if (!(ratio > 1.0)) throw DomainError("adapt: ratio must exceed 1");
  if (!(coarsen_fraction >= 0.0 && coarsen_fraction < 1.0))
    throw DomainError("adapt: coarsen_fraction must lie in [0, 1)");
  if (!(flux_floor >= 0.0)) throw DomainError("adapt: flux_floor must be non-negative");
  if (steps < 1) throw DomainError("adapt: steps must be at least 1");
  if (max_level < 0 || max_level > kMaxPatchLevel)
    throw DomainError("adapt: max_level must lie in [0, " + std::to_string(kMaxPatchLevel) + "]");
  if (surrogate.order < 0 || !(surrogate.sigma_f >= 0.0))
    throw DomainError("adapt: surrogate order and sigma_f must be non-negative");
  if (fixed.level < 0 || fixed.level > kMaxPatchLevel)
    throw DomainError("adapt: fixed level out of range");
  if (!(fixed.phi_lo < fixed.phi_hi) || !(fixed.mu_lo < fixed.mu_hi))
    throw DomainError("adapt: fixed bounds must be non-empty intervals");
}

std::vector<char> mark_underresolved(std::span<const double> haar, std::span<const double> haar_adj,
                                     std::span<const double> fpn, std::span<const double> fpn_adj,
                                     double ratio, double floor) {
  if (haar.size() != fpn.size() || haar_adj.size() != fpn_adj.size() ||
      (!haar_adj.empty() && haar_adj.size() != haar.size()))
    throw StructuralError("mark_underresolved: scalar flux arrays differ in length");
  auto apart = [&](double a, double b) {
    a = std::abs(a);
    b = std::abs(b);
    if (a < floor && b < floor) return false;
    return b > ratio * a || a > ratio * b;
  };
  std::vector<char> flags(haar.size(), 0);
  for (std::size_t i = 0; i < haar.size(); ++i) {
    bool bad = apart(haar[i], fpn[i]);
    if (!haar_adj.empty()) bad = bad || apart(haar_adj[i], fpn_adj[i]);
    flags[i] = bad ? 1 : 0;
  }
  return flags;
}

std::vector<double> assemble_resolved_field(const HaarTransport& haar, std::span<const double> x,
                                            const FpnTransport& fpn, std::span<const double> y,
                                            const std::vector<char>& flags) {
  if (x.size() != haar.size() || y.size() != fpn.size())
    throw StructuralError("assemble_resolved_field: field sizes do not match the operators");
  if (static_cast<int>(flags.size()) != haar.mesh().num_nodes() ||
      haar.mesh().num_nodes() != fpn.mesh().num_nodes())
    throw StructuralError("assemble_resolved_field: node counts differ");
  std::vector<double> out(x.begin(), x.end());
  const int octants = haar.domain().octants();
  for (int node = 0; node < static_cast<int>(flags.size()); ++node) {
    if (!flags[node]) continue;
    const std::vector<double> c = fpn.node_coefficients(y, node);
    std::span<double> block(out.data() + haar.block_offset(node), haar.block_size(node));
    fpn_to_coefficients(c, fpn.config().order, *haar.tree(node), block, octants);
  }
  return out;
}

TreePtr threshold_adapt(const AngleTree& tree, std::span<const double> metric, int octants,
                        int max_level, double coarsen_fraction, TreeRegistry& registry,
                        ThresholdStats* stats) {
  if (static_cast<int>(metric.size()) != tree.num_functions(octants))
    throw StructuralError("threshold_adapt: metric block has " + std::to_string(metric.size()) +
                          " entries for " + std::to_string(tree.num_functions(octants)) +
                          " functions");
  std::set<PatchKey> refine;
  std::vector<PatchKey> coarsen;
  std::vector<char> hot(tree.size(), 0);
  int capped = 0;
  auto request = [&](const AngleTree::Node& n) {
    if (n.level < max_level)
      refine.insert(n.key);
    else
      ++capped;
  };
  for (int i = 0; i < tree.size(); ++i) {
    const AngleTree::Node& n = tree.node(i);
    if (key_octant(n.key) >= octants) continue;
    if (!n.subdivided()) {
      if (n.level == 0 && metric[tree.octant_offset(key_octant(n.key))] > 1.0) request(n);
      continue;
    }
    const double g = std::max({metric[n.coeff], metric[n.coeff + 1], metric[n.coeff + 2]});
    bool leaf_children = true;
    for (int c : n.child) leaf_children = leaf_children && !tree.node(c).subdivided();
    if (g > 1.0) {
      hot[i] = 1;
      for (int c : n.child)
        if (!tree.node(c).subdivided()) request(tree.node(c));
    } else if (g < coarsen_fraction && n.level > 0 && leaf_children) {
      coarsen.push_back(n.key);
    }
  }
  // A parent above threshold asks for all its children to be subdivided, so
  // it also keeps the ones that already are.
  std::erase_if(coarsen, [&](PatchKey k) {
    if (refine.count(k) || hot[tree.node(tree.find(k)).parent]) return true;
    for (int c = 0; c < 4; ++c)
      if (refine.count(child_key(k, c))) return true;
    return false;
  });
  if (stats) {
    stats->refined += static_cast<int>(refine.size());
    stats->coarsened += static_cast<int>(coarsen.size());
    stats->capped += capped;
  }
  std::set<PatchKey> keys(tree.subdivided().begin(), tree.subdivided().end());
  const bool mirror = octants == 4;
  for (PatchKey k : refine) {
    keys.insert(k);
    if (mirror) keys.insert(mirror_key(k));
  }
  for (PatchKey k : coarsen) {
    keys.erase(k);
    if (mirror) keys.erase(mirror_key(k));
  }
  return registry.intern(std::vector<PatchKey>(keys.begin(), keys.end()));
}

std::vector<TreePtr> threshold_adapt(const MetricField& metric, const HaarTransport& op,
                                     int max_level, double coarsen_fraction,
                                     TreeRegistry& registry, ThresholdStats* stats) {
  if (metric.values.size() != op.size())
    throw StructuralError("threshold_adapt: metric does not match the operator");
  std::vector<TreePtr> trees;
  trees.reserve(op.trees().size());
  for (int node = 0; node < op.mesh().num_nodes(); ++node) {
    std::span<const double> block(metric.values.data() + op.block_offset(node), op.block_size(node));
    trees.push_back(threshold_adapt(*op.tree(node), block, op.domain().octants(), max_level,
                                    coarsen_fraction, registry, stats));
  }
  return trees;
}

namespace {

void configure(TransportOperator& op, const Problem& problem) {
  if (problem.preconditioner)
    op.set_preconditioner(*problem.preconditioner);
  else if (dynamic_cast<const FpnTransport*>(&op) && op.size() <= problem.direct_limit)
    op.set_preconditioner(Preconditioner::direct);
}

using Clock = std::chrono::steady_clock;

std::vector<double> node_scalar_flux(const TransportOperator& op, std::span<const double> x) {
  return op.scalar_flux(x);
}

void fill_errors(AdaptRow& row, const Problem& problem) {
  if (!problem.reference) return;
  const double ref = *problem.reference;
  if (std::abs(ref) >= kTrueErrorFloor) row.rel_error = std::abs(row.detector - ref) / std::abs(ref);
}

void set_time(AdaptRow& row, const AdaptConfig& config, Clock::time_point start) {
  row.wall_seconds = config.timing ? std::chrono::duration<double>(Clock::now() - start).count() : 0.0;
}

AdaptResult run_single(const Problem& problem, const AdaptConfig& config,
                       const StepObserver& observer, Clock::time_point start) {
  AdaptResult result;
  std::unique_ptr<TransportOperator> op;
  HaarTransport* haar = nullptr;
  if (config.mode == AdaptMode::fixed) {
    const FixedBounds& b = config.fixed;
    TreePtr t = bounded_refinement(b.phi_lo, b.phi_hi, b.mu_lo, b.mu_hi, b.level,
                                   problem.domain.hemisphere);
    auto h = std::make_unique<HaarTransport>(
        problem.mesh, std::vector<TreePtr>(problem.mesh->num_nodes(), t), problem.domain);
    haar = h.get();
    op = std::move(h);
  } else {
    op = std::make_unique<FpnTransport>(problem.mesh, config.surrogate, problem.domain);
  }
  configure(*op, problem);
  try {
    const SolveResult fwd = solve(*op, forward_source(*op), Mode::forward, problem.solver);
    AdaptRow row;
    row.step = 1;
    row.ndof = op->size();
    row.mean_angle_dofs = static_cast<double>(op->size()) / problem.mesh->num_nodes();
    row.detector = functional(*op, fwd.x, problem.goal_region);
    fill_errors(row, problem);
    set_time(row, config, start);
    result.rows.push_back(row);
    if (observer) {
      StepState s;
      s.row = &result.rows.back();
      s.op = op.get();
      s.haar = haar;
      s.forward = &fwd.x;
      observer(s);
    }
    result.completed = true;
  } catch (const SolverError& e) {
    result.failure = e.what();
  }
  return result;
}

}  // namespace

double fixed_response(const Problem& problem, const FixedBounds& bounds) {
  const TreePtr t = bounded_refinement(bounds.phi_lo, bounds.phi_hi, bounds.mu_lo, bounds.mu_hi,
                                       bounds.level, problem.domain.hemisphere);
  HaarTransport op(problem.mesh, std::vector<TreePtr>(problem.mesh->num_nodes(), t), problem.domain);
  configure(op, problem);
  const SolveResult fwd = solve(op, forward_source(op), Mode::forward, problem.solver);
  return functional(op, fwd.x, problem.goal_region);
}

AdaptResult run(const Problem& problem, const AdaptConfig& config, const StepObserver& observer) {
  config.validate();
  if (!problem.mesh) throw StructuralError("run: no mesh");
  problem.mesh->region_volume(problem.goal_region);
  const Clock::time_point start = Clock::now();
  if (config.mode == AdaptMode::fixed || config.mode == AdaptMode::fpn_uniform)
    return run_single(problem, config, observer, start);

  const bool robust = config.mode == AdaptMode::robust;
  AdaptResult result;
  std::unique_ptr<FpnTransport> fpn;
  std::vector<double> fpn_fwd, fpn_adj, fpn_phi, fpn_phi_adj;
  try {
    if (robust) {
      fpn = std::make_unique<FpnTransport>(problem.mesh, config.surrogate, problem.domain);
      configure(*fpn, problem);
      fpn_fwd = solve(*fpn, forward_source(*fpn), Mode::forward, problem.solver).x;
      fpn_adj = solve(*fpn, adjoint_source(*fpn, problem.goal_region), Mode::adjoint, problem.solver).x;
      fpn_phi = node_scalar_flux(*fpn, fpn_fwd);
      fpn_phi_adj = node_scalar_flux(*fpn, fpn_adj);
    }

    TreeRegistry registry;
    std::vector<TreePtr> trees(problem.mesh->num_nodes(), registry.intern(AngleTree::base()));
    for (int step = 1; step <= config.steps; ++step) {
      const bool last = step == config.steps;
      HaarTransport op(problem.mesh, trees, problem.domain);
      configure(op, problem);
      const std::vector<double> psi = solve(op, forward_source(op), Mode::forward, problem.solver).x;
      std::vector<double> psi_adj;
      if (!last)
        psi_adj = solve(op, adjoint_source(op, problem.goal_region), Mode::adjoint, problem.solver).x;

      AdaptRow row;
      row.step = step;
      row.ndof = op.size();
      row.mean_angle_dofs = static_cast<double>(op.size()) / problem.mesh->num_nodes();
      row.detector = functional(op, psi, problem.goal_region);
      fill_errors(row, problem);

      std::vector<char> flags;
      std::vector<double> res_fwd, res_adj;
      if (robust) {
        const std::vector<double> phi = node_scalar_flux(op, psi);
        std::vector<double> phi_adj;
        if (!last) phi_adj = node_scalar_flux(op, psi_adj);
        flags = mark_underresolved(phi, phi_adj, fpn_phi,
                                   last ? std::span<const double>() : std::span<const double>(fpn_phi_adj),
                                   config.ratio, config.flux_floor);
        const auto bad = std::count(flags.begin(), flags.end(), 1);
        row.underresolved_pct = 100.0 * static_cast<double>(bad) / static_cast<double>(flags.size());
        res_fwd = assemble_resolved_field(op, psi, *fpn, fpn_fwd, flags);
        if (!last) res_adj = assemble_resolved_field(op, psi_adj, *fpn, fpn_adj, flags);
      } else {
        res_fwd = psi;
        res_adj = psi_adj;
      }

      MetricField metric;
      if (!last) {
        const std::vector<double> diag = op.diagonal();
        const std::vector<double> r = reduced_residual(diag, res_fwd);
        const std::vector<double> r_adj = reduced_residual(diag, res_adj);
        metric = error_metric(res_fwd, res_adj, r, r_adj, static_cast<double>(op.size()), config.tau);
        if (problem.reference) {
          const std::optional<double> eff =
              effectivity_index(error_estimate(res_fwd, r_adj), *problem.reference - row.detector);
          if (eff) row.effectivity = *eff;
        }
      }
      set_time(row, config, start);
      result.rows.push_back(row);
      if (observer) {
        StepState s;
        s.row = &result.rows.back();
        s.op = &op;
        s.haar = &op;
        s.forward = &psi;
        s.adjoint = last ? nullptr : &psi_adj;
        s.resolved_forward = &res_fwd;
        s.resolved_adjoint = last ? nullptr : &res_adj;
        s.underresolved = robust ? &flags : nullptr;
        s.metric = last ? nullptr : &metric;
        observer(s);
      }
      if (!last) trees = threshold_adapt(metric, op, config.max_level, config.coarsen_fraction, registry);
    }
    result.completed = true;
  } catch (const SolverError& e) {
    result.failure = e.what();
  }
  return result;
}

}  // namespace angadapt
