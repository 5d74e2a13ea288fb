#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "angadapt/haar.hpp"
#include "angadapt/harmonics.hpp"
#include "angadapt/mesh.hpp"

namespace angadapt {

enum class Mode { forward, adjoint };

/// Linear discontinuous triangles with three nodes per element. Node ids are
/// 3 * element + local vertex.
class DgMesh {
 public:
  struct Element {
    std::array<int, 3> vertex{};
    double area = 0.0;
    std::array<double, 3> gx{}, gy{};  ///< gradients of the barycentric basis
    int region = 0;
    Material material;
  };
  /// Edge `local` of `elem` runs from local vertex `local` to `local + 1`.
  /// For interior faces `nbr_a` / `nbr_b` are the neighbour's local indices
  /// of the same two vertices.
  struct Face {
    int elem = -1;
    int local = 0;
    int nbr = -1;
    int nbr_a = -1, nbr_b = -1;
    double nx = 0.0, ny = 0.0, length = 0.0;
    int tag = 0;
    bool boundary() const { return nbr < 0; }
  };

  explicit DgMesh(TriMesh mesh);

  const TriMesh& mesh() const { return mesh_; }
  int num_elements() const { return static_cast<int>(elements_.size()); }
  int num_nodes() const { return 3 * num_elements(); }
  const Element& element(int e) const { return elements_[e]; }
  const std::vector<Face>& faces() const { return faces_; }
  std::array<double, 2> node_position(int node) const;
  /// Throws DomainError if the region does not exist.
  double region_volume(int region) const;

 private:
  TriMesh mesh_;
  std::vector<Element> elements_;
  std::vector<Face> faces_;
};

/// 2D problems are invariant under mu -> -mu; the hemisphere setting keeps
/// only octants 0..3 and doubles every angular integral.
struct AngularDomain {
  bool hemisphere = true;
  int octants() const { return hemisphere ? 4 : 8; }
  double weight() const { return hemisphere ? 2.0 : 1.0; }
};

/// Block preconditioners: independent element/node block solves, or one
/// forward and one backward block Gauss-Seidel pass over the elements.
/// `direct` (FP_n only) factorises the whole sparse matrix once; the Haar
/// operator treats it as gauss_seidel.
enum class Preconditioner { block_jacobi, gauss_seidel, direct };

/// Matrix-free discrete transport operator on a block space-angle vector.
class TransportOperator {
 public:
  virtual ~TransportOperator() = default;

  std::size_t size() const { return offsets_.back(); }
  std::size_t block_offset(int node) const { return offsets_[node]; }
  std::size_t block_size(int node) const { return offsets_[node + 1] - offsets_[node]; }
  const DgMesh& mesh() const { return *mesh_; }
  const AngularDomain& domain() const { return domain_; }
  Preconditioner preconditioner() const { return preconditioner_; }
  void set_preconditioner(Preconditioner p) { preconditioner_ = p; }

  /// y = A x (forward) or y = A^T x (adjoint).
  virtual void apply(std::span<const double> x, std::span<double> y, Mode mode) const = 0;
  /// Approximate inverse of the per-element / per-node diagonal blocks.
  virtual void precondition(std::span<const double> r, std::span<double> z, Mode mode) const = 0;
  /// Diagonal entries of A (shared by A^T).
  virtual std::vector<double> diagonal() const = 0;
  /// Tested load of an isotropic angular source; `density(region)` is per steradian.
  virtual std::vector<double> isotropic_load(const std::function<double(int)>& density) const = 0;
  /// Scalar flux at every DG node.
  virtual std::vector<double> scalar_flux(std::span<const double> x) const = 0;

  std::vector<double> apply(std::span<const double> x, Mode mode) const;

 protected:
  TransportOperator(std::shared_ptr<const DgMesh> mesh, AngularDomain domain)
      : mesh_(std::move(mesh)), domain_(domain) {}
  void check_size(std::span<const double> v, const char* what) const;

  std::shared_ptr<const DgMesh> mesh_;
  AngularDomain domain_;
  Preconditioner preconditioner_ = Preconditioner::gauss_seidel;
  std::vector<std::size_t> offsets_{0};
};

/// Adaptive Haar angular discretisation with one tree per DG node.
class HaarTransport final : public TransportOperator {
 public:
  /// Integral of the source over `patch` at point (x, y).
  using PatchSource = std::function<double(double x, double y, const SpherePatch& patch)>;
  /// Mean incoming angular flux over `patch` at boundary point (x, y).
  using PatchInflow = std::function<double(double x, double y, const SpherePatch& patch)>;

  HaarTransport(std::shared_ptr<const DgMesh> mesh, std::vector<TreePtr> trees,
                AngularDomain domain = {});

  const TreePtr& tree(int node) const { return trees_[node]; }
  const std::vector<TreePtr>& trees() const { return trees_; }

  void apply(std::span<const double> x, std::span<double> y, Mode mode) const override;
  void precondition(std::span<const double> r, std::span<double> z, Mode mode) const override;
  std::vector<double> diagonal() const override;
  std::vector<double> isotropic_load(const std::function<double(int)>& density) const override;
  std::vector<double> scalar_flux(std::span<const double> x) const override;
  using TransportOperator::apply;

  /// Load from a space-angle source (linear in space per element) and an
  /// optional inflow boundary profile.
  std::vector<double> load(const PatchSource& source, const PatchInflow& inflow = {}) const;
  /// Net outgoing particle current through the boundary.
  double boundary_outflow(std::span<const double> x) const;

  /// Per-node maps over all eight octants; in the hemisphere setting the
  /// lower octants are filled by reflection.
  std::vector<AngleMap> to_maps(std::span<const double> x, int max_level) const;
  std::vector<double> from_maps(const std::vector<AngleMap>& maps) const;

 private:
  struct Pair {
    int row, col;
    double area, mx, my;
    int faces;
    std::array<double, 2> fnx, fny, fminus;
    double eval(const PatchGeometry& g) const;
  };
  void leaf_values(std::span<const double> x, std::vector<double>& leaves) const;
  void pair_product(const Pair& p, const std::vector<double>& in, std::vector<double>& out,
                    Mode mode) const;
  void add_scatter(std::span<const double> x, std::span<double> y) const;
  /// Solves the element's diagonal block in leaf space; `dst` may alias `src`.
  void element_solve(int e, std::vector<double>& src, std::vector<double>& dst, Mode mode) const;
  /// leaf_res_ on element e = leaf_in_ - (K leaf_out_) restricted to e.
  void element_residual(int e, Mode mode) const;

  std::vector<TreePtr> trees_;
  std::vector<Pair> pairs_;
  std::vector<int> element_pairs_;  ///< first same-element pair of each element (9 each)
  std::vector<std::vector<int>> row_pairs_, col_pairs_;  ///< cross-element pairs by element
  mutable std::vector<double> leaf_in_, leaf_out_, leaf_res_;
};

/// Filtered spherical-harmonics angular discretisation with Lax-Friedrichs faces.
class FpnTransport final : public TransportOperator {
 public:
  FpnTransport(std::shared_ptr<const DgMesh> mesh, FpnConfig config, AngularDomain domain = {});
  ~FpnTransport() override;

  const FpnConfig& config() const { return config_; }
  /// Flat harmonic indices of the per-node basis (those with l + m even in
  /// the hemisphere setting).
  const std::vector<int>& basis() const { return basis_; }
  /// Full (N+1)^2 coefficient vector of one node.
  std::vector<double> node_coefficients(std::span<const double> x, int node) const;

  void apply(std::span<const double> x, std::span<double> y, Mode mode) const override;
  void precondition(std::span<const double> r, std::span<double> z, Mode mode) const override;
  std::vector<double> diagonal() const override;
  std::vector<double> isotropic_load(const std::function<double(int)>& density) const override;
  std::vector<double> scalar_flux(std::span<const double> x) const override;
  using TransportOperator::apply;

  /// Number of distinct factorised node blocks (0 when using the diagonal fallback).
  std::size_t distinct_blocks() const { return block_lu_.size(); }

  /// Sparse forward matrix in the unknown ordering of apply.
  Eigen::SparseMatrix<double> assemble() const;

 private:
  struct BlockLu {
    Eigen::PartialPivLU<Eigen::MatrixXd> forward, adjoint;
    explicit BlockLu(const Eigen::MatrixXd& m) : forward(m), adjoint(m.transpose()) {}
    Eigen::VectorXd solve(const Eigen::VectorXd& r, Mode mode) const {
      return mode == Mode::forward ? forward.solve(r) : adjoint.solve(r);
    }
  };

  Eigen::MatrixXd node_block(int node) const;
  Eigen::MatrixXd element_block(int e) const;
  /// Rows of element e of A z (forward) or A^T z (adjoint).
  void element_apply(int e, std::span<const double> z, Eigen::VectorXd& out, Mode mode) const;
  /// z += one symmetric Gauss-Seidel pass on r - A z.
  void sweep(std::span<const double> r, std::span<double> z, Mode mode) const;

  FpnConfig config_;
  std::vector<int> basis_;
  Eigen::MatrixXd mx_, my_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> mxs_, mys_;
  Eigen::VectorXd filter_;
  std::vector<std::array<std::array<double, 3>, 3>> edges_;  ///< outward (nx, ny, length) per local edge
  std::vector<Eigen::VectorXd> block_diags_;
  std::vector<std::array<int, 3>> element_faces_;  ///< face index per local edge
  std::vector<BlockLu> element_lu_;
  std::vector<int> element_block_id_;
  std::vector<BlockLu> block_lu_;
  std::vector<int> node_block_id_;
  std::vector<double> diag_;
  mutable std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> direct_lu_;
};

struct SolveOptions {
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  int max_iterations = 5000;
  int restart = 40;
  /// Wall-clock instant after which the solve gives up with SolverError.
  std::optional<std::chrono::steady_clock::time_point> deadline;
};

struct SolveResult {
  std::vector<double> x;
  int iterations = 0;
  double residual = 0.0;
};

/// Right-preconditioned restarted GMRES. Throws SolverError when the
/// tolerance is not met within max_iterations or before the deadline.
SolveResult solve(const TransportOperator& op, std::span<const double> rhs, Mode mode,
                  const SolveOptions& options = {});

/// Load of the mesh's isotropic sources (angular density source / 4pi).
std::vector<double> forward_source(const TransportOperator& op);
/// Load whose inner product with a solution gives the functional: angular
/// density 1 / V_D on the goal region.
std::vector<double> adjoint_source(const TransportOperator& op, int goal_region);
/// Average scalar flux over a region.
double functional(const TransportOperator& op, std::span<const double> x, int goal_region);

double dot(std::span<const double> a, std::span<const double> b);

}  // namespace angadapt
