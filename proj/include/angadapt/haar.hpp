#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include "angadapt/sphere_grid.hpp"

namespace angadapt {

enum class WaveletType { phi = 0, mu = 1, diag = 2 };

/// Identifies one basis function of a non-standard Haar expansion.
struct WaveletIndex {
  bool scaling = true;
  SpherePatch patch;
  WaveletType type = WaveletType::phi;  // ignored for scaling functions
};

/// Immutable subdivision structure of the sphere over the 8 base octants.
///
/// Nodes are stored octant by octant in depth-first preorder. Within octant
/// o, coefficients and leaves share the index range
/// [octant_offset(o), octant_offset(o + 1)): slot 0 holds the scaling
/// coefficient and slots 1 + 3k .. 3 + 3k the (phi, mu, diag) wavelets of
/// the k-th subdivided node in preorder; leaves are numbered in preorder.
/// Each subdivision adds three wavelets and three net leaves, so both counts
/// agree per octant.
class AngleTree {
 public:
  struct Node {
    PatchKey key = 0;
    int level = 0;
    int parent = -1;
    std::array<int, 4> child{-1, -1, -1, -1};
    int coeff = -1;  ///< first of the three wavelet slots; -1 for leaves
    int leaf = -1;   ///< leaf slot; -1 for subdivided nodes

    bool subdivided() const { return child[0] >= 0; }
  };

  /// Builds a tree from the set of subdivided patches. Throws StructuralError
  /// if a subdivided patch has an undivided (or absent) parent.
  static std::shared_ptr<const AngleTree> build(std::vector<PatchKey> subdivided);
  /// All patches subdivided down to `level` in every octant.
  static std::shared_ptr<const AngleTree> uniform(int level);
  /// H_1: the eight base octants, nothing subdivided.
  static std::shared_ptr<const AngleTree> base();

  int size() const { return static_cast<int>(nodes_.size()); }
  const Node& node(int i) const { return nodes_[i]; }
  const SpherePatch& patch(int i) const { return patches_[i]; }
  const PatchGeometry& geometry(int i) const { return geometry_[i]; }
  int root(int octant) const { return roots_[octant]; }
  int octant_offset(int octant) const { return offsets_[octant]; }
  /// Number of basis functions (= effective leaves) over the first `octants` octants.
  int num_functions(int octants = 8) const { return offsets_[octants]; }
  int max_depth() const { return max_depth_; }
  /// Node index owning a leaf slot.
  int leaf_node(int leaf) const { return leaf_nodes_[leaf]; }
  /// Node index for a key, or -1.
  int find(PatchKey key) const;
  /// Sorted keys of all subdivided patches; identifies the tree.
  const std::vector<PatchKey>& subdivided() const { return subdivided_; }

  WaveletIndex wavelet_index(int coeff) const;
  /// Leaf-slot ranges covered by each coefficient's support.
  int coeff_node(int coeff) const { return coeff_nodes_[coeff]; }
  /// One byte per node in storage order: 1 if subdivided.
  std::span<const std::uint8_t> subdivided_flags() const { return flags_; }

 private:
  std::vector<Node> nodes_;
  std::vector<std::uint8_t> flags_;
  std::vector<SpherePatch> patches_;
  std::vector<PatchGeometry> geometry_;
  std::array<int, 8> roots_{};
  std::array<int, 9> offsets_{};
  std::vector<int> leaf_nodes_;
  std::vector<int> coeff_nodes_;  // node supporting each coefficient slot
  std::vector<PatchKey> subdivided_;
  std::unordered_map<PatchKey, int> index_;
  int max_depth_ = 0;
};

using TreePtr = std::shared_ptr<const AngleTree>;

/// Deduplicates structurally identical trees so that nodes with the same
/// refinement share one object (and the transport can take fast paths).
class TreeRegistry {
 public:
  TreePtr intern(std::vector<PatchKey> subdivided);
  TreePtr intern(const TreePtr& tree);
  std::size_t size() const { return trees_.size(); }

 private:
  std::map<std::vector<PatchKey>, TreePtr> trees_;
};

/// Per-node angular representation: an adaptive tree plus one coefficient
/// per active basis function (alpha for scaling, beta for wavelets).
struct AngleMap {
  TreePtr tree;
  std::vector<double> coeffs;
  int max_level = kMaxPatchLevel;

  AngleMap() = default;
  AngleMap(TreePtr t, int max_lvl = kMaxPatchLevel);
  AngleMap(TreePtr t, std::vector<double> c, int max_lvl = kMaxPatchLevel);

  int num_functions() const { return tree->num_functions(); }
};

/// Coefficients -> value on every effective leaf. O(active functions).
std::vector<double> mallat_inverse(const AngleMap& m);
/// Leaf values -> coefficients on the given tree.
AngleMap mallat_forward(std::span<const double> leaf_values, const TreePtr& tree,
                        int max_level = kMaxPatchLevel);

// Span-based kernels over the first `octants` octants; used by the transport.
void synthesize(const AngleTree& t, std::span<const double> coeffs, std::span<double> leaves,
                int octants = 8);
void analyse(const AngleTree& t, std::span<const double> leaves, std::span<double> coeffs,
             int octants = 8);
/// Transpose of synthesize: leaf-tested values -> basis-tested values.
void synthesize_transpose(const AngleTree& t, std::span<const double> leaves,
                          std::span<double> coeffs, int octants = 8);
/// Transpose of analyse.
void analyse_transpose(const AngleTree& t, std::span<const double> coeffs,
                       std::span<double> leaves, int octants = 8);
/// out[a] = sum of `leaves` over the support of basis function a.
void support_sum(const AngleTree& t, std::span<const double> leaves, std::span<double> coeffs,
                 int octants = 8);

struct RefineResult {
  AngleMap map;
  std::vector<PatchKey> rejected;  ///< targets at max_level or not leaves
};

/// Subdivides the target leaves; new wavelet coefficients start at zero.
RefineResult refine(const AngleMap& m, const std::vector<PatchKey>& targets,
                    TreeRegistry* registry = nullptr);

struct CoarsenResult {
  AngleMap map;
  std::vector<PatchKey> rejected;  ///< targets whose children are not all leaves
};

/// Removes the wavelets of target patches whose four children are leaves.
CoarsenResult coarsen(const AngleMap& m, const std::vector<PatchKey>& targets,
                      TreeRegistry* registry = nullptr);

/// Copies coefficients of `from` into the layout of `to_tree`; functions
/// absent from `from` are set to zero and functions absent from `to_tree`
/// are dropped.
std::vector<double> transfer_coefficients(const AngleTree& from, std::span<const double> coeffs,
                                          const AngleTree& to_tree, int octants = 8);

/// Tree refined to `level` on every patch overlapping [phi_lo,phi_hi] x
/// [mu_lo,mu_hi] with positive measure.
TreePtr bounded_refinement(double phi_lo, double phi_hi, double mu_lo, double mu_hi, int level,
                           bool mirror_mu = false);

/// The tree reflected through mu -> -mu.
TreePtr mirror_tree(const AngleTree& t);

}  // namespace angadapt
