#include "angadapt/haar.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <string>
#include <unordered_set>

#include "angadapt/errors.hpp"

namespace angadapt {

namespace {

// Sign patterns of the (phi, mu, diag) wavelets on children 0..3.
constexpr double kSignPhi[4] = {-1.0, 1.0, -1.0, 1.0};
constexpr double kSignMu[4] = {-1.0, -1.0, 1.0, 1.0};
constexpr double kSignDiag[4] = {1.0, -1.0, -1.0, 1.0};

std::vector<double>& scratch(std::size_t n) {
  thread_local std::vector<double> buffer;
  if (buffer.size() < n) buffer.resize(n);
  return buffer;
}

int node_end(const AngleTree& t, int octant) {
  return octant + 1 < 8 ? t.root(octant + 1) : t.size();
}

}  // namespace

std::shared_ptr<const AngleTree> AngleTree::build(std::vector<PatchKey> subdivided) {
  std::sort(subdivided.begin(), subdivided.end());
  subdivided.erase(std::unique(subdivided.begin(), subdivided.end()), subdivided.end());
  const std::unordered_set<PatchKey> lookup(subdivided.begin(), subdivided.end());
  for (const PatchKey key : subdivided) {
    const int level = key_level(key);
    if (level + 1 > kMaxPatchLevel)
      throw StructuralError("AngleTree: patch at level " + std::to_string(level) +
                            " cannot be subdivided further");
    if (level > 0 && !lookup.contains(parent_key(key)))
      throw StructuralError("AngleTree: subdivided patch at level " + std::to_string(level) +
                            " has an undivided parent (orphan)");
  }

  auto tree = std::make_shared<AngleTree>();
  tree->subdivided_ = std::move(subdivided);
  int offset = 0;
  for (int o = 0; o < 8; ++o) {
    tree->offsets_[o] = offset;
    int wavelet_count = 0;
    int leaf_count = 0;
    tree->roots_[o] = tree->size();
    std::function<void(const SpherePatch&, int)> visit = [&](const SpherePatch& p, int parent) {
      const int idx = tree->size();
      Node n;
      n.key = patch_key(p);
      n.level = p.level;
      n.parent = parent;
      tree->nodes_.push_back(n);
      tree->patches_.push_back(p);
      tree->geometry_.push_back(PatchGeometry::of(p));
      tree->max_depth_ = std::max(tree->max_depth_, p.level);
      if (lookup.contains(n.key)) {
        tree->nodes_[idx].coeff = offset + 1 + 3 * wavelet_count++;
        const auto kids = subdivide(p);
        for (int c = 0; c < 4; ++c) {
          tree->nodes_[idx].child[c] = tree->size();
          visit(kids[c], idx);
        }
      } else {
        tree->nodes_[idx].leaf = offset + leaf_count++;
      }
    };
    visit(base_octant(o), -1);
    offset += leaf_count;
  }
  tree->offsets_[8] = offset;

  tree->leaf_nodes_.assign(offset, -1);
  tree->coeff_nodes_.assign(offset, -1);
  for (int o = 0; o < 8; ++o) tree->coeff_nodes_[tree->offsets_[o]] = tree->roots_[o];
  for (int i = 0; i < tree->size(); ++i) {
    const Node& n = tree->nodes_[i];
    tree->index_.emplace(n.key, i);
    tree->flags_.push_back(n.subdivided() ? 1 : 0);
    if (n.leaf >= 0) tree->leaf_nodes_[n.leaf] = i;
    if (n.coeff >= 0)
      for (int t = 0; t < 3; ++t) tree->coeff_nodes_[n.coeff + t] = i;
  }
  return tree;
}

std::shared_ptr<const AngleTree> AngleTree::uniform(int level) {
  std::vector<PatchKey> keys;
  for (int o = 0; o < 8; ++o) {
    for (int l = 0; l < level; ++l) {
      const std::uint32_t n = std::uint32_t{1} << l;
      for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t j = 0; j < n; ++j) keys.push_back(patch_key(o, l, i, j));
    }
  }
  return build(std::move(keys));
}

std::shared_ptr<const AngleTree> AngleTree::base() { return build({}); }

int AngleTree::find(PatchKey key) const {
  const auto it = index_.find(key);
  return it == index_.end() ? -1 : it->second;
}

WaveletIndex AngleTree::wavelet_index(int coeff) const {
  WaveletIndex w;
  const int node = coeff_nodes_.at(coeff);
  w.patch = patches_[node];
  const int octant = key_octant(nodes_[node].key);
  if (coeff == offsets_[octant]) {
    w.scaling = true;
  } else {
    w.scaling = false;
    w.type = static_cast<WaveletType>(coeff - nodes_[node].coeff);
  }
  return w;
}

TreePtr TreeRegistry::intern(std::vector<PatchKey> subdivided) {
  std::sort(subdivided.begin(), subdivided.end());
  subdivided.erase(std::unique(subdivided.begin(), subdivided.end()), subdivided.end());
  auto it = trees_.find(subdivided);
  if (it != trees_.end()) return it->second;
  TreePtr tree = AngleTree::build(subdivided);
  trees_.emplace(std::move(subdivided), tree);
  return tree;
}

TreePtr TreeRegistry::intern(const TreePtr& tree) {
  auto [it, inserted] = trees_.emplace(tree->subdivided(), tree);
  return it->second;
}

AngleMap::AngleMap(TreePtr t, int max_lvl)
    : tree(std::move(t)), coeffs(tree->num_functions(), 0.0), max_level(max_lvl) {}

AngleMap::AngleMap(TreePtr t, std::vector<double> c, int max_lvl)
    : tree(std::move(t)), coeffs(std::move(c)), max_level(max_lvl) {
  if (static_cast<int>(coeffs.size()) != tree->num_functions())
    throw StructuralError("AngleMap: coefficient count does not match the tree");
}

void synthesize(const AngleTree& t, std::span<const double> coeffs, std::span<double> leaves,
                int octants) {
  const auto flags = t.subdivided_flags();
  std::array<double, 3 * kMaxPatchLevel + 4> stack;
  for (int o = 0; o < octants; ++o) {
    int c = t.octant_offset(o) + 1;
    int leaf = t.octant_offset(o);
    int top = 0;
    stack[top++] = coeffs[t.octant_offset(o)];
    for (int i = t.root(o), end = node_end(t, o); i < end; ++i) {
      const double v = stack[--top];
      if (!flags[i]) {
        leaves[leaf++] = v;
        continue;
      }
      const double wp = coeffs[c];
      const double wm = coeffs[c + 1];
      const double wd = coeffs[c + 2];
      c += 3;
      stack[top++] = v + wp + wm + wd;
      stack[top++] = v - wp + wm - wd;
      stack[top++] = v + wp - wm - wd;
      stack[top++] = v - wp - wm + wd;
    }
  }
}

void analyse(const AngleTree& t, std::span<const double> leaves, std::span<double> coeffs,
             int octants) {
  const auto flags = t.subdivided_flags();
  std::array<double, 3 * kMaxPatchLevel + 4> stack;
  for (int o = 0; o < octants; ++o) {
    int leaf = t.octant_offset(o + 1);
    int c = leaf;
    int top = 0;
    for (int i = node_end(t, o) - 1; i >= t.root(o); --i) {
      if (!flags[i]) {
        stack[top++] = leaves[--leaf];
        continue;
      }
      const double c1 = stack[--top];
      const double c2 = stack[--top];
      const double c3 = stack[--top];
      const double c4 = stack[--top];
      c -= 3;
      stack[top++] = 0.25 * (c1 + c2 + c3 + c4);
      coeffs[c] = 0.25 * (-c1 + c2 - c3 + c4);
      coeffs[c + 1] = 0.25 * (-c1 - c2 + c3 + c4);
      coeffs[c + 2] = 0.25 * (c1 - c2 - c3 + c4);
    }
    coeffs[t.octant_offset(o)] = stack[--top];
  }
}

void synthesize_transpose(const AngleTree& t, std::span<const double> leaves,
                          std::span<double> coeffs, int octants) {
  auto& s = scratch(t.size());
  for (int o = 0; o < octants; ++o) {
    const int begin = t.root(o);
    for (int i = node_end(t, o) - 1; i >= begin; --i) {
      const AngleTree::Node& n = t.node(i);
      if (n.leaf >= 0) {
        s[i] = leaves[n.leaf];
        continue;
      }
      const double c1 = s[n.child[0]];
      const double c2 = s[n.child[1]];
      const double c3 = s[n.child[2]];
      const double c4 = s[n.child[3]];
      s[i] = c1 + c2 + c3 + c4;
      coeffs[n.coeff] = -c1 + c2 - c3 + c4;
      coeffs[n.coeff + 1] = -c1 - c2 + c3 + c4;
      coeffs[n.coeff + 2] = c1 - c2 - c3 + c4;
    }
    coeffs[t.octant_offset(o)] = s[begin];
  }
}

void analyse_transpose(const AngleTree& t, std::span<const double> coeffs,
                       std::span<double> leaves, int octants) {
  auto& s = scratch(t.size());
  for (int o = 0; o < octants; ++o) {
    const int begin = t.root(o);
    const int end = node_end(t, o);
    s[begin] = coeffs[t.octant_offset(o)];
    for (int i = begin; i < end; ++i) {
      const AngleTree::Node& n = t.node(i);
      if (n.leaf >= 0) {
        leaves[n.leaf] = s[i];
        continue;
      }
      const double v = s[i];
      const double wp = coeffs[n.coeff];
      const double wm = coeffs[n.coeff + 1];
      const double wd = coeffs[n.coeff + 2];
      for (int c = 0; c < 4; ++c)
        s[n.child[c]] = 0.25 * (v + kSignPhi[c] * wp + kSignMu[c] * wm + kSignDiag[c] * wd);
    }
  }
}

void support_sum(const AngleTree& t, std::span<const double> leaves, std::span<double> coeffs,
                 int octants) {
  auto& s = scratch(t.size());
  for (int o = 0; o < octants; ++o) {
    const int begin = t.root(o);
    for (int i = node_end(t, o) - 1; i >= begin; --i) {
      const AngleTree::Node& n = t.node(i);
      if (n.leaf >= 0) {
        s[i] = leaves[n.leaf];
        continue;
      }
      s[i] = s[n.child[0]] + s[n.child[1]] + s[n.child[2]] + s[n.child[3]];
      coeffs[n.coeff] = coeffs[n.coeff + 1] = coeffs[n.coeff + 2] = s[i];
    }
    coeffs[t.octant_offset(o)] = s[begin];
  }
}

std::vector<double> mallat_inverse(const AngleMap& m) {
  if (!m.tree) throw StructuralError("mallat_inverse: map has no tree");
  if (static_cast<int>(m.coeffs.size()) != m.tree->num_functions())
    throw StructuralError("mallat_inverse: coefficient count does not match the tree");
  std::vector<double> leaves(m.coeffs.size());
  synthesize(*m.tree, m.coeffs, leaves);
  return leaves;
}

AngleMap mallat_forward(std::span<const double> leaf_values, const TreePtr& tree, int max_level) {
  if (static_cast<int>(leaf_values.size()) != tree->num_functions())
    throw StructuralError("mallat_forward: " + std::to_string(leaf_values.size()) +
                          " leaf values for a tree with " +
                          std::to_string(tree->num_functions()) + " leaves");
  AngleMap out(tree, max_level);
  analyse(*tree, leaf_values, out.coeffs);
  return out;
}

std::vector<double> transfer_coefficients(const AngleTree& from, std::span<const double> coeffs,
                                          const AngleTree& to_tree, int octants) {
  std::vector<double> out(to_tree.num_functions(octants), 0.0);
  for (int o = 0; o < octants; ++o) out[to_tree.octant_offset(o)] = coeffs[from.octant_offset(o)];
  for (int i = 0; i < to_tree.size(); ++i) {
    const AngleTree::Node& n = to_tree.node(i);
    if (n.coeff < 0 || n.coeff >= static_cast<int>(out.size())) continue;
    const int j = from.find(n.key);
    if (j < 0 || from.node(j).coeff < 0) continue;
    for (int t = 0; t < 3; ++t) out[n.coeff + t] = coeffs[from.node(j).coeff + t];
  }
  return out;
}

RefineResult refine(const AngleMap& m, const std::vector<PatchKey>& targets,
                    TreeRegistry* registry) {
  RefineResult result;
  std::vector<PatchKey> accepted;
  for (const PatchKey key : targets) {
    const int i = m.tree->find(key);
    if (i < 0 || m.tree->node(i).subdivided() || key_level(key) >= m.max_level) {
      result.rejected.push_back(key);
      continue;
    }
    accepted.push_back(key);
  }
  if (accepted.empty()) {
    result.map = m;
    return result;
  }
  std::vector<PatchKey> keys = m.tree->subdivided();
  keys.insert(keys.end(), accepted.begin(), accepted.end());
  TreePtr tree = registry ? registry->intern(std::move(keys)) : AngleTree::build(std::move(keys));
  result.map = AngleMap(tree, transfer_coefficients(*m.tree, m.coeffs, *tree), m.max_level);
  return result;
}

CoarsenResult coarsen(const AngleMap& m, const std::vector<PatchKey>& targets,
                      TreeRegistry* registry) {
  CoarsenResult result;
  std::unordered_set<PatchKey> removed;
  for (const PatchKey key : targets) {
    const int i = m.tree->find(key);
    bool ok = i >= 0 && m.tree->node(i).subdivided();
    if (ok)
      for (int c = 0; c < 4; ++c) ok = ok && !m.tree->node(m.tree->node(i).child[c]).subdivided();
    if (!ok) {
      result.rejected.push_back(key);
      continue;
    }
    removed.insert(key);
  }
  if (removed.empty()) {
    result.map = m;
    return result;
  }
  std::vector<PatchKey> keys;
  for (const PatchKey key : m.tree->subdivided())
    if (!removed.contains(key)) keys.push_back(key);
  TreePtr tree = registry ? registry->intern(std::move(keys)) : AngleTree::build(std::move(keys));
  result.map = AngleMap(tree, transfer_coefficients(*m.tree, m.coeffs, *tree), m.max_level);
  return result;
}

TreePtr bounded_refinement(double phi_lo, double phi_hi, double mu_lo, double mu_hi, int level,
                           bool mirror_mu) {
  auto overlaps = [&](const SpherePatch& p) {
    const double dphi = std::min(p.phi_hi, phi_hi) - std::max(p.phi_lo, phi_lo);
    const double dmu = std::min(p.mu_hi, mu_hi) - std::max(p.mu_lo, mu_lo);
    const double dmu_mirror = std::min(-p.mu_lo, mu_hi) - std::max(-p.mu_hi, mu_lo);
    return dphi > 0.0 && (dmu > 0.0 || (mirror_mu && dmu_mirror > 0.0));
  };
  std::vector<PatchKey> keys;
  std::function<void(const SpherePatch&)> visit = [&](const SpherePatch& p) {
    if (p.level >= level || !overlaps(p)) return;
    keys.push_back(patch_key(p));
    for (const SpherePatch& c : subdivide(p)) visit(c);
  };
  for (const SpherePatch& o : base_octants()) visit(o);
  return AngleTree::build(std::move(keys));
}

TreePtr mirror_tree(const AngleTree& t) {
  std::vector<PatchKey> keys;
  keys.reserve(t.subdivided().size());
  for (const PatchKey k : t.subdivided()) keys.push_back(mirror_key(k));
  return AngleTree::build(std::move(keys));
}

}  // namespace angadapt
