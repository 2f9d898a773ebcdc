#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shprobe/sh.hpp"

namespace shprobe::cg {

// Product of real orthonormal harmonics expanded in the same basis:
//   Y_a(u) Y_b(u) = sum_c G(a, b, c) Y_c(u),   G(a,b,c) = integral Y_a Y_b Y_c.
// Coefficients are fully symmetric in the three index slots and vanish unless
// the degrees satisfy the triangle inequality and l1+l2+l3 is even; such
// entries are structurally absent from the table, never stored as rounded
// noise.  Built once by spherical quadrature at guaranteed exactness, then
// read-only and safe to share across threads.
class GauntTable {
 public:
  struct Coupling {
    int idx;   // flat index l^2+l+m of the output harmonic
    double g;  // coefficient
  };

  explicit GauntTable(int max_degree);

  int max_degree() const { return max_degree_; }

  // 0.0 for structurally absent or numerically null entries.
  double coefficient(int l1, int m1, int l2, int m2, int l3, int m3) const;

  // All nonzero expansions of Y_{idx1} * Y_{idx2}, flat-indexed inputs.
  const std::vector<Coupling>& couplings(int idx1, int idx2) const;

  // Portable cache: JSON records of (l1,m1,l2,m2,l3,m3,g) keyed by the
  // convention id and max degree.
  void save(const std::string& path) const;
  static GauntTable load(const std::string& path);

  static constexpr const char* kConventionId = "real-orthonormal-cs-absorbed-v1";

 private:
  GauntTable() = default;
  int max_degree_ = 0;
  int block_ = 0;  // (max_degree+1)^2
  std::vector<std::vector<Coupling>> pairs_;
};

// One polynomial monomial in the entries of a feature vector: an unordered
// list of (l, m) factors, degree = factor count.
struct MonomialSpec {
  std::vector<std::pair<int, int>> factors;
  int degree() const { return static_cast<int>(factors.size()); }
};

// Coefficients of the pointwise product of the syntheses of a and b.
// Output degree a.degree + b.degree (must stay within the table).
sh::SHVector product_expand(const sh::SHVector& a, const sh::SHVector& b,
                            const GauntTable& table);

// Iterated product expansion of a monomial; support lies within degree
// sum_k l_k.
sh::SHVector monomial_to_sh(const MonomialSpec& spec, const GauntTable& table);

// Dimension of the degree-n component of the space of degree-<=d polynomials
// in the entries of phi_L: enumerate all monomials (multisets of feature
// entries), expand each, project onto the degree-n block, and return the
// numerical rank (SVD, relative threshold 1e-8).
int span_rank(int L, int d, int n, const GauntTable& table);

inline constexpr std::size_t kMonomialGuard = 200000;

// Coefficient at (n, n), n = q*L + r, of (Y_L^L)^q * Y_r^r.
double stretched_top_coefficient(int L, int q, int r, const GauntTable& table);

// Number of order tuples (m_1..m_d), |m_k| <= L, with sum m_k = d*L.
long weight_multiplicity(int L, int d);

}  // namespace shprobe::cg
