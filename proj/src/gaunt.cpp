#include "shprobe/gaunt.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "shprobe/errors.hpp"

namespace shprobe::cg {

namespace {

// Entries below this magnitude are quadrature zeros of selection rules the
// triangle/parity test does not cover (real-basis m rules); true couplings
// are orders of magnitude larger.
constexpr double kNullThreshold = 1e-13;

int degree_of_index(int idx) { return static_cast<int>(std::sqrt(idx + 0.5)); }

}  // namespace

GauntTable::GauntTable(int max_degree) {
  if (max_degree < 0 || max_degree > sh::kMaxDegree)
    throw ArgumentError("GauntTable: max degree outside supported range");
  max_degree_ = max_degree;
  block_ = (max_degree + 1) * (max_degree + 1);
  pairs_.assign(static_cast<std::size_t>(block_) * block_, {});

  // Quadrature exact for triple products: polynomial degree <= 3*max_degree.
  const sh::QuadratureGrid grid = sh::build_grid_exact(3 * max_degree + 1);
  const std::size_t nn = grid.size();

  // Y table per node, weighted copy for the final dot products.
  std::vector<double> ytab(nn * block_), wytab(nn * block_);
  for (std::size_t k = 0; k < nn; ++k) {
    sh::eval_basis(max_degree, grid.nodes[k], &ytab[k * block_]);
    for (int j = 0; j < block_; ++j)
      wytab[k * block_ + j] = grid.weights[k] * ytab[k * block_ + j];
  }

  std::vector<double> prod(nn);
  for (int l1 = 0; l1 <= max_degree; ++l1)
    for (int m1 = -l1; m1 <= l1; ++m1) {
      const int i1 = static_cast<int>(sh::SHVector::index(l1, m1));
      for (int l2 = l1; l2 <= max_degree; ++l2)
        for (int m2 = (l2 == l1 ? m1 : -l2); m2 <= l2; ++m2) {
          const int i2 = static_cast<int>(sh::SHVector::index(l2, m2));
          for (std::size_t k = 0; k < nn; ++k)
            prod[k] = ytab[k * block_ + i1] * ytab[k * block_ + i2];
          auto& list = pairs_[static_cast<std::size_t>(i1) * block_ + i2];
          for (int l3 = l2 - l1; l3 <= std::min(l1 + l2, max_degree); ++l3) {
            if ((l1 + l2 + l3) % 2 != 0) continue;
            for (int m3 = -l3; m3 <= l3; ++m3) {
              const int i3 = static_cast<int>(sh::SHVector::index(l3, m3));
              double g = 0.0;
              for (std::size_t k = 0; k < nn; ++k)
                g += prod[k] * wytab[k * block_ + i3];
              if (std::abs(g) > kNullThreshold) list.push_back({i3, g});
            }
          }
          if (i1 != i2)
            pairs_[static_cast<std::size_t>(i2) * block_ + i1] = list;
        }
    }
}

double GauntTable::coefficient(int l1, int m1, int l2, int m2, int l3,
                               int m3) const {
  auto valid = [&](int l, int m) {
    return l >= 0 && l <= max_degree_ && m >= -l && m <= l;
  };
  if (!valid(l1, m1) || !valid(l2, m2) || !valid(l3, m3))
    throw ArgumentError("GauntTable::coefficient: invalid index");
  const int i3 = static_cast<int>(sh::SHVector::index(l3, m3));
  for (const auto& c : couplings(static_cast<int>(sh::SHVector::index(l1, m1)),
                                 static_cast<int>(sh::SHVector::index(l2, m2))))
    if (c.idx == i3) return c.g;
  return 0.0;
}

const std::vector<GauntTable::Coupling>& GauntTable::couplings(int idx1,
                                                               int idx2) const {
  return pairs_[static_cast<std::size_t>(idx1) * block_ + idx2];
}

void GauntTable::save(const std::string& path) const {
  nlohmann::ordered_json j;
  j["convention"] = kConventionId;
  j["max_degree"] = max_degree_;
  auto& records = j["entries"] = nlohmann::ordered_json::array();
  for (int i1 = 0; i1 < block_; ++i1)
    for (int i2 = i1; i2 < block_; ++i2) {
      const int l1 = degree_of_index(i1), l2 = degree_of_index(i2);
      const int m1 = i1 - l1 * l1 - l1, m2 = i2 - l2 * l2 - l2;
      for (const auto& c : couplings(i1, i2)) {
        const int l3 = degree_of_index(c.idx);
        records.push_back({l1, m1, l2, m2, l3, c.idx - l3 * l3 - l3, c.g});
      }
    }
  std::ofstream out(path);
  if (!out) throw ArgumentError("GauntTable::save: cannot write " + path);
  out << j.dump();
}

GauntTable GauntTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("GauntTable::load: cannot read " + path);
  nlohmann::json j;
  in >> j;
  if (j.at("convention").get<std::string>() != kConventionId)
    throw ArgumentError("GauntTable::load: convention mismatch");
  GauntTable t;
  t.max_degree_ = j.at("max_degree").get<int>();
  t.block_ = (t.max_degree_ + 1) * (t.max_degree_ + 1);
  t.pairs_.assign(static_cast<std::size_t>(t.block_) * t.block_, {});
  for (const auto& rec : j.at("entries")) {
    const int l1 = rec[0], m1 = rec[1], l2 = rec[2], m2 = rec[3], l3 = rec[4],
              m3 = rec[5];
    const double g = rec[6];
    const int i1 = static_cast<int>(sh::SHVector::index(l1, m1));
    const int i2 = static_cast<int>(sh::SHVector::index(l2, m2));
    const int i3 = static_cast<int>(sh::SHVector::index(l3, m3));
    t.pairs_[static_cast<std::size_t>(i1) * t.block_ + i2].push_back({i3, g});
    if (i1 != i2)
      t.pairs_[static_cast<std::size_t>(i2) * t.block_ + i1].push_back({i3, g});
  }
  return t;
}

sh::SHVector product_expand(const sh::SHVector& a, const sh::SHVector& b,
                            const GauntTable& table) {
  const int out_degree = a.degree + b.degree;
  if (out_degree > table.max_degree() || out_degree > sh::kMaxDegree)
    throw ArgumentError("product_expand: output degree exceeds table");
  sh::SHVector out(out_degree);
  for (std::size_t ia = 0; ia < a.size(); ++ia) {
    const double ca = a.coeffs[ia];
    if (ca == 0.0) continue;
    for (std::size_t ib = 0; ib < b.size(); ++ib) {
      const double cb = b.coeffs[ib];
      if (cb == 0.0) continue;
      const double cab = ca * cb;
      for (const auto& c :
           table.couplings(static_cast<int>(ia), static_cast<int>(ib)))
        out.coeffs[c.idx] += cab * c.g;
    }
  }
  return out;
}

sh::SHVector monomial_to_sh(const MonomialSpec& spec, const GauntTable& table) {
  if (spec.factors.empty())
    throw ArgumentError("monomial_to_sh: empty factor list");
  int total = 0;
  for (const auto& [l, m] : spec.factors) {
    if (l < 0 || m < -l || m > l)
      throw ArgumentError("monomial_to_sh: invalid factor");
    total += l;
  }
  if (total > table.max_degree())
    throw ArgumentError("monomial_to_sh: total degree exceeds table");
  sh::SHVector acc(spec.factors[0].first);
  acc.at(spec.factors[0].first, spec.factors[0].second) = 1.0;
  for (std::size_t k = 1; k < spec.factors.size(); ++k) {
    sh::SHVector f(spec.factors[k].first);
    f.at(spec.factors[k].first, spec.factors[k].second) = 1.0;
    acc = product_expand(acc, f, table);
  }
  return acc;
}

namespace {

// Depth-first enumeration of monomials (non-decreasing feature index),
// carrying the accumulated expansion so each node costs one product_expand.
void enumerate_monomials(const GauntTable& table, int L, int d, int first,
                         const sh::SHVector& acc, int n,
                         std::vector<Eigen::VectorXd>& rows,
                         std::size_t& count) {
  const int features = (L + 1) * (L + 1);
  for (int f = first; f < features; ++f) {
    if (++count > kMonomialGuard)
      throw ResourceError("span_rank: monomial count exceeds guard");
    const int l = degree_of_index(f);
    sh::SHVector unit(l);
    unit.coeffs[f] = 1.0;
    const sh::SHVector next = product_expand(acc, unit, table);
    Eigen::VectorXd row = Eigen::VectorXd::Zero(2 * n + 1);
    if (n <= next.degree)
      for (int m = -n; m <= n; ++m) row[m + n] = next.at(n, m);
    rows.push_back(std::move(row));
    if (d > 1) enumerate_monomials(table, L, d - 1, f, next, n, rows, count);
  }
}

}  // namespace

int span_rank(int L, int d, int n, const GauntTable& table) {
  if (L < 0 || d < 1 || n < 0) throw ArgumentError("span_rank: bad arguments");
  if (n > sh::kMaxDegree || d * L > table.max_degree())
    throw ArgumentError("span_rank: degrees exceed supported range");
  std::vector<Eigen::VectorXd> rows;
  // The empty monomial (constant 1) only contributes at n = 0.
  if (n == 0) rows.push_back(Eigen::VectorXd::Constant(1, 1.0));
  // Seed the recursion with the constant function 1 = sqrt(4 pi) Y_0^0.
  sh::SHVector one(0);
  one.coeffs[0] = std::sqrt(4.0 * 3.14159265358979323846264338);
  std::size_t count = 0;
  enumerate_monomials(table, L, d, 0, one, n, rows, count);
  if (rows.empty()) return 0;
  Eigen::MatrixXd mat(static_cast<Eigen::Index>(rows.size()), 2 * n + 1);
  for (std::size_t i = 0; i < rows.size(); ++i) mat.row(static_cast<Eigen::Index>(i)) = rows[i];
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(mat);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv[0] <= 0.0) return 0;
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > 1e-8 * sv[0]) ++rank;
  return rank;
}

double stretched_top_coefficient(int L, int q, int r, const GauntTable& table) {
  if (L < 1 || q < 0 || r < 0 || r >= L)
    throw ArgumentError("stretched_top_coefficient: bad arguments");
  const int n = q * L + r;
  if (n > table.max_degree())
    throw ArgumentError("stretched_top_coefficient: n exceeds table");
  MonomialSpec spec;
  for (int i = 0; i < q; ++i) spec.factors.push_back({L, L});
  if (r > 0) spec.factors.push_back({r, r});
  if (spec.factors.empty())
    throw ArgumentError("stretched_top_coefficient: empty product");
  return monomial_to_sh(spec, table).at(n, n);
}

long weight_multiplicity(int L, int d) {
  if (L < 1 || d < 1) throw ArgumentError("weight_multiplicity: bad arguments");
  // Count tuples by dynamic programming over partial sums.
  const int target = d * L;
  std::vector<long> counts(2 * target + 1, 0);  // sums shifted by +target
  counts[target] = 1;
  for (int k = 0; k < d; ++k) {
    std::vector<long> next(2 * target + 1, 0);
    for (int s = 0; s <= 2 * target; ++s) {
      if (counts[s] == 0) continue;
      for (int m = -L; m <= L; ++m) {
        const int t = s + m;
        if (t >= 0 && t <= 2 * target) next[t] += counts[s];
      }
    }
    counts.swap(next);
  }
  return counts[2 * target];
}

}  // namespace shprobe::cg
