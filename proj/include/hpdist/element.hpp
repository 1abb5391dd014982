// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 the hpdist authors

#ifndef HPDIST_ELEMENT_HPP
#define HPDIST_ELEMENT_HPP

#include <span>
#include <utility>
#include <vector>

#include "hpdist/rational.hpp"

namespace hpdist {

enum class EntityKind { vertex, edge, interior };

/// Scalar tensor-product Lagrange element Q_k on the reference quadrilateral
/// with equispaced nodes. Edge support points are the exact rationals j/k for
/// j = 1..k-1, in the canonical edge direction.
class LagrangeElement {
 public:
  explicit LagrangeElement(int degree);

  int degree() const { return degree_; }
  int dofs_per_vertex() const { return 1; }
  int dofs_per_edge() const { return degree_ - 1; }
  int dofs_per_interior() const { return (degree_ - 1) * (degree_ - 1); }
  int dofs_per_cell() const { return (degree_ + 1) * (degree_ + 1); }

  std::span<const Rational> edge_support_points() const { return edge_support_points_; }

 private:
  int degree_;
  std::vector<Rational> edge_support_points_;
};

/// Ordered set of Lagrange elements with strictly increasing degrees; the
/// position in the collection is the active finite element index assigned to
/// cells.
class ElementCollection {
 public:
  /// Builds Q_min..Q_max (inclusive). Degrees 1..12 are supported.
  static ElementCollection lagrange_range(int min_degree, int max_degree);

  std::size_t size() const { return elements_.size(); }
  const LagrangeElement& operator[](std::size_t i) const { return elements_.at(i); }

  /// Index of the element with the given degree, or -1.
  int index_of_degree(int degree) const;

  int dofs_per_entity(int fe_index, EntityKind kind) const;

  /// Edge-node pairs (slot in a, slot in b), slots 1-based along the
  /// canonical edge, whose support points coincide as exact rationals.
  std::vector<std::pair<int, int>> unification_pairs(int fe_a, int fe_b) const;

  /// The element representing the common trace space of the two: the one of
  /// lower polynomial degree (either for equal degrees).
  int dominating_index(int fe_a, int fe_b) const;

 private:
  const LagrangeElement& checked(int fe_index) const;
  std::vector<LagrangeElement> elements_;
};

/// Values of the k+1 nodal basis polynomials of degree k (nodes at i/k,
/// i = 0..k) evaluated at the rational point x. The values sum to one
/// exactly.
std::vector<Rational> lagrange_basis_1d(int degree, const Rational& x);

}  // namespace hpdist

#endif
