// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 the hpdist authors

#include "hpdist/element.hpp"

#include <stdexcept>

namespace hpdist {

LagrangeElement::LagrangeElement(int degree) : degree_(degree) {
  if (degree < 1 || degree > 12)
    throw std::invalid_argument("Lagrange degree out of the supported range 1..12");
  edge_support_points_.reserve(degree - 1);
  for (int j = 1; j < degree; ++j) edge_support_points_.emplace_back(j, degree);
}

ElementCollection ElementCollection::lagrange_range(int min_degree, int max_degree) {
  if (min_degree > max_degree) throw std::invalid_argument("empty element range");
  ElementCollection c;
  for (int k = min_degree; k <= max_degree; ++k) c.elements_.emplace_back(k);
  return c;
}

int ElementCollection::index_of_degree(int degree) const {
  for (std::size_t i = 0; i < elements_.size(); ++i)
    if (elements_[i].degree() == degree) return static_cast<int>(i);
  return -1;
}

const LagrangeElement& ElementCollection::checked(int fe_index) const {
  if (fe_index < 0 || static_cast<std::size_t>(fe_index) >= elements_.size())
    throw std::out_of_range("unknown active FE index");
  return elements_[fe_index];
}

int ElementCollection::dofs_per_entity(int fe_index, EntityKind kind) const {
  const LagrangeElement& el = checked(fe_index);
  switch (kind) {
    case EntityKind::vertex:
      return el.dofs_per_vertex();
    case EntityKind::edge:
      return el.dofs_per_edge();
    case EntityKind::interior:
      return el.dofs_per_interior();
  }
  throw std::logic_error("bad entity kind");
}

std::vector<std::pair<int, int>> ElementCollection::unification_pairs(int fe_a, int fe_b) const {
  const int ka = checked(fe_a).degree();
  const int kb = checked(fe_b).degree();
  std::vector<std::pair<int, int>> pairs;
  // a/ka == b/kb as exact rationals, i.e. a*kb == b*ka.
  for (int a = 1; a < ka; ++a) {
    const long long lhs = static_cast<long long>(a) * kb;
    if (lhs % ka == 0) {
      const int b = static_cast<int>(lhs / ka);
      if (b >= 1 && b < kb) pairs.emplace_back(a, b);
    }
  }
  return pairs;
}

int ElementCollection::dominating_index(int fe_a, int fe_b) const {
  return checked(fe_a).degree() <= checked(fe_b).degree() ? fe_a : fe_b;
}

std::vector<Rational> lagrange_basis_1d(int degree, const Rational& x) {
  std::vector<Rational> values;
  values.reserve(degree + 1);
  for (int i = 0; i <= degree; ++i) {
    const Rational xi(i, degree);
    Rational v(1);
    for (int j = 0; j <= degree; ++j) {
      if (j == i) continue;
      const Rational xj(j, degree);
      v = v * ((x - xj) / (xi - xj));
    }
    values.push_back(v);
  }
  return values;
}

}  // namespace hpdist
