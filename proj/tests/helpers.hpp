#ifndef JUMPISO_TEST_HELPERS_HPP
#define JUMPISO_TEST_HELPERS_HPP

#include "jumpiso/measure_core.hpp"

namespace testing_util {

using namespace jumpiso;

//! \brief Two-point space mu = (m0, m1), j(a,b) = jab.
inline Model two_point(double jab, double m0 = 1.0, double m1 = 1.0) {
  Vec mu(2);
  mu << m0, m1;
  FiniteMeasureSpace s(mu);
  Mat j(2, 2);
  j << 0.0, jab, jab, 0.0;
  return Model(s, JumpKernel(s, j));
}

inline Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

}  // namespace testing_util

#endif
