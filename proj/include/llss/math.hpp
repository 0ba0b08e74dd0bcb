// SPDX-License-Identifier: BSD-3-Clause
// Copyright (c) 2026 the llss-codec authors
//
// Pinned double-precision elementary functions. Entropy tables must come out
// bit-identical on every platform, so the Gaussian CDF used to build them
// cannot depend on the host libm. exp_pinned and erf_pinned below use only
// IEEE-754 +,*,/ and ldexp with frozen coefficients (Cody's rational erf
// approximations, |rel err| < 1e-15 over the ranges we evaluate).
#pragma once

#include <cmath>
#include <cstdint>

namespace llss {

// e^x for x in roughly [-750, 1]; argument reduction x = n*ln2 + r, |r| <= ln2/2,
// then a degree-12 Taylor polynomial in r. Deterministic, ~1 ulp.
inline double exp_pinned(double x) {
  if (x < -745.0) return 0.0;
  static const double kLn2Hi = 6.93147180369123816490e-01;
  static const double kLn2Lo = 1.90821492927058770002e-10;
  static const double kInvLn2 = 1.44269504088896338700e+00;
  const double nd = static_cast<double>(static_cast<long long>(x * kInvLn2 + (x >= 0 ? 0.5 : -0.5)));
  const double r = (x - nd * kLn2Hi) - nd * kLn2Lo;
  // Horner over 1 + r + r^2/2! + ... + r^12/12!.
  double p = 1.0 / 479001600.0;
  p = p * r + 1.0 / 39916800.0;
  p = p * r + 1.0 / 3628800.0;
  p = p * r + 1.0 / 362880.0;
  p = p * r + 1.0 / 40320.0;
  p = p * r + 1.0 / 5040.0;
  p = p * r + 1.0 / 720.0;
  p = p * r + 1.0 / 120.0;
  p = p * r + 1.0 / 24.0;
  p = p * r + 1.0 / 6.0;
  p = p * r + 0.5;
  p = p * r + 1.0;
  p = p * r + 1.0;
  return std::ldexp(p, static_cast<int>(nd));
}

inline double erf_pinned(double x) {
  static const double a[5] = {3.16112374387056560e+00, 1.13864154151050156e+02,
                              3.77485237685302021e+02, 3.20937758913846947e+03,
                              1.85777706184603153e-01};
  static const double b[4] = {2.36012909523441209e+01, 2.44024637934444173e+02,
                              1.28261652607737228e+03, 2.84423683343917062e+03};
  static const double c[9] = {5.64188496988670089e-01, 8.88314979438837594e+00,
                              6.61191906371416295e+01, 2.98635138197400131e+02,
                              8.81952221241769090e+02, 1.71204761263407058e+03,
                              2.05107837782607147e+03, 1.23033935479799725e+03,
                              2.15311535474403846e-08};
  static const double d[8] = {1.57449261107098347e+01, 1.17693950891312499e+02,
                              5.37181101862009858e+02, 1.62138957456669019e+03,
                              3.29079923573345963e+03, 4.36261909014324716e+03,
                              3.43936767414372164e+03, 1.23033935480374942e+03};
  static const double p[6] = {3.05326634961232344e-01, 3.60344899949804439e-01,
                              1.25781726111229246e-01, 1.60837851487422766e-02,
                              6.58749161529837803e-04, 1.63153871373020978e-02};
  static const double q[5] = {2.56852019228982242e+00, 1.87295284992346047e+00,
                              5.27905102951428412e-01, 6.05183413124413191e-02,
                              2.33520497626869185e-03};
  static const double kInvSqrtPi = 5.64189583547756286948e-01;

  const double y = x < 0 ? -x : x;
  double result;
  if (y <= 0.46875) {
    const double z = y * y;
    double xnum = a[4] * z, xden = z;
    for (int i = 0; i < 3; ++i) {
      xnum = (xnum + a[i]) * z;
      xden = (xden + b[i]) * z;
    }
    return x * (xnum + a[3]) / (xden + b[3]);
  }
  if (y <= 4.0) {
    double xnum = c[8] * y, xden = y;
    for (int i = 0; i < 7; ++i) {
      xnum = (xnum + c[i]) * y;
      xden = (xden + d[i]) * y;
    }
    result = (xnum + c[7]) / (xden + d[7]);
  } else if (y < 26.5) {
    const double z = 1.0 / (y * y);
    double xnum = p[5] * z, xden = z;
    for (int i = 0; i < 4; ++i) {
      xnum = (xnum + p[i]) * z;
      xden = (xden + q[i]) * z;
    }
    result = z * (xnum + p[4]) / (xden + q[4]);
    result = (kInvSqrtPi - result) / y;
  } else {
    return x < 0 ? -1.0 : 1.0;
  }
  // erfc(y) = exp(-y^2) * result, with the split-square trick for accuracy.
  const double ysq = static_cast<double>(static_cast<long long>(y * 16.0)) / 16.0;
  const double del = (y - ysq) * (y + ysq);
  const double erfc_y = exp_pinned(-ysq * ysq) * exp_pinned(-del) * result;
  return x < 0 ? erfc_y - 1.0 : 1.0 - erfc_y;
}

// Standard normal CDF via the pinned erf.
inline double norm_cdf_pinned(double z) {
  static const double kInvSqrt2 = 7.07106781186547524401e-01;
  return 0.5 * (1.0 + erf_pinned(z * kInvSqrt2));
}

// Standard normal pdf (training-side only; libm exp is fine here).
inline double norm_pdf(double z) {
  static const double kInvSqrt2Pi = 3.98942280401432677940e-01;
  return kInvSqrt2Pi * std::exp(-0.5 * z * z);
}

// Numerically stable softplus: ln(1 + e^x).
inline double softplus_stable(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

inline double mish_scalar(double x) { return x * std::tanh(softplus_stable(x)); }

inline double mish_grad_scalar(double x) {
  const double t = std::tanh(softplus_stable(x));
  const double sig = 1.0 / (1.0 + std::exp(-x));
  return t + x * (1.0 - t * t) * sig;
}

}  // namespace llss
