#ifndef GAPCHANNEL_QUADRATURE_HPP
#define GAPCHANNEL_QUADRATURE_HPP

#include <complex>
#include <functional>

namespace gapchannel {

struct QuadratureControl {
  double abs_tol = 1e-10;
  int max_subdivisions = 4000;
};

struct QuadratureStats {
  double error_estimate = 0.0;
  int evaluations = 0;
  bool converged = true;
};

//! Adaptive Gauss-Kronrod (7,15) integration of f over [a, b].
//! Throws std::runtime_error if the subdivision budget is exhausted
//! before the absolute tolerance is met.
double integrate(const std::function<double(double)>& f, double a, double b,
                 const QuadratureControl& control = {},
                 QuadratureStats* stats = nullptr);

std::complex<double> integrate_complex(
    const std::function<std::complex<double>(double)>& f, double a, double b,
    const QuadratureControl& control = {}, QuadratureStats* stats = nullptr);

}  // namespace gapchannel

#endif
