#pragma once

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace betarep::special {

inline double log_gamma(double x) { return boost::math::lgamma(x); }

/// ln B(a, b) = ln Γ(a) + ln Γ(b) − ln Γ(a + b).
inline double log_beta(double a, double b) { return log_gamma(a) + log_gamma(b) - log_gamma(a + b); }

inline double digamma(double x) { return boost::math::digamma(x); }

}  // namespace betarep::special
