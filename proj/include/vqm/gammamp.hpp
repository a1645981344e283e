#pragma once

#include "vqm/complexmp.hpp"

namespace vqm {

// Real-axis gamma family, delegated to MPFR (valid for negative non-integer
// arguments as well).
Real gamma_real(const Real& x);
Real lgamma_real(const Real& x);   // log|Gamma(x)|
Real digamma_real(const Real& x);

// Complex gamma via a Spouge approximation sized for the current default
// precision, with the reflection formula for Re(z) < 1/2. Arguments near the
// poles (non-positive integers) are the caller's responsibility.
Cx gamma_cx(const Cx& z);
Cx lgamma_cx(const Cx& z);
Cx digamma_cx(const Cx& z);

} // namespace vqm
