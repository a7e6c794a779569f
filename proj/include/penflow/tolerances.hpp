#pragma once

namespace penflow {

// Every numeric threshold the library relies on, in one place.
// Functions take these by const reference with tol() as the default, so a
// test can tighten or loosen a single knob without touching call sites.
struct Tolerances {
    double orthonormal_drift = 1e-12;  // affine basis re-orthonormalized beyond this
    double psd_slack = 1e-10;          // eigenvalue slack for PSD / modulus validation
    double residual = 1e-10;           // resolvent identity + certificate residuals
    double inner_residual = 1e-12;     // damped projected iteration stopping residual
    long inner_cap = 100000;           // damped projected iteration sweep cap
    double cocoercivity_margin = 1e-10;  // sampled margin may not drop below -this
    double lemma_rel = 1e-8;           // Lyapunov check: tol = lemma_rel*(1+|rhs|)
    double lipschitz_slack = 1e-10;    // resolvent step-size Lipschitz slack
    double fitz_gap_eq = 1e-12;        // closed-form gap bound equality tolerance
    double quad_rel = 1e-8;            // adaptive Simpson relative tolerance
};

const Tolerances& tol();

}  // namespace penflow
