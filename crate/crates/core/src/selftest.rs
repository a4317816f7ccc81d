//! Reconstruction of the qubit realization self-tested by an extremal
//! behavior.
//!
//! The steered correlators satisfy `c[alpha][x][y] = cos(a~_x^alpha - b_y)`.
//! In a frame attached to `B1` the steered angles and `B0` are recovered from
//! `acos` of the correlators; the relation
//! `tan(a~+/2) / tan(a~-/2) = tan(theta)^2` then fixes the frame rotation and
//! the entanglement angle, and the inverse steering map returns Alice's
//! angles.

use std::f64::consts::{FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::behavior::{Behavior, SymmetryElement};
use crate::error::{Error, Result};
use crate::extremality::{lemma1_relabeling_search, max_abs};
use crate::realization::{born_point, canonicalize_to, CanonTarget, QubitRealization};
use crate::steering::{steer_signed, steered_correlators};
use crate::TOL_EQ;

/// Below this spread of the steered angle pairs the state is treated as
/// maximally entangled.
const MAX_ENTANGLED_SPREAD: f64 = 1e-10;

/// Intermediate quantities of [`reconstruct_realization`].
///
/// Angles live in a frame where `B1` sits at `0`, `B0` at `bgauge` and the
/// steered measurement `A~_x^alpha` at `w[alpha][x]`; true angles are
/// `gamma + frame angle`. The frame is the mirror image of the realization
/// returned before canonicalization, so `w[t][1] <= bgauge <= w[s][0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionTrace {
    pub w: [[f64; 2]; 2],
    pub bgauge: f64,
    /// The four gauge estimates `w[s][0] - d[s][0]` and `w[t][1] + d[t][1]`.
    pub gauge_estimates: [f64; 4],
    pub gauge_residual: f64,
    /// Position of `B1`.
    pub gamma: f64,
    /// `gamma + (w[+][x] + w[-][x]) / 2`.
    pub gamma_x: [f64; 2],
    pub theta: f64,
    /// The two solutions of `cos(2 theta) = +-k`; the first is kept.
    pub theta_branches: [f64; 2],
    /// Relabeling `g` with `born_point(result) = g.apply(P)`.
    pub relabeling: SymmetryElement,
    pub lemma1_residuals: [f64; 4],
    pub roundtrip_error: f64,
}

fn clamped_acos(v: f64) -> f64 {
    v.clamp(-1.0, 1.0).acos()
}

pub fn reconstruct_realization(p: &Behavior) -> Result<(QubitRealization, ReconstructionTrace)> {
    p.ensure_valid()?;
    let (g, residuals) = match lemma1_relabeling_search(p)? {
        Ok(found) => found,
        Err(residual) => return Err(Error::NotSelfTesting { residual }),
    };
    let q = g.apply(p);
    let c = steered_correlators(&q)?.c;

    let mut w = [[0.0; 2]; 2];
    let mut d = [[0.0; 2]; 2];
    for a in 0..2 {
        for x in 0..2 {
            w[a][x] = clamped_acos(c[a][x][1]);
            d[a][x] = clamped_acos(c[a][x][0]);
        }
    }
    let est = [w[0][0] - d[0][0], w[1][0] - d[1][0], w[0][1] + d[0][1], w[1][1] + d[1][1]];
    let bgauge = est.iter().sum::<f64>() / 4.0;
    let gauge_residual = max_abs(&est.map(|e| e - bgauge));
    if gauge_residual > TOL_EQ {
        return Err(Error::InconsistentGauge { residual: gauge_residual });
    }

    // sin((w+ - w-)/2) = -cos(2 theta) sin(gamma + (w+ + w-)/2)
    let dx = [0, 1].map(|x| ((w[0][x] - w[1][x]) / 2.0).sin());
    let sx = [0, 1].map(|x| (w[0][x] + w[1][x]) / 2.0);
    let (gamma, k) = if dx[0].abs().max(dx[1].abs()) < MAX_ENTANGLED_SPREAD {
        (-w[0][0], 0.0)
    } else {
        let num = dx[0] * sx[1].sin() - dx[1] * sx[0].sin();
        let den = dx[1] * sx[0].cos() - dx[0] * sx[1].cos();
        if num.hypot(den) < 1e-14 {
            return Err(Error::NoThetaBranch);
        }
        let mut gamma = num.atan2(den);
        let sins = sx.map(|s| (gamma + s).sin());
        let x = if sins[0].abs() >= sins[1].abs() { 0 } else { 1 };
        let mut k = -dx[x] / sins[x];
        if k < 0.0 {
            gamma += PI;
            k = -k;
        }
        (gamma, k)
    };
    if !(k <= 1.0 + TOL_EQ) {
        return Err(Error::NoThetaBranch);
    }
    let theta = k.min(1.0).acos() / 2.0;
    let theta_branches = [theta, (-k).max(-1.0).acos() / 2.0];
    if !(1e-12..=FRAC_PI_4 + 1e-12).contains(&theta) {
        return Err(Error::NoThetaBranch);
    }

    let mut a = [0.0; 2];
    for x in 0..2 {
        // inverse of the + steering map is the - map
        a[x] = steer_signed(theta, gamma + w[0][x], -1.0)?;
    }
    let mirrored = QubitRealization::new(theta, a, [gamma + bgauge, gamma]);
    let (r, h) = canonicalize_to(&mirrored, CanonTarget::Sector);
    let relabeling = h.compose(&g);
    let roundtrip_error = born_point(&r).max_abs_diff(&relabeling.apply(p));
    let trace = ReconstructionTrace {
        w,
        bgauge,
        gauge_estimates: est,
        gauge_residual,
        gamma,
        gamma_x: sx.map(|s| gamma + s),
        theta,
        theta_branches,
        relabeling,
        lemma1_residuals: residuals,
        roundtrip_error,
    };
    Ok((r, trace))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfTestCertificate {
    pub realization: QubitRealization,
    pub trace: ReconstructionTrace,
    pub lemma1_residuals: [f64; 4],
    pub max_residual: f64,
    pub roundtrip_error: f64,
}

pub fn selftest_certificate(p: &Behavior) -> Result<SelfTestCertificate> {
    let (realization, trace) = reconstruct_realization(p)?;
    Ok(SelfTestCertificate {
        realization,
        lemma1_residuals: trace.lemma1_residuals,
        max_residual: max_abs(&trace.lemma1_residuals),
        roundtrip_error: trace.roundtrip_error,
        trace,
    })
}
