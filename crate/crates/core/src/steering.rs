//! Steering through `|phi_theta>`: modified measurement angles and steered
//! correlators.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::behavior::{Behavior, SymmetryElement, SIGNS};
use crate::error::{Error, Result};
use crate::realization::{born_point, QubitRealization};
use crate::{SNAP_UNIT, TOL_CLAMP};

/// Steered correlators `c[alpha][x][y]` (alpha index 0 is `+1`) and, when
/// computed from a realization, the modified angles `atilde[alpha][x]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteeredCorrelators {
    pub c: [[[f64; 2]; 2]; 2],
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub atilde: Option<[[f64; 2]; 2]>,
}

/// Representative of `x mod pi` in `[0, pi)`.
pub fn pi_mod(x: f64) -> f64 {
    let r = x.rem_euclid(PI);
    if r >= PI - SNAP_UNIT {
        0.0
    } else {
        r
    }
}

fn half_turn(x: f64) -> f64 {
    // (-2pi, 2pi] -> (-pi, pi]
    if x > PI {
        x - TAU
    } else if x <= -PI {
        x + TAU
    } else {
        x
    }
}

/// Image angle of the Bloch direction `a` under the steering map, in
/// `(-pi, pi]`. Equals `2 atan(tan(a/2) tan(theta))` where defined.
pub fn steer_vector(theta: f64, a: f64) -> Result<f64> {
    let (sh, ch) = (a / 2.0).sin_cos();
    let (st, ct) = theta.sin_cos();
    steer_raw(sh * st, ch * ct)
}

fn steer_raw(y: f64, x: f64) -> Result<f64> {
    if y.hypot(x) < 1e-15 {
        return Err(Error::NullImage);
    }
    Ok(half_turn(2.0 * y.atan2(x)))
}

/// `alpha = +1` steers through `theta`, `alpha = -1` through `pi/2 - theta`.
pub fn steer_signed(theta: f64, a: f64, alpha: f64) -> Result<f64> {
    let (sh, ch) = (a / 2.0).sin_cos();
    let (st, ct) = theta.sin_cos();
    if alpha > 0.0 {
        steer_raw(sh * st, ch * ct)
    } else {
        steer_raw(sh * ct, ch * st)
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if (2.0 * theta).sin().abs() < 1e-12 {
        Err(Error::DegenerateTheta { theta })
    } else {
        Ok(())
    }
}

/// `atilde[alpha][x]` for Alice's two measurements.
pub fn modified_angles(r: &QubitRealization) -> Result<[[f64; 2]; 2]> {
    check_theta(r.theta)?;
    let mut out = [[0.0; 2]; 2];
    for (ia, &alpha) in SIGNS.iter().enumerate() {
        for x in 0..2 {
            out[ia][x] = steer_signed(r.theta, r.a[x], alpha)?;
        }
    }
    Ok(out)
}

/// Modified angles of Bob's measurements, `btilde[beta][y]`.
pub fn modified_angles_bob(r: &QubitRealization) -> Result<[[f64; 2]; 2]> {
    modified_angles(&r.relabel(&SymmetryElement::party_swap()))
}

/// Clamp float noise around `[-1, 1]`; larger excursions are errors.
pub(crate) fn unit_clamp(v: f64) -> Result<f64> {
    if !(v.abs() <= 1.0 + TOL_CLAMP) {
        return Err(Error::ClampExcursion { value: v });
    }
    if v.abs() >= 1.0 - SNAP_UNIT {
        Ok(v.signum())
    } else {
        Ok(v)
    }
}

/// `c[alpha][x][y] = (<A_x B_y> + alpha <B_y>) / (1 + alpha <A_x>)`.
pub fn steered_correlators(p: &Behavior) -> Result<SteeredCorrelators> {
    for x in 0..2 {
        if !(p.marg_a[x].abs() < 1.0) {
            return Err(Error::MarginalUnit { x, value: p.marg_a[x] });
        }
    }
    let mut c = [[[0.0; 2]; 2]; 2];
    for (ia, &alpha) in SIGNS.iter().enumerate() {
        for x in 0..2 {
            for y in 0..2 {
                let v = (p.corr[x][y] + alpha * p.marg_b[y]) / (1.0 + alpha * p.marg_a[x]);
                c[ia][x][y] = unit_clamp(v)?;
            }
        }
    }
    Ok(SteeredCorrelators { c, atilde: None })
}

/// Steered correlators with Alice and Bob exchanged.
pub fn steered_correlators_bob(p: &Behavior) -> Result<SteeredCorrelators> {
    steered_correlators(&SymmetryElement::party_swap().apply(p))
}

/// Steered correlators of `born_point(r)` together with the modified angles.
pub fn steered_realization(r: &QubitRealization) -> Result<SteeredCorrelators> {
    let atilde = modified_angles(r)?;
    let mut s = steered_correlators(&born_point(r))?;
    s.atilde = Some(atilde);
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8};

    #[test]
    fn maximally_entangled_is_identity() {
        for a in [0.0, 0.3, 1.2, 2.9, -1.0] {
            assert!((steer_vector(FRAC_PI_4, a).unwrap() - a).abs() < 1e-15);
        }
    }

    #[test]
    fn fixed_point_and_reference_value() {
        assert_eq!(steer_vector(0.3, 0.0).unwrap(), 0.0);
        // 2 atan(tan(pi/8)) = pi/4
        assert!((steer_vector(FRAC_PI_8, FRAC_PI_2).unwrap() - FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn null_image() {
        assert_eq!(steer_vector(0.0, PI), Err(Error::NullImage));
        assert_eq!(steer_vector(FRAC_PI_2, 0.0), Err(Error::NullImage));
    }

    #[test]
    fn example_r3_angles() {
        let r = QubitRealization::new(FRAC_PI_8, [0.0, FRAC_PI_2], [FRAC_PI_4, 3.0 * FRAC_PI_4]);
        let t = modified_angles(&r).unwrap();
        assert_eq!(t[0][0], 0.0);
        assert_eq!(t[1][0], 0.0);
        assert!((t[0][1] - FRAC_PI_4).abs() < 1e-15);
        assert!((t[1][1] - 3.0 * FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn degenerate_theta() {
        let r = QubitRealization::new(0.0, [0.1, 0.2], [0.3, 0.4]);
        assert!(matches!(modified_angles(&r), Err(Error::DegenerateTheta { .. })));
    }

    #[test]
    fn r3_steered_correlator() {
        let r = QubitRealization::new(FRAC_PI_8, [0.0, FRAC_PI_2], [FRAC_PI_4, 3.0 * FRAC_PI_4]);
        let s = steered_realization(&r).unwrap();
        assert!((s.c[0][0][0] - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.c[0][1][0], 1.0);
    }

    #[test]
    fn zero_marginals_reduce_to_correlators() {
        let p = Behavior::new([0.0; 2], [0.0; 2], [[0.1, -0.4], [0.6, 0.2]]);
        let s = steered_correlators(&p).unwrap();
        for a in 0..2 {
            assert_eq!(s.c[a], p.corr);
        }
    }

    #[test]
    fn unit_ratio_and_errors() {
        let m = 0.3;
        let p = Behavior::new([m, 0.0], [m, 0.0], [[1.0, 0.0], [0.0, 0.0]]);
        assert_eq!(steered_correlators(&p).unwrap().c[1][0][0], 1.0);
        let q = Behavior::new([1.0, 0.0], [0.0; 2], [[0.0; 2]; 2]);
        assert!(matches!(steered_correlators(&q), Err(Error::MarginalUnit { x: 0, .. })));
        let bad = Behavior::new([0.5, 0.0], [-0.5, 0.0], [[0.2, 0.0], [0.0, 0.0]]);
        assert!(matches!(steered_correlators(&bad), Err(Error::ClampExcursion { .. })));
    }

    #[test]
    fn pi_mod_range() {
        assert_eq!(pi_mod(-FRAC_PI_4), 3.0 * FRAC_PI_4);
        assert_eq!(pi_mod(PI), 0.0);
        assert!(pi_mod(2.0 * PI - 1e-16) < 1e-12);
    }
}
