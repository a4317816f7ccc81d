//! Flat directions certifying non-exposed points.
//!
//! A Bell functional maximized at `born_point(R)` must annihilate the
//! tangent space `V` spanned by five directions. For a sector `(s, t)` the
//! point `L = P + v`, `v in V`, is searched in the subspace where Alice's
//! outcomes are deterministic (`<A0> = s`, `<A1> = t`). When `L` is local,
//! every functional vanishing on `V` takes the same value on `P` and `L`, so
//! `P` is not the unique maximizer of any of them.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use nalgebra::Vector4;
use serde::{Deserialize, Serialize};

use crate::behavior::Behavior;
use crate::error::{Error, Result};
use crate::realization::{born_point, observables, state_vector, QubitRealization};
use crate::steering::steer_signed;
use crate::TOL_EQ;

/// Admissible sectors in search order.
pub const SECTORS: [(i8, i8); 3] = [(1, 1), (1, -1), (-1, -1)];

/// Rows `T_{psi_theta}, T_{01}, T_{10}, dP/da0, dP/db0` in behavior
/// coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangentBasis {
    pub vecs: [[f64; 8]; 5],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorSolution {
    pub sector: (i8, i8),
    /// `(x, y, z, a, b)` multiplying the rows of [`TangentBasis`].
    pub coeffs: [f64; 5],
    /// Bob marginals `alpha_y` of the companion point.
    pub alphas: [f64; 2],
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatnessWitness {
    pub sector: (i8, i8),
    pub coeffs: [f64; 5],
    pub alphas: [f64; 2],
    #[serde(rename = "L")]
    pub l: Behavior,
    pub deltas: [f64; 2],
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Orthocomplement {
    pub vectors: Vec<[f64; 8]>,
    pub rank: usize,
    pub rank_deficient: bool,
}

fn check_preconditions(r: &QubitRealization) -> Result<()> {
    if !(r.theta > 0.0 && r.theta <= FRAC_PI_4 + 1e-12) {
        return Err(Error::DegenerateTheta { theta: r.theta });
    }
    if !r.is_canonical() {
        return Err(Error::NotCanonical);
    }
    Ok(())
}

/// Partial derivatives of `born_point` with respect to
/// `(theta, a0, a1, b0, b1)`.
pub fn parameter_derivatives(r: &QubitRealization) -> [[f64; 8]; 5] {
    let (s2, c2) = (2.0 * r.theta).sin_cos();
    let (sa, ca) = (r.a.map(f64::sin), r.a.map(f64::cos));
    let (sb, cb) = (r.b.map(f64::sin), r.b.map(f64::cos));
    let mut out = [[0.0; 8]; 5];
    // corr slot of (x, y) in vector order
    let slot = |x: usize, y: usize| 4 + x + 2 * y;

    out[0][0] = -2.0 * s2 * ca[0];
    out[0][1] = -2.0 * s2 * ca[1];
    out[0][2] = -2.0 * s2 * cb[0];
    out[0][3] = -2.0 * s2 * cb[1];
    for x in 0..2 {
        for y in 0..2 {
            out[0][slot(x, y)] = 2.0 * c2 * sa[x] * sb[y];
        }
    }
    for x in 0..2 {
        let row = &mut out[1 + x];
        row[x] = -c2 * sa[x];
        for y in 0..2 {
            row[slot(x, y)] = -sa[x] * cb[y] + s2 * ca[x] * sb[y];
        }
    }
    for y in 0..2 {
        let row = &mut out[3 + y];
        row[2 + y] = -c2 * sb[y];
        for x in 0..2 {
            row[slot(x, y)] = -ca[x] * sb[y] + s2 * sa[x] * cb[y];
        }
    }
    out
}

pub fn tangent_basis(r: &QubitRealization) -> Result<TangentBasis> {
    check_preconditions(r)?;
    Ok(tangent_rows(r))
}

fn tangent_rows(r: &QubitRealization) -> TangentBasis {
    let (st, ct) = r.theta.sin_cos();
    let phi = state_vector(r.theta);
    let ops = observables(r);
    let perps = [
        Vector4::new(st, 0.0, 0.0, -ct),
        Vector4::new(0.0, 1.0, 0.0, 0.0),
        Vector4::new(0.0, 0.0, 1.0, 0.0),
    ];
    let mut vecs = [[0.0; 8]; 5];
    for (i, psi) in perps.iter().enumerate() {
        for (k, op) in ops.iter().enumerate() {
            vecs[i][k] = psi.dot(&(op * phi));
        }
    }
    let der = parameter_derivatives(r);
    vecs[3] = der[1];
    vecs[4] = der[3];
    TangentBasis { vecs }
}

fn check_sector(sector: (i8, i8)) -> Result<(f64, f64)> {
    match sector {
        (1, 1) | (1, -1) | (-1, -1) => Ok((sector.0 as f64, sector.1 as f64)),
        (s, t) => Err(Error::ExcludedSector { s, t }),
    }
}

/// Alice angles shifted by `pi` on the `-1` outcome of the sector.
fn shifted(r: &QubitRealization, s: f64, t: f64) -> (f64, f64) {
    let shift = |sg: f64| (1.0 - sg) * FRAC_PI_2;
    (r.a[0] + shift(s), r.a[1] + shift(t))
}

/// Closed-form solution of the sector system.
pub fn solve_sector(r: &QubitRealization, sector: (i8, i8)) -> Result<SectorSolution> {
    check_preconditions(r)?;
    let (s, t) = check_sector(sector)?;
    let theta = r.theta;
    let (s2, c2) = (2.0 * theta).sin_cos();
    let (st, ct) = theta.sin_cos();
    let (a0, a1) = shifted(r, s, t);
    let (hs, hd) = ((a0 + a1) / 2.0, (a0 - a1) / 2.0);
    let d = hd.cos() + hs.cos() * c2;
    if d.abs() < 1e-12 {
        return Err(Error::DegenerateDenominator { value: d });
    }
    let coeffs = [
        hs.cos() * s2 / d,
        2.0 * (a0 / 2.0).sin() * (a1 / 2.0).cos() * st / d,
        2.0 * (a0 / 2.0).cos() * (a1 / 2.0).sin() * ct / d,
        -2.0 * hd.sin() / d,
        0.0,
    ];
    let alphas = match alpha_closed_form(r, s, t)? {
        Some(al) => al,
        None => {
            let l = companion(&born_point(r), &tangent_rows(r), &coeffs);
            l.marg_b
        }
    };
    Ok(SectorSolution { sector, coeffs, alphas, d })
}

/// `alpha_y = cos((u0 + u1)/2 - b_y) / cos((u0 - u1)/2)` with `u_x` the
/// steered angles of the sector, shifted by `pi` on `-1` outcomes. `None`
/// when the denominator vanishes.
fn alpha_closed_form(r: &QubitRealization, s: f64, t: f64) -> Result<Option<[f64; 2]>> {
    let shift = |sg: f64| (1.0 - sg) * FRAC_PI_2;
    let u0 = steer_signed(r.theta, r.a[0], s)? + shift(s);
    let u1 = steer_signed(r.theta, r.a[1], t)? + shift(t);
    let den = ((u0 - u1) / 2.0).cos();
    if den.abs() < 1e-12 {
        return Ok(None);
    }
    Ok(Some(r.b.map(|b| ((u0 + u1) / 2.0 - b).cos() / den)))
}

fn companion(p: &Behavior, t: &TangentBasis, coeffs: &[f64; 5]) -> Behavior {
    let mut v = p.to_vector();
    for (row, c) in t.vecs.iter().zip(coeffs) {
        for k in 0..8 {
            v[k] += c * row[k];
        }
    }
    Behavior::from_vector(&v)
}

/// Residuals of the six sector equations
/// `<A0> = s, <A1> = t, <B_y> = s <A0 B_y> = t <A1 B_y>` at `P + coeffs . T`.
pub fn sector_system_residual(r: &QubitRealization, sector: (i8, i8), coeffs: &[f64; 5]) -> Result<[f64; 6]> {
    let (s, t) = check_sector(sector)?;
    let l = companion(&born_point(r), &tangent_basis(r)?, coeffs);
    Ok([
        l.marg_a[0] - s,
        l.marg_a[1] - t,
        l.marg_b[0] - s * l.corr[0][0],
        l.marg_b[0] - t * l.corr[1][0],
        l.marg_b[1] - s * l.corr[0][1],
        l.marg_b[1] - t * l.corr[1][1],
    ])
}

/// `Delta_y = s t sin(a0~s - b_y) sin(a1~t - b_y)`; nonnegative exactly when
/// `|alpha_y| <= 1`.
pub fn delta_condition(r: &QubitRealization, sector: (i8, i8)) -> Result<[f64; 2]> {
    check_preconditions(r)?;
    let (s, t) = check_sector(sector)?;
    let u0 = steer_signed(r.theta, r.a[0], s)?;
    let u1 = steer_signed(r.theta, r.a[1], t)?;
    Ok(r.b.map(|b| s * t * (u0 - b).sin() * (u1 - b).sin()))
}

/// First admissible sector whose companion point is local, or `None` when
/// the point is local or every sector fails.
pub fn find_witness(r: &QubitRealization) -> Result<Option<FlatnessWitness>> {
    check_preconditions(r)?;
    let p = born_point(r);
    if p.is_local()? {
        return Ok(None);
    }
    let basis = tangent_rows(r);
    for sector in SECTORS {
        let sol = match solve_sector(r, sector) {
            Ok(sol) => sol,
            Err(Error::DegenerateDenominator { .. }) => continue,
            Err(e) => return Err(e),
        };
        let deltas = delta_condition(r, sector)?;
        if deltas.iter().any(|&d| d < -TOL_EQ) {
            continue;
        }
        let l = companion(&p, &basis, &sol.coeffs);
        if sol.alphas.iter().any(|a| a.abs() > 1.0 + TOL_EQ) || l.max_abs_diff(&p) <= TOL_EQ {
            continue;
        }
        return Ok(Some(FlatnessWitness {
            sector,
            coeffs: sol.coeffs,
            alphas: sol.alphas,
            l,
            deltas,
            d: sol.d,
        }));
    }
    Ok(None)
}

fn dot(a: &[f64; 8], b: &[f64; 8]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn residual_after(v: &[f64; 8], basis: &[[f64; 8]]) -> [f64; 8] {
    let mut r = *v;
    // two passes keep the result orthogonal to rounding level
    for _ in 0..2 {
        for q in basis {
            let c = dot(&r, q);
            for k in 0..8 {
                r[k] -= c * q[k];
            }
        }
    }
    r
}

fn norm(v: &[f64; 8]) -> f64 {
    dot(v, v).sqrt()
}

/// Orthonormal basis of the complement of the row span, by Gram-Schmidt
/// with pivoting on the largest remaining residual.
pub fn orthocomplement(t: &TangentBasis) -> Orthocomplement {
    const RANK_TOL: f64 = 1e-10;
    let mut span: Vec<[f64; 8]> = Vec::new();
    let mut pending: Vec<[f64; 8]> = t.vecs.to_vec();
    while !pending.is_empty() {
        let (idx, res, n) = pending
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let r = residual_after(v, &span);
                (i, r, norm(&r))
            })
            .max_by(|a, b| a.2.total_cmp(&b.2))
            .unwrap();
        if n < RANK_TOL {
            break;
        }
        span.push(res.map(|x| x / n));
        pending.swap_remove(idx);
    }
    let rank = span.len();
    let mut vectors = Vec::new();
    while span.len() < 8 {
        let (res, n) = (0..8)
            .map(|k| {
                let mut e = [0.0; 8];
                e[k] = 1.0;
                let r = residual_after(&e, &span);
                (r, norm(&r))
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        let q = res.map(|x| x / n);
        span.push(q);
        vectors.push(q);
    }
    Orthocomplement { vectors, rank, rank_deficient: rank < 5 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_8, PI};

    fn rna() -> QubitRealization {
        QubitRealization::new(FRAC_PI_8, [0.0, FRAC_PI_2], [3.0 * FRAC_PI_8, 3.0 * FRAC_PI_4])
    }
    fn r16() -> QubitRealization {
        QubitRealization::new(PI / 16.0, [0.0, FRAC_PI_2], [FRAC_PI_4, 3.0 * FRAC_PI_4])
    }
    fn r3() -> QubitRealization {
        QubitRealization::new(FRAC_PI_8, [0.0, FRAC_PI_2], [FRAC_PI_4, 3.0 * FRAC_PI_4])
    }
    fn tsirelson_r() -> QubitRealization {
        QubitRealization::new(FRAC_PI_4, [0.0, FRAC_PI_2], [FRAC_PI_4, 3.0 * FRAC_PI_4])
    }

    #[test]
    fn a0_derivative_row_at_r3() {
        let t = tangent_basis(&r3()).unwrap();
        let want = [0.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.5, 0.0];
        for k in 0..8 {
            assert!((t.vecs[3][k] - want[k]).abs() < 1e-15, "{:?}", t.vecs[3]);
        }
        assert_eq!(t.vecs[3][2], 0.0);
        assert_eq!(t.vecs[3][3], 0.0);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let r = QubitRealization::new(0.3, [0.4, 1.7], [0.9, 2.2]);
        let der = parameter_derivatives(&r);
        let h = 1e-6;
        for i in 0..5 {
            let mut p = r.params();
            let mut m = r.params();
            p[i] += h;
            m[i] -= h;
            let (bp, bm) = (
                born_point(&QubitRealization::from_params(&p)).to_vector(),
                born_point(&QubitRealization::from_params(&m)).to_vector(),
            );
            for k in 0..8 {
                let fd = (bp[k] - bm[k]) / (2.0 * h);
                assert!((fd - der[i][k]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn sector_system_holds() {
        let sol = solve_sector(&r16(), (1, 1)).unwrap();
        let res = sector_system_residual(&r16(), (1, 1), &sol.coeffs).unwrap();
        assert!(res.iter().all(|r| r.abs() < 1e-10), "{res:?}");
        assert_eq!(sol.coeffs[4], 0.0);
    }

    #[test]
    fn maximally_entangled_x_coefficient() {
        let sol = solve_sector(&tsirelson_r(), (1, 1)).unwrap();
        // cos((a0 + a1)/2) sin(pi/2) / D with D = cos((a0 - a1)/2)
        let want = FRAC_PI_4.cos() / FRAC_PI_4.cos();
        assert!((sol.coeffs[0] - want).abs() < 1e-15);
    }

    #[test]
    fn excluded_sector() {
        assert_eq!(solve_sector(&r16(), (-1, 1)), Err(Error::ExcludedSector { s: -1, t: 1 }));
    }

    #[test]
    fn alphas_are_companion_marginals() {
        let r = QubitRealization::new(0.4, [0.3, 2.0], [1.1, 2.5]);
        let basis = tangent_basis(&r).unwrap();
        for sector in SECTORS {
            let sol = solve_sector(&r, sector).unwrap();
            let l = companion(&born_point(&r), &basis, &sol.coeffs);
            for y in 0..2 {
                assert!((l.marg_b[y] - sol.alphas[y]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn delta_examples() {
        let d = delta_condition(&r16(), (1, 1)).unwrap();
        assert!(d[0] > 0.0 && d[1] > 0.0);
        let d3 = delta_condition(&r3(), (1, 1)).unwrap();
        assert!(d3[0].abs() < 1e-15);
    }

    #[test]
    fn witness_examples() {
        assert!(find_witness(&r16()).unwrap().is_none());
        let w = find_witness(&rna()).unwrap().unwrap();
        assert_eq!(w.sector, (1, 1));
        assert!(w.l.is_local().unwrap());
        assert!(find_witness(&tsirelson_r()).unwrap().is_none());
        let w3 = find_witness(&r3()).unwrap().unwrap();
        assert!(w3.deltas.iter().any(|d| d.abs() < 1e-12));
    }

    #[test]
    fn complement_is_orthogonal_and_flat() {
        let t = tangent_basis(&r16()).unwrap();
        let oc = orthocomplement(&t);
        assert_eq!(oc.rank, 5);
        assert_eq!(oc.vectors.len(), 3);
        for b in &oc.vectors {
            for row in &t.vecs {
                assert!(dot(b, row).abs() < 1e-12);
            }
        }
        let t = tangent_basis(&rna()).unwrap();
        let oc = orthocomplement(&t);
        let w = find_witness(&rna()).unwrap().unwrap();
        let p = born_point(&rna()).to_vector();
        let l = w.l.to_vector();
        for b in &oc.vectors {
            assert!((dot(b, &l) - dot(b, &p)).abs() < 1e-12);
        }
    }

    #[test]
    fn collapsed_rows_are_flagged() {
        let mut t = tangent_rows(&QubitRealization::new(1e-14, [0.0, 0.0], [0.0, 0.0]));
        t.vecs[4] = t.vecs[3];
        let oc = orthocomplement(&t);
        assert!(oc.rank_deficient);
        assert_eq!(oc.vectors.len(), 8 - oc.rank);
    }

    #[test]
    fn preconditions() {
        let r = QubitRealization::new(1.0, [0.0, 1.0], [0.5, 2.0]);
        assert!(matches!(tangent_basis(&r), Err(Error::DegenerateTheta { .. })));
    }
}
