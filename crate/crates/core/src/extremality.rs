//! Necessary conditions for pure qubit points, extremality certificates,
//! alternation of measurement angles and classification.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

pub use crate::behavior::SignPattern;
use crate::behavior::{Behavior, SymmetryElement};
use crate::error::{Error, Result};
use crate::realization::{orbit_in_range, CanonTarget, QubitRealization};
use crate::selftest::reconstruct_realization;
use crate::steering::{
    modified_angles, modified_angles_bob, pi_mod, steered_correlators, steered_correlators_bob,
};
use crate::TOL_EQ;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Alice,
    Bob,
}

/// Signs of the four `asin` terms for the placement with a single minus at
/// position `k` in `(00, 10, 01, 11)` order.
const PLACEMENTS: [[f64; 4]; 4] = [
    [-1.0, 1.0, 1.0, 1.0],
    [1.0, -1.0, 1.0, 1.0],
    [1.0, 1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0, -1.0],
];

fn asin_table(c: &[[[f64; 2]; 2]; 2]) -> [[[f64; 2]; 2]; 2] {
    let mut out = [[[0.0; 2]; 2]; 2];
    for a in 0..2 {
        for x in 0..2 {
            for y in 0..2 {
                out[a][x][y] = c[a][x][y].asin();
            }
        }
    }
    out
}

/// `asin` terms `(s00, t10, s01, t11)` for the pair of steered measurements
/// indexed by `s` (input 0) and `t` (input 1).
fn terms(s_asin: &[[[f64; 2]; 2]; 2], s: usize, t: usize) -> [f64; 4] {
    [s_asin[s][0][0], s_asin[t][1][0], s_asin[s][0][1], s_asin[t][1][1]]
}

fn signed_sum(terms: &[f64; 4], signs: &[f64; 4]) -> f64 {
    (0..4).map(|k| signs[k] * terms[k]).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop1Report {
    pub holds: bool,
    /// `residuals[4 * (2 * s + t) + k] = [pi + sum, pi - sum]` for sign
    /// indices `s, t` and single-minus placement `k`; both entries are
    /// nonnegative when the inequality holds.
    pub residuals: Vec<[f64; 2]>,
}

impl Prop1Report {
    pub fn min_slack(&self) -> f64 {
        self.residuals.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }
}

/// The 32 two-sided `asin` inequalities satisfied by every pure entangled
/// two-qubit point, on the chosen side.
pub fn prop1_check(p: &Behavior, side: Side) -> Result<Prop1Report> {
    let sc = match side {
        Side::Alice => steered_correlators(p)?,
        Side::Bob => steered_correlators_bob(p)?,
    };
    let t = asin_table(&sc.c);
    let mut residuals = Vec::with_capacity(16);
    for s in 0..2 {
        for u in 0..2 {
            let tm = terms(&t, s, u);
            for signs in &PLACEMENTS {
                let v = signed_sum(&tm, signs);
                residuals.push([PI + v, PI - v]);
            }
        }
    }
    let holds = residuals.iter().flatten().all(|&r| r >= -TOL_EQ);
    Ok(Prop1Report { holds, residuals })
}

/// Zero-marginal criterion: eight `asin` inequalities on the correlators.
pub fn masanes_check(p: &Behavior) -> Result<bool> {
    if p.marg_a.iter().chain(p.marg_b.iter()).any(|m| m.abs() > TOL_EQ) {
        return Err(Error::NonzeroMarginals);
    }
    let tm = [p.corr[0][0], p.corr[1][0], p.corr[0][1], p.corr[1][1]];
    let mut asin = [0.0; 4];
    for k in 0..4 {
        asin[k] = crate::steering::unit_clamp(tm[k])?.asin();
    }
    Ok(PLACEMENTS.iter().all(|signs| signed_sum(&asin, signs).abs() <= PI + TOL_EQ))
}

/// Residuals `asin c[s]00 + asin c[t]10 - asin c[s]01 + asin c[t]11 - pi`
/// for `(s, t)` in `(+,+), (+,-), (-,+), (-,-)` order, without the locality
/// gate of [`lemma1_check`].
pub fn lemma1_residuals(p: &Behavior) -> Result<[f64; 4]> {
    let sc = steered_correlators(p)?;
    let t = asin_table(&sc.c);
    let mut out = [0.0; 4];
    for s in 0..2 {
        for u in 0..2 {
            out[2 * s + u] = signed_sum(&terms(&t, s, u), &PLACEMENTS[2]) - PI;
        }
    }
    Ok(out)
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Self-test equalities in their fixed placement.
pub fn lemma1_check(p: &Behavior) -> Result<(bool, [f64; 4])> {
    if p.is_local()? {
        return Err(Error::LocalInput);
    }
    let r = lemma1_residuals(p)?;
    Ok((max_abs(&r) <= TOL_EQ, r))
}

/// First relabeling (identity first) under which the fixed-placement
/// equalities hold, with the residuals; or the smallest residual found.
pub fn lemma1_relabeling_search(p: &Behavior) -> Result<std::result::Result<(SymmetryElement, [f64; 4]), f64>> {
    if p.is_local()? {
        return Err(Error::LocalInput);
    }
    let mut best = f64::INFINITY;
    for g in SymmetryElement::group() {
        let r = lemma1_residuals(&g.apply(p))?;
        let m = max_abs(&r);
        if m <= TOL_EQ {
            return Ok(Ok((*g, r)));
        }
        best = best.min(m);
    }
    Ok(Err(best))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Report {
    pub holds: bool,
    pub pattern: Option<SignPattern>,
    /// Largest `|sum - pi|` over the four steered pairs, for `pattern` when
    /// it holds and for the best pattern otherwise.
    pub residual: f64,
}

/// Extremality test: some sign pattern `eps` with
/// `sum eps_xy asin c[u_x][x][y] = pi` for all four choices of `u`.
pub fn theorem1_behavior_check(p: &Behavior) -> Result<Theorem1Report> {
    if p.is_local()? {
        return Err(Error::LocalInput);
    }
    let sc = steered_correlators(p)?;
    let t = asin_table(&sc.c);
    let mut best = (f64::INFINITY, SignPattern::chsh());
    for pat in SignPattern::all() {
        let mut worst: f64 = 0.0;
        for u0 in 0..2 {
            for u1 in 0..2 {
                let u = [u0, u1];
                let mut v = 0.0;
                for x in 0..2 {
                    for y in 0..2 {
                        v += pat.eps[x][y] as f64 * t[u[x]][x][y];
                    }
                }
                worst = worst.max((v - PI).abs());
            }
        }
        if worst < best.0 {
            best = (worst, pat);
        }
        if worst <= TOL_EQ {
            return Ok(Theorem1Report { holds: true, pattern: Some(pat), residual: worst });
        }
    }
    Ok(Theorem1Report { holds: false, pattern: None, residual: best.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlternationReport {
    pub holds: bool,
    /// Slacks `b0 - [a0~+], b0 - [a0~-], [a1~+] - b0, [a1~-] - b0,
    /// b1 - [a1~+], b1 - [a1~-], pi - b1, min_s [a0~s]`.
    pub margins: [f64; 8],
}

fn alternation_verdict(margins: [f64; 8], strict: bool) -> AlternationReport {
    let nonstrict = margins.iter().all(|&m| m >= -TOL_EQ);
    let holds = if strict {
        nonstrict && margins[..7].iter().all(|&m| m > TOL_EQ)
    } else {
        nonstrict
    };
    AlternationReport { holds, margins }
}

/// `0 <= [a0~s] <= b0 <= [a1~t] <= b1 < pi` for all `s, t`; strict
/// inequalities between consecutive angles when `strict`.
pub fn full_alternation_check(r: &QubitRealization, strict: bool) -> Result<AlternationReport> {
    if !r.is_canonical() {
        return Err(Error::NotCanonical);
    }
    let at = modified_angles(r)?;
    let u0 = [pi_mod(at[0][0]), pi_mod(at[1][0])];
    let u1 = [pi_mod(at[0][1]), pi_mod(at[1][1])];
    let [b0, b1] = r.b;
    let margins = [
        b0 - u0[0],
        b0 - u0[1],
        u1[0] - b0,
        u1[1] - b0,
        b1 - u1[0],
        b1 - u1[1],
        PI - b1,
        u0[0].min(u0[1]),
    ];
    Ok(alternation_verdict(margins, strict))
}

/// Bob-side version: `0 <= a0 <= [b0~s] <= a1 <= [b1~t] < pi`.
pub fn full_alternation_check_bob(r: &QubitRealization, strict: bool) -> Result<AlternationReport> {
    if !r.is_canonical() {
        return Err(Error::NotCanonical);
    }
    let bt = modified_angles_bob(r)?;
    let v0 = [pi_mod(bt[0][0]), pi_mod(bt[1][0])];
    let v1 = [pi_mod(bt[0][1]), pi_mod(bt[1][1])];
    let [a0, a1] = r.a;
    let margins = [
        v0[0] - a0,
        v0[1] - a0,
        a1 - v0[0],
        a1 - v0[1],
        v1[0] - a1,
        v1[1] - a1,
        PI - v1[0].max(v1[1]),
        a0,
    ];
    Ok(alternation_verdict(margins, strict))
}

/// Alternation of some in-range representative of `r`, searched over
/// relabelings and the behavior-preserving reflections.
pub fn alternation_up_to_relabeling(r: &QubitRealization, strict: bool) -> Result<bool> {
    for (q, _) in orbit_in_range(r, CanonTarget::Sector)
        .into_iter()
        .chain(orbit_in_range(r, CanonTarget::Range))
    {
        if full_alternation_check(&q, strict)?.holds {
            return Ok(true);
        }
    }
    Ok(false)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Local,
    ExtremalExposed,
    ExtremalNonExposed,
    NonExtremalInQ,
    FailsNecessaryQ2Pure,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Which branch of the decision produced the verdict.
    pub fired: String,
    pub chsh_max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theorem1: Option<Theorem1Report>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lemma1_residuals: Option<[f64; 4]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relabeling: Option<SymmetryElement>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub realization: Option<QubitRealization>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alternation_margins: Option<[f64; 8]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prop1_alice: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prop1_bob: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub caveat: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub verdict: Verdict,
    pub details: Diagnostics,
}

pub const CAVEAT_MEMBERSHIP: &str = "membership in Q not certified";

pub fn classify(p: &Behavior) -> Result<Classification> {
    p.ensure_valid()?;
    let mut d = Diagnostics { chsh_max: p.chsh_max(), ..Default::default() };
    if p.is_local()? {
        d.fired = "fine".into();
        return Ok(Classification { verdict: Verdict::Local, details: d });
    }
    let t1 = theorem1_behavior_check(p)?;
    let holds = t1.holds;
    d.theorem1 = Some(t1);
    if holds {
        return Ok(match reconstruct_realization(p) {
            Ok((r, trace)) => {
                d.lemma1_residuals = Some(trace.lemma1_residuals);
                d.relabeling = Some(trace.relabeling);
                d.realization = Some(r);
                let alt = full_alternation_check(&r, true)?;
                d.alternation_margins = Some(alt.margins);
                d.fired = "theorem1".into();
                let verdict = if alt.holds { Verdict::ExtremalExposed } else { Verdict::ExtremalNonExposed };
                Classification { verdict, details: d }
            }
            Err(e) => {
                d.fired = "reconstruction".into();
                d.error = Some(e.to_string());
                Classification { verdict: Verdict::Indeterminate, details: d }
            }
        });
    }
    let alice = prop1_check(p, Side::Alice)?.holds;
    let bob = prop1_check(p, Side::Bob)?.holds;
    d.prop1_alice = Some(alice);
    d.prop1_bob = Some(bob);
    if !alice && !bob {
        d.fired = "prop1".into();
        return Ok(Classification { verdict: Verdict::FailsNecessaryQ2Pure, details: d });
    }
    d.fired = "theorem1".into();
    d.caveat = Some(CAVEAT_MEMBERSHIP.into());
    Ok(Classification { verdict: Verdict::NonExtremalInQ, details: d })
}

/// `asin(cos d) = pi/2 - |d|` for `|d| <= pi`, used by tests and docs.
pub fn asin_cos(d: f64) -> f64 {
    FRAC_PI_2 - d.abs()
}
