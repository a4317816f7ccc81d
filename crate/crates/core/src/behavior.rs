//! Behaviors, Bell functionals and the relabeling group.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;
use std::sync::OnceLock;

use serde::{de, Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::TOL_EQ;

/// Marginals and correlators of a two-input two-output bipartite experiment.
///
/// As a flat vector the components are ordered
/// `(A0, A1, B0, B1, A0B0, A1B0, A0B1, A1B1)`, see [`Behavior::to_vector`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Behavior {
    #[serde(rename = "margA", deserialize_with = "de_pair")]
    pub marg_a: [f64; 2],
    #[serde(rename = "margB", deserialize_with = "de_pair")]
    pub marg_b: [f64; 2],
    /// `corr[x][y] = <A_x B_y>`.
    #[serde(deserialize_with = "de_matrix")]
    pub corr: [[f64; 2]; 2],
}

/// JSON number or decimal string.
#[derive(Deserialize)]
#[serde(untagged)]
enum Num {
    F(f64),
    S(String),
}

impl Num {
    fn value<E: de::Error>(self) -> std::result::Result<f64, E> {
        match self {
            Num::F(v) => Ok(v),
            Num::S(s) => s.trim().parse().map_err(|_| E::custom(format!("not a decimal number: {s:?}"))),
        }
    }
}

fn de_pair<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<[f64; 2], D::Error> {
    let [a, b] = <[Num; 2]>::deserialize(d)?;
    Ok([a.value()?, b.value()?])
}

fn de_matrix<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<[[f64; 2]; 2], D::Error> {
    let [[a, b], [c, e]] = <[[Num; 2]; 2]>::deserialize(d)?;
    Ok([[a.value()?, b.value()?], [c.value()?, e.value()?]])
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonFinite { index: usize },
    ComponentOutOfRange { index: usize, value: f64 },
    NegativeProbability { a: i8, b: i8, x: usize, y: usize, value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFinite { index } => write!(f, "component {index} is not finite"),
            Violation::ComponentOutOfRange { index, value } => {
                write!(f, "component out of range: entry {index} = {value}")
            }
            Violation::NegativeProbability { a, b, x, y, value } => {
                write!(f, "negative probability p({a:+},{b:+}|{x},{y}) = {value:e}")
            }
        }
    }
}

/// Outcome label for index 0 and 1.
pub(crate) const SIGNS: [f64; 2] = [1.0, -1.0];

impl Behavior {
    pub fn new(marg_a: [f64; 2], marg_b: [f64; 2], corr: [[f64; 2]; 2]) -> Self {
        Behavior { marg_a, marg_b, corr }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// Behavior of the deterministic strategy with the given outcomes.
    pub fn deterministic(a_out: [f64; 2], b_out: [f64; 2]) -> Self {
        let mut corr = [[0.0; 2]; 2];
        for x in 0..2 {
            for y in 0..2 {
                corr[x][y] = a_out[x] * b_out[y];
            }
        }
        Behavior { marg_a: a_out, marg_b: b_out, corr }
    }

    /// `(A0, A1, B0, B1, A0B0, A1B0, A0B1, A1B1)`.
    pub fn to_vector(&self) -> [f64; 8] {
        [
            self.marg_a[0],
            self.marg_a[1],
            self.marg_b[0],
            self.marg_b[1],
            self.corr[0][0],
            self.corr[1][0],
            self.corr[0][1],
            self.corr[1][1],
        ]
    }

    pub fn from_vector(v: &[f64; 8]) -> Self {
        Behavior {
            marg_a: [v[0], v[1]],
            marg_b: [v[2], v[3]],
            corr: [[v[4], v[6]], [v[5], v[7]]],
        }
    }

    /// Serialization order `(margA, margB, corr row-major)`, used for
    /// lexicographic comparisons.
    pub fn serial_key(&self) -> [f64; 8] {
        [
            self.marg_a[0],
            self.marg_a[1],
            self.marg_b[0],
            self.marg_b[1],
            self.corr[0][0],
            self.corr[0][1],
            self.corr[1][0],
            self.corr[1][1],
        ]
    }

    /// `p[a][b][x][y]` with outcome index 0 for `+1` and 1 for `-1`.
    pub fn probabilities(&self) -> [[[[f64; 2]; 2]; 2]; 2] {
        let mut p = [[[[0.0; 2]; 2]; 2]; 2];
        for (ia, &a) in SIGNS.iter().enumerate() {
            for (ib, &b) in SIGNS.iter().enumerate() {
                for x in 0..2 {
                    for y in 0..2 {
                        p[ia][ib][x][y] = (1.0
                            + a * self.marg_a[x]
                            + b * self.marg_b[y]
                            + a * b * self.corr[x][y])
                            / 4.0;
                    }
                }
            }
        }
        p
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let v = self.to_vector();
        for (index, &value) in v.iter().enumerate() {
            if !value.is_finite() {
                out.push(Violation::NonFinite { index });
            } else if value.abs() > 1.0 + TOL_EQ {
                out.push(Violation::ComponentOutOfRange { index, value });
            }
        }
        if !out.is_empty() {
            return out;
        }
        let p = self.probabilities();
        for (ia, &a) in SIGNS.iter().enumerate() {
            for (ib, &b) in SIGNS.iter().enumerate() {
                for x in 0..2 {
                    for y in 0..2 {
                        let value = p[ia][ib][x][y];
                        if value < -TOL_EQ {
                            out.push(Violation::NegativeProbability {
                                a: a as i8,
                                b: b as i8,
                                x,
                                y,
                                value,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(v))
        }
    }

    /// `lambda * self + (1 - lambda) * other`.
    pub fn mix(&self, lambda: f64, other: &Behavior) -> Behavior {
        let (p, q) = (self.to_vector(), other.to_vector());
        let mut r = [0.0; 8];
        for k in 0..8 {
            r[k] = lambda * p[k] + (1.0 - lambda) * q[k];
        }
        Behavior::from_vector(&r)
    }

    /// Componentwise maximum absolute difference.
    pub fn max_abs_diff(&self, other: &Behavior) -> f64 {
        let (p, q) = (self.to_vector(), other.to_vector());
        (0..8).map(|k| (p[k] - q[k]).abs()).fold(0.0, f64::max)
    }

    /// The eight CHSH expressions, in [`SignPattern::all`] order.
    pub fn chsh_all(&self) -> [f64; 8] {
        let mut out = [0.0; 8];
        for (k, pat) in SignPattern::all().iter().enumerate() {
            let mut v = 0.0;
            for x in 0..2 {
                for y in 0..2 {
                    v += pat.eps[x][y] as f64 * self.corr[x][y];
                }
            }
            out[k] = v;
        }
        out
    }

    pub fn chsh_max(&self) -> f64 {
        self.chsh_all().into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Fine's criterion: a valid behavior is local iff every CHSH value is at
    /// most 2.
    pub fn is_local(&self) -> Result<bool> {
        self.ensure_valid()?;
        Ok(self.chsh_max() <= 2.0 + TOL_EQ)
    }
}

pub fn probabilities(p: &Behavior) -> [[[[f64; 2]; 2]; 2]; 2] {
    p.probabilities()
}

pub fn validate(p: &Behavior) -> Vec<Violation> {
    p.validate()
}

pub fn chsh_all(p: &Behavior) -> [f64; 8] {
    p.chsh_all()
}

pub fn is_local(p: &Behavior) -> Result<bool> {
    p.is_local()
}

/// Signs `eps[x][y]` attached to the four correlators, with product `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignPattern {
    pub eps: [[i8; 2]; 2],
}

impl SignPattern {
    /// The eight patterns with `prod eps = -1`, enumerated in a fixed order.
    pub fn all() -> [SignPattern; 8] {
        let mut out = [SignPattern { eps: [[1; 2]; 2] }; 8];
        let mut n = 0;
        for bits in 0u8..16 {
            let e = |k: u8| if bits >> k & 1 == 1 { -1i8 } else { 1i8 };
            let eps = [[e(0), e(2)], [e(1), e(3)]];
            if eps[0][0] * eps[0][1] * eps[1][0] * eps[1][1] == -1 {
                out[n] = SignPattern { eps };
                n += 1;
            }
        }
        out
    }

    /// CHSH pattern `(+, +; +, -)` with `eps[1][1] = -1`.
    pub fn chsh() -> SignPattern {
        SignPattern { eps: [[1, 1], [1, -1]] }
    }
}

/// Linear functional `coeffs . P + offset` on behaviors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellFunctional {
    /// `(A0, A1, B0, B1, A0B0, A1B0, A0B1, A1B1)` coefficients.
    pub coeffs: [f64; 8],
    #[serde(default)]
    pub offset: f64,
}

impl BellFunctional {
    pub fn new(coeffs: [f64; 8]) -> Self {
        BellFunctional { coeffs, offset: 0.0 }
    }

    pub fn chsh() -> Self {
        Self::new([0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, -1.0])
    }

    pub fn value(&self, p: &Behavior) -> f64 {
        let v = p.to_vector();
        self.coeffs.iter().zip(v.iter()).map(|(c, x)| c * x).sum::<f64>() + self.offset
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite()) && self.offset.is_finite()
    }
}

pub fn bell_value(beta: &BellFunctional, p: &Behavior) -> f64 {
    beta.value(p)
}

/// Relabeling of parties, inputs and outputs.
///
/// Acting on a behavior, output flips are applied first (indexed by the
/// original measurements `A0, A1, B0, B1`), then input swaps, then the party
/// swap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SymmetryElement {
    pub party_swap: bool,
    pub input_swap_a: bool,
    pub input_swap_b: bool,
    pub output_flip: [bool; 4],
}

/// Signed permutation of the four measurements: measurement `m` is sent to
/// slot `to[m]` with sign `sign[m]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct SignedPerm {
    to: [usize; 4],
    sign: [i8; 4],
}

impl SymmetryElement {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity()
    }

    pub fn party_swap() -> Self {
        SymmetryElement { party_swap: true, ..Self::default() }
    }

    pub fn input_swap_a() -> Self {
        SymmetryElement { input_swap_a: true, ..Self::default() }
    }

    pub fn input_swap_b() -> Self {
        SymmetryElement { input_swap_b: true, ..Self::default() }
    }

    /// Flip of the outputs of measurement `m` in `A0, A1, B0, B1` order.
    pub fn output_flip(m: usize) -> Self {
        let mut output_flip = [false; 4];
        output_flip[m] = true;
        SymmetryElement { output_flip, ..Self::default() }
    }

    pub fn generators() -> Vec<Self> {
        let mut g = vec![Self::party_swap(), Self::input_swap_a(), Self::input_swap_b()];
        g.extend((0..4).map(Self::output_flip));
        g
    }

    fn perm(&self) -> SignedPerm {
        let mut to = [0; 4];
        let mut sign = [1; 4];
        for m in 0..4 {
            let mut p = m;
            if self.input_swap_a && p < 2 {
                p = 1 - p;
            }
            if self.input_swap_b && p >= 2 {
                p = 5 - p;
            }
            if self.party_swap {
                p = (p + 2) % 4;
            }
            to[m] = p;
            sign[m] = if self.output_flip[m] { -1 } else { 1 };
        }
        SignedPerm { to, sign }
    }

    fn from_perm(sp: SignedPerm) -> Self {
        let party_swap = sp.to[0] >= 2;
        let unparty = |p: usize| if party_swap { (p + 2) % 4 } else { p };
        SymmetryElement {
            party_swap,
            input_swap_a: unparty(sp.to[0]) == 1,
            input_swap_b: unparty(sp.to[2]) == 3,
            output_flip: [sp.sign[0] < 0, sp.sign[1] < 0, sp.sign[2] < 0, sp.sign[3] < 0],
        }
    }

    /// `self ∘ other`: first `other`, then `self`.
    pub fn compose(&self, other: &SymmetryElement) -> SymmetryElement {
        let (s, o) = (self.perm(), other.perm());
        let mut to = [0; 4];
        let mut sign = [1; 4];
        for m in 0..4 {
            let mid = o.to[m];
            to[m] = s.to[mid];
            sign[m] = s.sign[mid] * o.sign[m];
        }
        Self::from_perm(SignedPerm { to, sign })
    }

    pub fn inverse(&self) -> SymmetryElement {
        let sp = self.perm();
        let mut to = [0; 4];
        let mut sign = [1; 4];
        for m in 0..4 {
            to[sp.to[m]] = m;
            sign[sp.to[m]] = sp.sign[m];
        }
        Self::from_perm(SignedPerm { to, sign })
    }

    pub fn apply(&self, p: &Behavior) -> Behavior {
        let sp = self.perm();
        let old = [p.marg_a[0], p.marg_a[1], p.marg_b[0], p.marg_b[1]];
        let mut new = [0.0; 4];
        for m in 0..4 {
            new[sp.to[m]] = sp.sign[m] as f64 * old[m];
        }
        let mut corr = [[0.0; 2]; 2];
        for x in 0..2 {
            for y in 0..2 {
                let v = (sp.sign[x] * sp.sign[2 + y]) as f64 * p.corr[x][y];
                let (ti, tj) = (sp.to[x], sp.to[2 + y]);
                if ti < 2 {
                    corr[ti][tj - 2] = v;
                } else {
                    corr[tj][ti - 2] = v;
                }
            }
        }
        Behavior { marg_a: [new[0], new[1]], marg_b: [new[2], new[3]], corr }
    }

    /// All elements generated by the generator families, identity first.
    pub fn group() -> &'static [SymmetryElement] {
        static GROUP: OnceLock<Vec<SymmetryElement>> = OnceLock::new();
        GROUP.get_or_init(|| {
            let gens = Self::generators();
            let mut seen = HashSet::new();
            let mut out = vec![Self::identity()];
            seen.insert(Self::identity());
            let mut i = 0;
            while i < out.len() {
                let g = out[i];
                for h in &gens {
                    let k = h.compose(&g);
                    if seen.insert(k) {
                        out.push(k);
                    }
                }
                i += 1;
            }
            out
        })
    }
}

pub fn apply_symmetry(g: &SymmetryElement, p: &Behavior) -> Behavior {
    g.apply(p)
}

pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// Lexicographically smallest image of `p` over the relabeling group,
/// together with the element producing it.
pub fn canonical_behavior(p: &Behavior) -> (Behavior, SymmetryElement) {
    let mut best = (*p, SymmetryElement::identity());
    let mut key = p.serial_key();
    for g in SymmetryElement::group().iter().skip(1) {
        let q = g.apply(p);
        let k = q.serial_key();
        if lex_cmp(&k, &key) == Ordering::Less {
            best = (q, *g);
            key = k;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r3() -> Behavior {
        let h = 0.5f64.sqrt();
        Behavior::new([h, 0.0], [0.5, -0.5], [[h, -h], [0.5, 0.5]])
    }

    #[test]
    fn uniform_probabilities() {
        let p = Behavior::zero().probabilities();
        for v in p.iter().flatten().flatten().flatten() {
            assert_eq!(*v, 0.25);
        }
    }

    #[test]
    fn deterministic_marginal_rows() {
        let p = Behavior::new([1.0, 0.0], [0.0; 2], [[0.0; 2]; 2]).probabilities();
        for y in 0..2 {
            assert_eq!(p[0][0][0][y], 0.5);
            assert_eq!(p[0][1][0][y], 0.5);
            assert_eq!(p[1][0][0][y], 0.0);
            assert_eq!(p[1][1][0][y], 0.0);
        }
    }

    #[test]
    fn validate_flags_range_and_probability() {
        assert!(Behavior::zero().validate().is_empty());
        let mut p = Behavior::zero();
        p.corr[0][0] = 1.5;
        let v = p.validate();
        assert!(v[0].to_string().contains("component out of range"));
        let q = Behavior::new([0.0, 0.5], [0.0, 0.5], [[0.0, 0.0], [0.0, -0.1]]);
        assert!(matches!(
            q.validate()[..],
            [Violation::NegativeProbability { a: -1, b: -1, x: 1, y: 1, .. }]
        ));
    }

    #[test]
    fn chsh_values() {
        let pr = Behavior::new([0.0; 2], [0.0; 2], [[1.0, 1.0], [1.0, -1.0]]);
        assert_eq!(pr.chsh_max(), 4.0);
        assert!(Behavior::zero().chsh_all().iter().all(|&v| v == 0.0));
        let det = Behavior::deterministic([1.0, 1.0], [1.0, 1.0]);
        assert_eq!(BellFunctional::chsh().value(&det), 2.0);
        assert!(det.is_local().unwrap());
        assert!(!pr.is_local().unwrap());
    }

    #[test]
    fn offset_on_zero_behavior() {
        let b = BellFunctional { coeffs: [3.0; 8], offset: -0.5 };
        assert_eq!(b.value(&Behavior::zero()), -0.5);
    }

    #[test]
    fn sign_patterns() {
        let all = SignPattern::all();
        let set: HashSet<_> = all.iter().collect();
        assert_eq!(set.len(), 8);
        assert!(all.contains(&SignPattern::chsh()));
    }

    #[test]
    fn group_closure_order() {
        assert_eq!(SymmetryElement::group().len(), 128);
        assert!(SymmetryElement::group()[0].is_identity());
    }

    #[test]
    fn group_inverse_and_composition() {
        let p = r3();
        for g in SymmetryElement::group() {
            let back = g.inverse().apply(&g.apply(&p));
            assert!(back.max_abs_diff(&p) == 0.0);
            for h in SymmetryElement::group().iter().step_by(7) {
                let a = g.compose(h).apply(&p);
                let b = g.apply(&h.apply(&p));
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn generator_actions() {
        let m = 0.3;
        let p = Behavior::new([m, 0.0], [0.0; 2], [[0.1, 0.2], [0.3, 0.4]]);
        let q = SymmetryElement::party_swap().apply(&p);
        assert_eq!(q.marg_b, [m, 0.0]);
        assert_eq!(q.corr, [[0.1, 0.3], [0.2, 0.4]]);

        let f = SymmetryElement::output_flip(0).apply(&p);
        assert_eq!(f.marg_a, [-m, 0.0]);
        assert_eq!(f.corr, [[-0.1, -0.2], [0.3, 0.4]]);

        let s = SymmetryElement::input_swap_b().apply(&r3());
        assert_eq!(s.corr[0], [r3().corr[0][1], r3().corr[0][0]]);
        assert_eq!(s.corr[1], [r3().corr[1][1], r3().corr[1][0]]);
    }

    #[test]
    fn canonical_form_orbit_invariant() {
        let p = r3();
        let (c, g) = canonical_behavior(&p);
        assert_eq!(g.apply(&p), c);
        for h in SymmetryElement::group() {
            let (c2, _) = canonical_behavior(&h.apply(&p));
            assert_eq!(c2, c);
        }
        let (c3, g3) = canonical_behavior(&c);
        assert_eq!(c3, c);
        assert!(g3.is_identity());
    }
}
