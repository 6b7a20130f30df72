//! Model types for the slow-fast class, the 4-D auxiliary variational
//! system, and the order-by-order center-manifold solver.
//!
//! The model class is fixed to
//!
//! ```text
//!     dx/dt = y + eta(t)
//!   e dy/dt = f(x) - y
//! ```
//!
//! with `f` a univariate polynomial with exact rational coefficients.
//! Eliminating the noise variationally yields the auxiliary system
//!
//! ```text
//!     dx/dt  = y + l1          e dy/dt  = f(x) - y
//!     dl1/dt = -f'(x) l2       e dl2/dt = l2 - l1
//! ```
//!
//! whose fast layer admits an invariant graph `y = h(x, l1, e)`,
//! `l2 = k(x, l1, e)`. The solver determines `h` and `k` grade by grade as
//! exact rational series and certifies the result by substituting it back
//! into the invariance conditions, which must vanish identically.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{Signed, ToPrimitive, Zero};

use crate::series::{rat_int, Rat, Symbol, TruncatedSeries};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Exact univariate polynomials (the fast drift f)
// ---------------------------------------------------------------------------

/// Univariate polynomial in `x` with exact rational coefficients, ascending
/// by power.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly1 {
    coeffs: Vec<Rat>,
}

impl Poly1 {
    pub fn new(coeffs: Vec<Rat>) -> Self {
        let mut p = Poly1 { coeffs };
        p.trim();
        p
    }

    pub fn from_i64(coeffs: &[i64]) -> Self {
        Self::new(coeffs.iter().map(|&c| rat_int(c)).collect())
    }

    fn trim(&mut self) {
        while self.coeffs.last().is_some_and(|c| c.is_zero()) {
            self.coeffs.pop();
        }
    }

    pub fn degree(&self) -> u32 {
        self.coeffs.len().saturating_sub(1) as u32
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[Rat] {
        &self.coeffs
    }

    pub fn constant_term(&self) -> Rat {
        self.coeffs.first().cloned().unwrap_or_else(Rat::zero)
    }

    pub fn eval_rat(&self, x: &Rat) -> Rat {
        let mut acc = Rat::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn derivative(&self) -> Poly1 {
        if self.coeffs.len() <= 1 {
            return Poly1::new(Vec::new());
        }
        Poly1::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(p, c)| c * rat_int(p as i64))
                .collect(),
        )
    }

    pub fn as_series(&self, grade_cap: u32) -> TruncatedSeries {
        TruncatedSeries::from_terms(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(p, c)| (p as u32, 0, 0, c.clone())),
            grade_cap,
        )
    }

    pub fn compile(&self) -> CompiledPoly {
        CompiledPoly {
            coeffs: self
                .coeffs
                .iter()
                .map(|c| c.to_f64().expect("coefficient out of f64 range"))
                .collect(),
        }
    }
}

impl fmt::Display for Poly1 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_series(self.degree().max(1)))
    }
}

/// Horner-form f64 evaluator for a [`Poly1`], for numeric inner loops.
#[derive(Clone, Debug)]
pub struct CompiledPoly {
    coeffs: Vec<f64>,
}

impl CompiledPoly {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }
}

// ---------------------------------------------------------------------------
// Exact polynomials in the four auxiliary variables
// ---------------------------------------------------------------------------

/// Variables of the auxiliary phase space, in storage order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AuxVar {
    X = 0,
    L1 = 1,
    Y = 2,
    L2 = 3,
}

/// Sparse exact polynomial in `(x, l1, y, l2)`. Used to state the auxiliary
/// vector field symbolically so its canonical Hamiltonian structure can be
/// verified without tolerances.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Poly4 {
    terms: BTreeMap<[u32; 4], Rat>,
}

impl Poly4 {
    pub fn zero() -> Self {
        Poly4::default()
    }

    pub fn var(v: AuxVar) -> Self {
        let mut e = [0u32; 4];
        e[v as usize] = 1;
        Poly4::from_terms([(e, rat_int(1))])
    }

    pub fn constant(c: Rat) -> Self {
        Poly4::from_terms([([0, 0, 0, 0], c)])
    }

    pub fn from_terms<I: IntoIterator<Item = ([u32; 4], Rat)>>(entries: I) -> Self {
        let mut p = Poly4::zero();
        for (e, c) in entries {
            p.add_term(e, c);
        }
        p
    }

    /// Lift a univariate polynomial into one of the four variables.
    pub fn from_poly1(p: &Poly1, v: AuxVar) -> Self {
        Poly4::from_terms(p.coeffs().iter().enumerate().map(|(pow, c)| {
            let mut e = [0u32; 4];
            e[v as usize] = pow as u32;
            (e, c.clone())
        }))
    }

    fn add_term(&mut self, expo: [u32; 4], coeff: Rat) {
        if coeff.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(expo) {
            Entry::Vacant(v) => {
                v.insert(coeff);
            }
            Entry::Occupied(mut o) => {
                let sum = o.get() + &coeff;
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(*e, c.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        Poly4 {
            terms: self.terms.iter().map(|(e, c)| (*e, -c.clone())).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Poly4::zero();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e = [ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2], ea[3] + eb[3]];
                out.add_term(e, ca * cb);
            }
        }
        out
    }

    pub fn diff(&self, v: AuxVar) -> Self {
        let i = v as usize;
        let mut out = Poly4::zero();
        for (e, c) in &self.terms {
            if e[i] == 0 {
                continue;
            }
            let mut d = *e;
            d[i] -= 1;
            out.add_term(d, c * rat_int(e[i] as i64));
        }
        out
    }

    /// Substitute zero for one variable.
    pub fn set_zero(&self, v: AuxVar) -> Self {
        let i = v as usize;
        Poly4 {
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| e[i] == 0)
                .map(|(e, c)| (*e, c.clone()))
                .collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval_f64(&self, s: [f64; 4]) -> f64 {
        let mut acc = 0.0;
        for (e, c) in &self.terms {
            let mut t = c.to_f64().expect("coefficient out of f64 range");
            for (i, &p) in e.iter().enumerate() {
                t *= s[i].powi(p as i32);
            }
            acc += t;
        }
        acc
    }
}

// ---------------------------------------------------------------------------
// Slow-fast models
// ---------------------------------------------------------------------------

/// Stability of an equilibrium of the fast drift.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stability {
    /// `f'(x*) < 0`: attracting well.
    Sink,
    /// `f'(x*) > 0`: barrier top.
    Saddle,
}

impl fmt::Display for Stability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stability::Sink => write!(f, "sink"),
            Stability::Saddle => write!(f, "saddle"),
        }
    }
}

/// An equilibrium `f(x*) = 0` with its stability label.
#[derive(Clone, Debug, PartialEq)]
pub struct Equilibrium {
    pub x: Rat,
    pub stability: Stability,
}

impl Equilibrium {
    pub fn x_f64(&self) -> f64 {
        self.x.to_f64().expect("equilibrium out of f64 range")
    }
}

/// A validated bistable slow-fast model.
///
/// `epsilon` is the timescale ratio and `noise_d` the noise intensity `D`
/// with `<eta(t) eta(t')> = 2 D delta(t - t')` (so the noise standard
/// deviation is `sqrt(2 D)`).
#[derive(Clone, Debug)]
pub struct SlowFastModel {
    name: String,
    f: Poly1,
    epsilon: f64,
    noise_d: f64,
    equilibria: Vec<Equilibrium>,
}

impl SlowFastModel {
    /// Validate and build a model. Every listed equilibrium must satisfy
    /// `f(x*) = 0` exactly, stability labels must match the sign of
    /// `f'(x*)`, and the sorted equilibria must contain two sinks separated
    /// by one saddle.
    pub fn new(
        name: impl Into<String>,
        f: Poly1,
        equilibria: Vec<Equilibrium>,
        epsilon: f64,
        noise_d: f64,
    ) -> Result<Self> {
        if f.is_zero() {
            return Err(Error::InvalidModel("fast drift is identically zero".into()));
        }
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::InvalidModel(format!(
                "timescale ratio must be finite and nonnegative, got {epsilon}"
            )));
        }
        if !(noise_d.is_finite() && noise_d >= 0.0) {
            return Err(Error::InvalidModel(format!(
                "noise intensity must be finite and nonnegative, got {noise_d}"
            )));
        }
        let fp = f.derivative();
        let mut sorted = equilibria.clone();
        sorted.sort_by(|a, b| a.x.cmp(&b.x));
        for pair in sorted.windows(2) {
            if pair[0].x == pair[1].x {
                return Err(Error::InvalidModel(format!(
                    "duplicate equilibrium at x = {}",
                    pair[0].x
                )));
            }
        }
        for eq in &sorted {
            if !f.eval_rat(&eq.x).is_zero() {
                return Err(Error::InvalidModel(format!(
                    "x = {} is not a root of the fast drift",
                    eq.x
                )));
            }
            let slope = fp.eval_rat(&eq.x);
            let expected = if slope.is_negative() {
                Stability::Sink
            } else if slope.is_positive() {
                Stability::Saddle
            } else {
                return Err(Error::InvalidModel(format!(
                    "degenerate equilibrium at x = {} (f'(x*) = 0)",
                    eq.x
                )));
            };
            if eq.stability != expected {
                return Err(Error::InvalidModel(format!(
                    "equilibrium at x = {} labeled {} but f'(x*) says {}",
                    eq.x, eq.stability, expected
                )));
            }
        }
        let has_well_pair = sorted.windows(3).any(|w| {
            w[0].stability == Stability::Sink
                && w[1].stability == Stability::Saddle
                && w[2].stability == Stability::Sink
        });
        if !has_well_pair {
            return Err(Error::InvalidModel(
                "model must have two sinks separated by one saddle".into(),
            ));
        }
        Ok(SlowFastModel {
            name: name.into(),
            f,
            epsilon,
            noise_d,
            equilibria: sorted,
        })
    }

    /// The double-well oscillator with fast drift `x - x^3`.
    pub fn duffing(epsilon: f64, noise_d: f64) -> Self {
        Self::new(
            "duffing",
            Poly1::from_i64(&[0, 1, 0, -1]),
            vec![
                Equilibrium {
                    x: rat_int(-1),
                    stability: Stability::Sink,
                },
                Equilibrium {
                    x: rat_int(0),
                    stability: Stability::Saddle,
                },
                Equilibrium {
                    x: rat_int(1),
                    stability: Stability::Sink,
                },
            ],
            epsilon,
            noise_d,
        )
        .expect("built-in model is valid")
    }

    /// The broken-symmetry double well with fast drift `x(1+x)(2-x) = 2x + x^2 - x^3`.
    pub fn asymmetric(epsilon: f64, noise_d: f64) -> Self {
        Self::new(
            "asymmetric",
            Poly1::from_i64(&[0, 2, 1, -1]),
            vec![
                Equilibrium {
                    x: rat_int(-1),
                    stability: Stability::Sink,
                },
                Equilibrium {
                    x: rat_int(0),
                    stability: Stability::Saddle,
                },
                Equilibrium {
                    x: rat_int(2),
                    stability: Stability::Sink,
                },
            ],
            epsilon,
            noise_d,
        )
        .expect("built-in model is valid")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn f(&self) -> &Poly1 {
        &self.f
    }

    pub fn f_prime(&self) -> Poly1 {
        self.f.derivative()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn noise_d(&self) -> f64 {
        self.noise_d
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_noise_d(mut self, noise_d: f64) -> Self {
        self.noise_d = noise_d;
        self
    }

    /// Equilibria sorted by position.
    pub fn equilibria(&self) -> &[Equilibrium] {
        &self.equilibria
    }

    /// Find the listed equilibrium nearest to `x`, if within `tol`.
    pub fn equilibrium_near(&self, x: f64, tol: f64) -> Option<&Equilibrium> {
        self.equilibria
            .iter()
            .min_by(|a, b| (a.x_f64() - x).abs().total_cmp(&(b.x_f64() - x).abs()))
            .filter(|eq| (eq.x_f64() - x).abs() <= tol)
    }

    /// True when no other equilibrium lies strictly between the two given ones.
    pub fn adjacent(&self, a: &Rat, b: &Rat) -> bool {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        !self.equilibria.iter().any(|eq| eq.x > *lo && eq.x < *hi)
    }
}

// ---------------------------------------------------------------------------
// The auxiliary variational system
// ---------------------------------------------------------------------------

/// The deterministic 4-D system governing the state and the most likely
/// noise momentum, stated symbolically (with the fast equations scaled by
/// the timescale ratio so all components are polynomial) plus compiled
/// numeric evaluators.
#[derive(Clone, Debug)]
pub struct AuxiliarySystem {
    /// dx/dt = y + l1
    pub xdot: Poly4,
    /// dl1/dt = -f'(x) l2
    pub l1dot: Poly4,
    /// e dy/dt = f(x) - y
    pub eps_ydot: Poly4,
    /// e dl2/dt = l2 - l1
    pub eps_l2dot: Poly4,
    f: CompiledPoly,
    fp: CompiledPoly,
    fpp: CompiledPoly,
}

impl AuxiliarySystem {
    /// Slow-time vector field at timescale ratio `eps > 0`.
    #[inline]
    pub fn eval_slow(&self, s: [f64; 4], eps: f64) -> [f64; 4] {
        let [x, l1, y, l2] = s;
        [
            y + l1,
            -self.fp.eval(x) * l2,
            (self.f.eval(x) - y) / eps,
            (l2 - l1) / eps,
        ]
    }

    /// Jacobian of the slow-time field.
    pub fn jacobian_slow(&self, s: [f64; 4], eps: f64) -> [[f64; 4]; 4] {
        let [x, _l1, _y, l2] = s;
        let fp = self.fp.eval(x);
        let fpp = self.fpp.eval(x);
        [
            [0.0, 1.0, 1.0, 0.0],
            [-fpp * l2, 0.0, 0.0, -fp],
            [fp / eps, 0.0, -1.0 / eps, 0.0],
            [0.0, -1.0 / eps, 0.0, 1.0 / eps],
        ]
    }

    /// Layer-time vector field of the extended 5-D system
    /// `(x, l1, y, l2, e)` in which the timescale ratio is a frozen state
    /// variable with `e' = 0`.
    #[inline]
    pub fn eval_layer(&self, s: [f64; 5]) -> [f64; 5] {
        let [x, l1, y, l2, eps] = s;
        [
            eps * (y + l1),
            -eps * self.fp.eval(x) * l2,
            self.f.eval(x) - y,
            l2 - l1,
            0.0,
        ]
    }
}

/// Build the auxiliary system for a model: the noise enters only through
/// the slow equation and is eliminated by identifying it with the conjugate
/// momentum of `x`.
pub fn build_auxiliary_system(model: &SlowFastModel) -> AuxiliarySystem {
    let f = model.f();
    let fp = f.derivative();
    let l1 = Poly4::var(AuxVar::L1);
    let y = Poly4::var(AuxVar::Y);
    let l2 = Poly4::var(AuxVar::L2);
    let f4 = Poly4::from_poly1(f, AuxVar::X);
    let fp4 = Poly4::from_poly1(&fp, AuxVar::X);
    AuxiliarySystem {
        xdot: y.add(&l1),
        l1dot: fp4.mul(&l2).neg(),
        eps_ydot: f4.sub(&y),
        eps_l2dot: l2.sub(&l1),
        f: f.compile(),
        fp: fp.compile(),
        fpp: fp.derivative().compile(),
    }
}

// ---------------------------------------------------------------------------
// Center manifold
// ---------------------------------------------------------------------------

/// The invariant-graph series of the fast layer: `y = h(x, l1, e)` and
/// `l2 = k(x, l1, e)`, exact through `grade_cap`.
#[derive(Clone, Debug, PartialEq)]
pub struct CenterManifold {
    pub h: TruncatedSeries,
    pub k: TruncatedSeries,
    pub grade_cap: u32,
}

/// Residuals of the two invariance conditions for a candidate `(h, k)`:
///
/// ```text
///   res_h = dh/dx x' + dh/dl1 l1' - (f(x) - h)
///   res_k = dk/dx x' + dk/dl1 l1' - (k - l1)
/// ```
///
/// with `x' = e (h + l1)` and `l1' = -e f'(x) k`. Both vanish identically
/// through the grade cap iff the graph is invariant to that order.
pub fn cm_residuals(
    model: &SlowFastModel,
    cm: &CenterManifold,
) -> (TruncatedSeries, TruncatedSeries) {
    let cap = cm.grade_cap;
    let f = model.f().as_series(cap);
    let fp = model.f_prime().as_series(cap);
    let l1 = TruncatedSeries::symbol(Symbol::L1, cap);
    let eps = TruncatedSeries::symbol(Symbol::Eps, cap);

    let xprime = eps.mul(&cm.h.add(&l1));
    let l1prime = eps.mul(&fp).mul(&cm.k).neg();

    let res_h =
        cm.h.diff(Symbol::X)
            .mul(&xprime)
            .add(&cm.h.diff(Symbol::L1).mul(&l1prime))
            .sub(&f.sub(&cm.h));
    let res_k =
        cm.k.diff(Symbol::X)
            .mul(&xprime)
            .add(&cm.k.diff(Symbol::L1).mul(&l1prime))
            .sub(&cm.k.sub(&l1));
    (res_h, res_k)
}

/// Solve the invariance conditions grade by grade.
///
/// At each grade the unknown coefficients enter linearly with unit diagonal
/// (through the `-h` and `+k` terms), so a fixed-point sweep converges in at
/// most `grade_cap` iterations. The result is certified by an exact residual
/// check, and the graph is verified to pass through the origin tangent to
/// the center directions (no constant and no pure-`e` terms).
pub fn solve_center_manifold(model: &SlowFastModel, grade_cap: u32) -> Result<CenterManifold> {
    if grade_cap < 1 {
        return Err(Error::InvalidParameter(
            "grade cap must be at least 1".into(),
        ));
    }
    if grade_cap < model.f().degree() {
        return Err(Error::InvalidParameter(format!(
            "grade cap {} is below the fast drift degree {}",
            grade_cap,
            model.f().degree()
        )));
    }
    if !model.f().constant_term().is_zero() {
        return Err(Error::InvalidModel(
            "fast drift must vanish at the origin for the layer expansion".into(),
        ));
    }

    let cap = grade_cap;
    let f = model.f().as_series(cap);
    let fp = model.f_prime().as_series(cap);
    let l1 = TruncatedSeries::symbol(Symbol::L1, cap);
    let eps = TruncatedSeries::symbol(Symbol::Eps, cap);

    let mut h = f.clone();
    let mut k = l1.clone();
    let mut converged = false;
    for _ in 0..=cap + 1 {
        let xprime = eps.mul(&h.add(&l1));
        let l1prime = eps.mul(&fp).mul(&k).neg();
        let next_h = f.sub(
            &h.diff(Symbol::X)
                .mul(&xprime)
                .add(&h.diff(Symbol::L1).mul(&l1prime)),
        );
        let next_k = l1.add(
            &k.diff(Symbol::X)
                .mul(&xprime)
                .add(&k.diff(Symbol::L1).mul(&l1prime)),
        );
        if next_h == h && next_k == k {
            converged = true;
            break;
        }
        h = next_h;
        k = next_k;
    }
    if !converged {
        return Err(Error::SolveFailed(
            "grade-by-grade sweep did not reach a fixed point".into(),
        ));
    }

    let cm = CenterManifold { h, k, grade_cap };
    let (res_h, res_k) = cm_residuals(model, &cm);
    if !res_h.is_zero() || !res_k.is_zero() {
        return Err(Error::SolveFailed(format!(
            "nonzero invariance residuals: res_h = {res_h}, res_k = {res_k}"
        )));
    }
    // Tangency at the origin: no constant and no pure-e terms may appear.
    let pure_eps = |s: &TruncatedSeries| s.iter().any(|(m, _)| m.x == 0 && m.l1 == 0);
    if pure_eps(&cm.h) || pure_eps(&cm.k) {
        return Err(Error::SolveFailed(
            "graph does not pass through the origin tangent to the center directions".into(),
        ));
    }
    // The e = 0 slice must reproduce the singular dynamics exactly.
    let mut at_zero = BTreeMap::new();
    at_zero.insert(Symbol::Eps, TruncatedSeries::zero(cap));
    if cm.h.compose(&at_zero) != f || cm.k.compose(&at_zero) != l1 {
        return Err(Error::SolveFailed(
            "e = 0 slice does not recover the singular dynamics".into(),
        ));
    }
    Ok(cm)
}

// ---------------------------------------------------------------------------
// Reduced slow field
// ---------------------------------------------------------------------------

/// The planar field obtained by restricting the auxiliary system to the
/// invariant graph: `dx/dt = h + l1`, `dl1/dt = -f'(x) k`, as series in
/// `(x, l1, e)`.
#[derive(Clone, Debug)]
pub struct ReducedField {
    pub xdot: TruncatedSeries,
    pub l1dot: TruncatedSeries,
}

/// Substitute `y = h`, `l2 = k` into the slow pair of the auxiliary system.
pub fn reduced_field(cm: &CenterManifold, model: &SlowFastModel) -> ReducedField {
    let cap = cm.grade_cap;
    let l1 = TruncatedSeries::symbol(Symbol::L1, cap);
    let fp = model.f_prime().as_series(cap);
    ReducedField {
        xdot: cm.h.add(&l1),
        l1dot: fp.mul(&cm.k).neg(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::rat;

    #[test]
    fn builtin_models_validate() {
        let d = SlowFastModel::duffing(0.01, 0.05);
        assert_eq!(d.equilibria().len(), 3);
        let a = SlowFastModel::asymmetric(0.01, 0.05);
        assert_eq!(a.equilibria()[2].x, rat_int(2));
    }

    #[test]
    fn rejects_wrong_stability_label() {
        let err = SlowFastModel::new(
            "bad",
            Poly1::from_i64(&[0, 1, 0, -1]),
            vec![
                Equilibrium {
                    x: rat_int(-1),
                    stability: Stability::Saddle,
                },
                Equilibrium {
                    x: rat_int(0),
                    stability: Stability::Saddle,
                },
                Equilibrium {
                    x: rat_int(1),
                    stability: Stability::Sink,
                },
            ],
            0.1,
            0.05,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidModel(_)));
    }

    #[test]
    fn rejects_non_root_equilibrium() {
        let err = SlowFastModel::new(
            "bad",
            Poly1::from_i64(&[0, 1, 0, -1]),
            vec![
                Equilibrium {
                    x: rat(1, 2),
                    stability: Stability::Sink,
                },
                Equilibrium {
                    x: rat_int(0),
                    stability: Stability::Saddle,
                },
                Equilibrium {
                    x: rat_int(1),
                    stability: Stability::Sink,
                },
            ],
            0.1,
            0.05,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidModel(_)));
    }

    #[test]
    fn rejects_missing_well_structure() {
        // Single well: f = -x has one sink and no saddle.
        let err = SlowFastModel::new(
            "bad",
            Poly1::from_i64(&[0, -1]),
            vec![Equilibrium {
                x: rat_int(0),
                stability: Stability::Sink,
            }],
            0.1,
            0.05,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidModel(_)));
    }

    #[test]
    fn auxiliary_system_duffing_momentum_equation() {
        // For f = x - x^3 the momentum equation is dl1/dt = (3x^2 - 1) l2.
        let model = SlowFastModel::duffing(0.01, 0.05);
        let aux = build_auxiliary_system(&model);
        let expect = Poly4::from_terms([([2, 0, 0, 1], rat_int(3)), ([0, 0, 0, 1], rat_int(-1))]);
        assert_eq!(aux.l1dot, expect);
    }

    #[test]
    fn auxiliary_system_asymmetric_momentum_equation() {
        // f = 2x + x^2 - x^3 gives dl1/dt = -(2 + 2x - 3x^2) l2.
        let model = SlowFastModel::asymmetric(0.01, 0.05);
        let aux = build_auxiliary_system(&model);
        let expect = Poly4::from_terms([
            ([0, 0, 0, 1], rat_int(-2)),
            ([1, 0, 0, 1], rat_int(-2)),
            ([2, 0, 0, 1], rat_int(3)),
        ]);
        assert_eq!(aux.l1dot, expect);
    }

    #[test]
    fn auxiliary_system_noise_free_reduction() {
        // Setting l1 = l2 = 0 recovers the deterministic slow-fast system.
        for model in [
            SlowFastModel::duffing(0.01, 0.05),
            SlowFastModel::asymmetric(0.01, 0.05),
        ] {
            let aux = build_auxiliary_system(&model);
            let xdot0 = aux.xdot.set_zero(AuxVar::L1).set_zero(AuxVar::L2);
            assert_eq!(xdot0, Poly4::var(AuxVar::Y));
            let l1dot0 = aux.l1dot.set_zero(AuxVar::L1).set_zero(AuxVar::L2);
            assert!(l1dot0.is_zero());
            let ydot0 = aux.eps_ydot.set_zero(AuxVar::L1).set_zero(AuxVar::L2);
            let expect = Poly4::from_poly1(model.f(), AuxVar::X).sub(&Poly4::var(AuxVar::Y));
            assert_eq!(ydot0, expect);
        }
    }

    /// Frozen fourth-order expansion of the invariant graph for the double
    /// well, derived by hand from the order-by-order recursion
    /// (h1 = -f'(f+l1), k1 = -f' l1, h2 = 2f'^2 f + f'^2 l1 + f''(f+l1)^2,
    /// k2 = 2f'^2 l1 - f'' f l1 - f'' l1^2, deg-1 part of k3 = -5 l1).
    #[test]
    fn center_manifold_duffing_grade5_reference_coefficients() {
        let model = SlowFastModel::duffing(0.01, 0.05);
        let cm = solve_center_manifold(&model, 5).unwrap();

        // h: x - x^3 - (x + l1 - 4x^3 - 3x^2 l1) e + (2x + l1) e^2 + ...
        for (i, j, k, c) in [
            (1, 0, 0, 1i64),
            (3, 0, 0, -1),
            (1, 0, 1, -1),
            (0, 1, 1, -1),
            (3, 0, 1, 4),
            (2, 1, 1, 3),
            (1, 0, 2, 2),
            (0, 1, 2, 1),
        ] {
            assert_eq!(
                cm.h.coefficient(i, j, k),
                rat_int(c),
                "h x^{i} l1^{j} e^{k}"
            );
        }
        // k: l1 + (-l1 + 3x^2 l1) e + (2 l1 + 6x l1^2) e^2 - 5 l1 e^3 + ...
        for (i, j, k, c) in [
            (0, 1, 0, 1i64),
            (0, 1, 1, -1),
            (2, 1, 1, 3),
            (0, 1, 2, 2),
            (1, 2, 2, 6),
            (0, 1, 3, -5),
        ] {
            assert_eq!(
                cm.k.coefficient(i, j, k),
                rat_int(c),
                "k x^{i} l1^{j} e^{k}"
            );
        }
    }

    #[test]
    fn center_manifold_grade5_full_hand_expansion() {
        // Complete grade-5 content from the hand recursion, including the
        // grade-5 companions the truncation keeps: in h's e^2 block
        // -20x^3 - 18x^2 l1 - 6x l1^2, in h's e^3 block -5x - 2l1, and in
        // k's e^2 block -6x^2 l1.
        let model = SlowFastModel::duffing(0.01, 0.05);
        let cm = solve_center_manifold(&model, 5).unwrap();
        assert_eq!(cm.h.coefficient(3, 0, 2), rat_int(-20));
        assert_eq!(cm.h.coefficient(2, 1, 2), rat_int(-18));
        assert_eq!(cm.h.coefficient(1, 2, 2), rat_int(-6));
        assert_eq!(cm.h.coefficient(1, 0, 3), rat_int(-5));
        assert_eq!(cm.h.coefficient(0, 1, 3), rat_int(-2));
        assert_eq!(cm.k.coefficient(2, 1, 2), rat_int(-6));
        // The x^5 e term of the first-order block (-f'(f+l1) has -3x^5) is
        // grade 6: absent at cap 5, present at cap 6.
        assert!(cm.h.coefficient(5, 0, 1).is_zero());
        let wide = solve_center_manifold(&model, 6).unwrap();
        assert_eq!(wide.h.coefficient(5, 0, 1), rat_int(-3));
    }

    #[test]
    fn center_manifold_epsilon_zero_slice_is_singular_dynamics() {
        for model in [
            SlowFastModel::duffing(0.01, 0.05),
            SlowFastModel::asymmetric(0.01, 0.05),
        ] {
            let cm = solve_center_manifold(&model, 6).unwrap();
            let mut bind = BTreeMap::new();
            bind.insert(Symbol::Eps, TruncatedSeries::zero(6));
            assert_eq!(cm.h.compose(&bind), model.f().as_series(6));
            assert_eq!(cm.k.compose(&bind), TruncatedSeries::symbol(Symbol::L1, 6));
        }
    }

    #[test]
    fn center_manifold_residuals_vanish_exactly() {
        for cap in [3, 4, 5, 8] {
            let model = SlowFastModel::asymmetric(0.01, 0.05);
            let cm = solve_center_manifold(&model, cap).unwrap();
            let (rh, rk) = cm_residuals(&model, &cm);
            assert!(rh.is_zero(), "res_h at cap {cap}: {rh}");
            assert!(rk.is_zero(), "res_k at cap {cap}: {rk}");
        }
    }

    #[test]
    fn grade_solve_is_triangular() {
        // Shared grades of the cap-5 and cap-7 solutions agree coefficient
        // by coefficient: higher grades never feed back into lower ones.
        let model = SlowFastModel::duffing(0.01, 0.05);
        let lo = solve_center_manifold(&model, 5).unwrap();
        let hi = solve_center_manifold(&model, 7).unwrap();
        assert_eq!(hi.h.truncate(5), lo.h);
        assert_eq!(hi.k.truncate(5), lo.k);
    }

    #[test]
    fn solve_rejects_bad_caps() {
        let model = SlowFastModel::duffing(0.01, 0.05);
        assert!(matches!(
            solve_center_manifold(&model, 0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            solve_center_manifold(&model, 2),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn reduced_field_epsilon_zero_is_slow_system() {
        // At e = 0 the planar field is dx/dt = f + l1, dl1/dt = -f' l1.
        let model = SlowFastModel::duffing(0.01, 0.05);
        let cm = solve_center_manifold(&model, 5).unwrap();
        let rf = reduced_field(&cm, &model);
        let mut bind = BTreeMap::new();
        bind.insert(Symbol::Eps, TruncatedSeries::zero(5));
        let xdot0 = rf.xdot.compose(&bind);
        let l1dot0 = rf.l1dot.compose(&bind);
        let expect_x = model
            .f()
            .as_series(5)
            .add(&TruncatedSeries::symbol(Symbol::L1, 5));
        let expect_l = model
            .f_prime()
            .as_series(5)
            .mul(&TruncatedSeries::symbol(Symbol::L1, 5))
            .neg();
        assert_eq!(xdot0, expect_x);
        assert_eq!(l1dot0, expect_l);
    }

    #[test]
    fn reduced_field_equilibria_of_singular_duffing() {
        // The singular planar field vanishes at (+-1, 0), (0, 0) and
        // (+-1/sqrt(3), -+2/(3 sqrt(3))).
        let model = SlowFastModel::duffing(0.01, 0.05);
        let cm = solve_center_manifold(&model, 5).unwrap();
        let rf = reduced_field(&cm, &model);
        let s3 = 3.0_f64.sqrt();
        let points = [
            (-1.0, 0.0),
            (1.0, 0.0),
            (0.0, 0.0),
            (1.0 / s3, -2.0 / (3.0 * s3)),
            (-1.0 / s3, 2.0 / (3.0 * s3)),
        ];
        for (x, l1) in points {
            let dx = rf.xdot.eval_f64(x, l1, 0.0);
            let dl = rf.l1dot.eval_f64(x, l1, 0.0);
            assert!(
                dx.abs() < 1e-14 && dl.abs() < 1e-14,
                "({x}, {l1}) -> ({dx}, {dl})"
            );
        }
    }

    #[test]
    fn layer_field_freezes_epsilon() {
        let model = SlowFastModel::duffing(0.01, 0.05);
        let aux = build_auxiliary_system(&model);
        let s = [0.3, -0.2, 0.1, 0.4, 0.05];
        let d = aux.eval_layer(s);
        assert_eq!(d[4], 0.0);
        // Layer time is slow time scaled by e: x' = e (y + l1).
        assert!((d[0] - 0.05 * (0.1 - 0.2)).abs() < 1e-15);
        // The scaled slow-time field matches: eval_slow * e == layer field
        // for the fast components.
        let slow = aux.eval_slow([0.3, -0.2, 0.1, 0.4], 0.05);
        assert!((d[2] - slow[2] * 0.05).abs() < 1e-15);
        assert!((d[3] - slow[3] * 0.05).abs() < 1e-15);
    }
}
