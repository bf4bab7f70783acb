//! Discretized function classes and their metric entropy.
//!
//! A [`DiscretizedClass`] is a finite family `f_1..f_N` of real functions on
//! a sample space `S` together with an envelope `F ≥ max_j |f_j|`. Covering
//! numbers are taken in the `L²(Q)` seminorm `e_Q` for finitely discrete
//! measures `Q`, at radius `ε‖F‖_{Q,2}`; a function is covered by a center
//! when its distance is strictly less than the radius.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub type Evaluator<S, T> = Arc<dyn Fn(&S) -> T + Send + Sync>;

/// Constants of a VC-type bound `sup_Q N(ε) ≤ (A/ε)^v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VcMeta<T> {
    pub a: T,
    pub v: T,
}

/// Moment scales: `sup_f P|f|^k ≤ σ² b^{k-2}` and `‖F‖_{P,q} ≤ b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentMeta<T> {
    pub b: T,
    pub sigma: T,
    pub q: T,
}

pub struct DiscretizedClass<S, T> {
    evaluators: Vec<Evaluator<S, T>>,
    names: Vec<String>,
    envelope: Evaluator<S, T>,
    centered: bool,
    vc_meta: Option<VcMeta<T>>,
    moment_meta: Option<MomentMeta<T>>,
}

impl<S, T: Clone> Clone for DiscretizedClass<S, T> {
    fn clone(&self) -> Self {
        DiscretizedClass {
            evaluators: self.evaluators.clone(),
            names: self.names.clone(),
            envelope: Arc::clone(&self.envelope),
            centered: self.centered,
            vc_meta: self.vc_meta.clone(),
            moment_meta: self.moment_meta.clone(),
        }
    }
}

impl<S, T: fmt::Debug> fmt::Debug for DiscretizedClass<S, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiscretizedClass")
            .field("len", &self.evaluators.len())
            .field("names", &self.names)
            .field("centered", &self.centered)
            .field("vc_meta", &self.vc_meta)
            .field("moment_meta", &self.moment_meta)
            .finish()
    }
}

impl<S, T: Scalar> DiscretizedClass<S, T> {
    pub fn new(evaluators: Vec<Evaluator<S, T>>, envelope: Evaluator<S, T>) -> Result<Self> {
        if evaluators.is_empty() {
            return Err(Error::Empty("function class"));
        }
        let names = (0..evaluators.len()).map(|j| format!("f{}", j + 1)).collect();
        Ok(DiscretizedClass {
            evaluators,
            names,
            envelope,
            centered: false,
            vc_meta: None,
            moment_meta: None,
        })
    }

    /// Convenience constructor from plain closures.
    pub fn from_fns<F, E>(fns: Vec<F>, envelope: E) -> Result<Self>
    where
        F: Fn(&S) -> T + Send + Sync + 'static,
        E: Fn(&S) -> T + Send + Sync + 'static,
    {
        let evaluators = fns
            .into_iter()
            .map(|f| Arc::new(f) as Evaluator<S, T>)
            .collect();
        Self::new(evaluators, Arc::new(envelope))
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.evaluators.len() {
            return Err(Error::invalid(
                "names",
                format!("{} names for {} functions", names.len(), self.evaluators.len()),
            ));
        }
        self.names = names;
        Ok(self)
    }

    pub fn centered(mut self, centered: bool) -> Self {
        self.centered = centered;
        self
    }

    pub fn with_vc(mut self, a: T, v: T) -> Result<Self> {
        if !(a >= T::E()) {
            return Err(Error::invalid("A", "VC constant A must be ≥ e"));
        }
        if !(v >= T::one()) {
            return Err(Error::invalid("v", "VC exponent v must be ≥ 1"));
        }
        self.vc_meta = Some(VcMeta { a, v });
        Ok(self)
    }

    pub fn with_moments(mut self, b: T, sigma: T, q: T) -> Result<Self> {
        if !(q >= T::lit(4.0)) {
            return Err(Error::invalid("q", "moment order q must lie in [4, ∞]"));
        }
        if !(sigma > T::zero() && sigma <= b) {
            return Err(Error::invalid("sigma", "need 0 < σ ≤ b"));
        }
        self.moment_meta = Some(MomentMeta { b, sigma, q });
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.evaluators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.evaluators.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn vc_meta(&self) -> Option<VcMeta<T>> {
        self.vc_meta
    }

    pub fn moment_meta(&self) -> Option<MomentMeta<T>> {
        self.moment_meta
    }

    pub fn evaluators(&self) -> &[Evaluator<S, T>] {
        &self.evaluators
    }

    #[inline]
    pub fn eval(&self, j: usize, x: &S) -> T {
        (self.evaluators[j])(x)
    }

    #[inline]
    pub fn envelope(&self, x: &S) -> T {
        (self.envelope)(x)
    }

    pub fn eval_into(&self, x: &S, out: &mut [T]) {
        for (o, f) in out.iter_mut().zip(&self.evaluators) {
            *o = f(x);
        }
    }

    /// First point (index, excess) where `max_j |f_j(x)| > F(x)`, if any.
    pub fn envelope_violation(&self, points: &[S]) -> Option<(usize, T)> {
        points.iter().enumerate().find_map(|(i, x)| {
            let env = self.envelope(x);
            let m = self
                .evaluators
                .iter()
                .map(|f| f(x).abs())
                .fold(T::zero(), T::max);
            (m > env).then(|| (i, m - env))
        })
    }
}

impl<S: 'static, T: Scalar> DiscretizedClass<S, T> {
    /// The family `{x ↦ c·f(x)}` with envelope `|c|·F`.
    pub fn scaled(&self, c: T) -> Self {
        let evaluators = self
            .evaluators
            .iter()
            .map(|f| {
                let f = Arc::clone(f);
                Arc::new(move |x: &S| c * f(x)) as Evaluator<S, T>
            })
            .collect();
        let env = Arc::clone(&self.envelope);
        DiscretizedClass {
            evaluators,
            names: self.names.clone(),
            envelope: Arc::new(move |x: &S| c.abs() * env(x)),
            centered: self.centered,
            vc_meta: self.vc_meta,
            moment_meta: None,
        }
    }
}

/// A finitely discrete probability measure.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure<S, T> {
    atoms: Vec<S>,
    weights: Vec<T>,
    id: String,
}

impl<S, T: Scalar> DiscreteMeasure<S, T> {
    pub fn new(atoms: Vec<S>, weights: Vec<T>, id: impl Into<String>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        if atoms.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > T::zero())) {
            return Err(Error::InvalidMeasure(format!("non-positive weight {w}")));
        }
        let total = weights.iter().fold(T::zero(), |a, &w| a + w);
        let tol = T::loose_eps() * T::from_usize_lossy(weights.len()).sqrt();
        if (total - T::one()).abs() > tol {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to {total}, not 1"
            )));
        }
        Ok(DiscreteMeasure {
            atoms,
            weights,
            id: id.into(),
        })
    }

    pub fn uniform(atoms: Vec<S>, id: impl Into<String>) -> Result<Self> {
        let m = atoms.len();
        if m == 0 {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        let w = T::one() / T::from_usize_lossy(m);
        Self::new(atoms, vec![w; m], id)
    }

    /// The measure with weights proportional to `w_i · density(x_i)`;
    /// atoms where the density vanishes are dropped.
    pub fn reweighted(&self, density: impl Fn(&S) -> T, id: impl Into<String>) -> Result<Self>
    where
        S: Clone,
    {
        let mut atoms = Vec::new();
        let mut weights = Vec::new();
        for (x, &w) in self.atoms.iter().zip(&self.weights) {
            let d = density(x);
            if d > T::zero() {
                atoms.push(x.clone());
                weights.push(w * d);
            }
        }
        let total = weights.iter().fold(T::zero(), |a, &w| a + w);
        if !(total > T::zero()) {
            return Err(Error::InvalidMeasure("reweighting density vanishes".into()));
        }
        for w in &mut weights {
            *w = *w / total;
        }
        Self::new(atoms, weights, id)
    }

    pub fn atoms(&self) -> &[S] {
        &self.atoms
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

/// Pairwise `e_Q` distances of a class and its envelope norm under `Q`.
#[derive(Debug, Clone)]
pub struct ClassGeometry<T> {
    size: usize,
    dist: Vec<T>,
    envelope_norm: T,
}

impl<T: Scalar> ClassGeometry<T> {
    pub fn new<S>(class: &DiscretizedClass<S, T>, measure: &DiscreteMeasure<S, T>) -> Result<Self> {
        let n = class.len();
        let m = measure.len();
        let mut values = vec![T::zero(); n * m];
        let mut env_sq = T::zero();
        for (i, (x, &w)) in measure.atoms.iter().zip(&measure.weights).enumerate() {
            let e = class.envelope(x);
            env_sq = env_sq + w * e * e;
            for j in 0..n {
                values[j * m + i] = class.eval(j, x);
            }
        }
        let envelope_norm = env_sq.sqrt();
        if !(envelope_norm > T::zero()) {
            return Err(Error::DegenerateEnvelope);
        }
        let mut dist = vec![T::zero(); n * n];
        for j in 0..n {
            for k in (j + 1)..n {
                let mut acc = T::zero();
                for i in 0..m {
                    let d = values[j * m + i] - values[k * m + i];
                    acc = acc + measure.weights[i] * d * d;
                }
                let d = acc.sqrt();
                dist[j * n + k] = d;
                dist[k * n + j] = d;
            }
        }
        Ok(ClassGeometry {
            size: n,
            dist,
            envelope_norm,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn envelope_norm(&self) -> T {
        self.envelope_norm
    }

    #[inline]
    pub fn distance(&self, j: usize, k: usize) -> T {
        self.dist[j * self.size + k]
    }

    /// Farthest-point traversal starting from function 0 (ties to the lowest
    /// index). Entry `k` is the covering radius of the first `k+1` centers;
    /// the sequence is non-increasing and ends at the radius of a full net.
    pub fn farthest_point_radii(&self) -> Vec<T> {
        let n = self.size;
        let mut mind: Vec<T> = (0..n).map(|j| self.distance(0, j)).collect();
        let mut radii = Vec::with_capacity(n);
        loop {
            let (far, r) = mind
                .iter()
                .enumerate()
                .fold((0, T::zero()), |(bj, br), (j, &d)| if d > br { (j, d) } else { (bj, br) });
            radii.push(r);
            if r == T::zero() {
                break;
            }
            for (j, m) in mind.iter_mut().enumerate() {
                let d = self.distance(far, j);
                if d < *m {
                    *m = d;
                }
            }
        }
        radii
    }

    /// Greedy net size at absolute radius `r` from precomputed traversal radii.
    fn greedy_count(radii: &[T], r: T) -> usize {
        radii.iter().position(|&rk| rk < r).map_or(radii.len(), |k| k + 1)
    }

    /// Size of a minimal net with centers drawn from the class, by subset
    /// enumeration. Exponential; refuses classes above 20 functions.
    pub fn minimal_net_size(&self, r: T) -> Result<usize> {
        let n = self.size;
        if n > 20 {
            return Err(Error::invalid("class", "exhaustive search limited to N ≤ 20"));
        }
        let full: u32 = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
        let cover: Vec<u32> = (0..n)
            .map(|c| {
                (0..n)
                    .filter(|&j| self.distance(c, j) < r)
                    .fold(0u32, |m, j| m | (1 << j))
            })
            .collect();
        for k in 1..=n {
            // Gosper's hack over k-subsets.
            let mut s: u32 = (1u32 << k) - 1;
            while s <= full {
                let mut covered = 0u32;
                let mut bits = s;
                while bits != 0 {
                    let c = bits.trailing_zeros() as usize;
                    covered |= cover[c];
                    bits &= bits - 1;
                }
                if covered == full {
                    return Ok(k);
                }
                let c = s & s.wrapping_neg();
                let rr = s + c;
                if rr == 0 {
                    break;
                }
                s = (((rr ^ s) >> 2) / c) | rr;
            }
        }
        Ok(n)
    }
}

fn check_epsilon<T: Scalar>(eps: T) -> Result<()> {
    if eps > T::zero() && eps <= T::one() {
        Ok(())
    } else {
        Err(Error::invalid("epsilon", format!("ε = {eps} outside (0, 1]")))
    }
}

/// Size of a greedy farthest-point `ε‖F‖_{Q,2}`-net of the class under `e_Q`.
///
/// The greedy count lies between the minimal covering number at `ε` and the
/// minimal covering number at `ε/2`.
pub fn covering_number<S, T: Scalar>(
    class: &DiscretizedClass<S, T>,
    measure: &DiscreteMeasure<S, T>,
    epsilon: T,
) -> Result<usize> {
    check_epsilon(epsilon)?;
    let geom = ClassGeometry::new(class, measure)?;
    let radii = geom.farthest_point_radii();
    Ok(ClassGeometry::greedy_count(&radii, epsilon * geom.envelope_norm))
}

/// Exhaustive minimal covering number (centers from the class), N ≤ 20.
pub fn minimal_covering_number<S, T: Scalar>(
    class: &DiscretizedClass<S, T>,
    measure: &DiscreteMeasure<S, T>,
    epsilon: T,
) -> Result<usize> {
    check_epsilon(epsilon)?;
    let geom = ClassGeometry::new(class, measure)?;
    geom.minimal_net_size(epsilon * geom.envelope_norm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringReport<T> {
    pub epsilons: Vec<T>,
    pub counts: Vec<usize>,
    pub measure_id: String,
}

pub fn covering_report<S, T: Scalar>(
    class: &DiscretizedClass<S, T>,
    measure: &DiscreteMeasure<S, T>,
    epsilons: &[T],
) -> Result<CoveringReport<T>> {
    for &e in epsilons {
        check_epsilon(e)?;
    }
    let geom = ClassGeometry::new(class, measure)?;
    let radii = geom.farthest_point_radii();
    let counts = epsilons
        .iter()
        .map(|&e| ClassGeometry::greedy_count(&radii, e * geom.envelope_norm))
        .collect();
    Ok(CoveringReport {
        epsilons: epsilons.to_vec(),
        counts,
        measure_id: measure.id.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropySource {
    Empirical,
    VcClosedForm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyProfile<T> {
    pub delta_grid: Vec<T>,
    pub j_values: Vec<T>,
    pub source: EntropySource,
}

impl<T: Scalar> EntropyProfile<T> {
    /// Shape checks: `J` non-decreasing, `J(δ)/δ` non-increasing and
    /// `J(cδ) ≤ c·J(δ)` for every grid pair with `cδ` on the grid.
    pub fn shape_violations(&self, tol: T) -> Vec<String> {
        let mut out = Vec::new();
        let d = &self.delta_grid;
        let j = &self.j_values;
        for i in 1..d.len() {
            if d[i] > d[i - 1] {
                if j[i] + tol < j[i - 1] {
                    out.push(format!("J decreases between δ={} and δ={}", d[i - 1], d[i]));
                }
                if j[i] / d[i] > j[i - 1] / d[i - 1] + tol {
                    out.push(format!("J/δ increases between δ={} and δ={}", d[i - 1], d[i]));
                }
            }
        }
        for a in 0..d.len() {
            for b in 0..d.len() {
                if d[b] >= d[a] {
                    let c = d[b] / d[a];
                    if j[b] > c * j[a] + tol {
                        out.push(format!("J({}) > {}·J({})", d[b], c, d[a]));
                    }
                }
            }
        }
        out
    }
}

/// Normalised traversal radii `r_k / ‖F‖_{Q,2}` for each measure.
fn normalised_radii<S, T: Scalar>(
    class: &DiscretizedClass<S, T>,
    measures: &[DiscreteMeasure<S, T>],
) -> Result<Vec<Vec<T>>> {
    if measures.is_empty() {
        return Err(Error::Empty("measure list"));
    }
    measures
        .iter()
        .map(|q| {
            let geom = ClassGeometry::new(class, q)?;
            let norm = geom.envelope_norm;
            Ok(geom.farthest_point_radii().into_iter().map(|r| r / norm).collect())
        })
        .collect()
}

fn integrate_entropy<T: Scalar>(radii: &[Vec<T>], delta: T) -> T {
    // max_Q N_Q(ε) is a right-open step function of ε with jumps at the
    // normalised radii; integrate it exactly on (0, δ].
    let mut breaks: Vec<T> = radii
        .iter()
        .flatten()
        .copied()
        .filter(|&r| r > T::zero() && r < delta)
        .collect();
    breaks.push(T::zero());
    breaks.push(delta);
    breaks.sort_by(|a, b| a.partial_cmp(b).expect("finite radii"));
    breaks.dedup();
    let count_at = |eps: T| -> usize {
        radii
            .iter()
            .map(|r| ClassGeometry::greedy_count(r, eps))
            .max()
            .unwrap_or(1)
    };
    let mut total = T::zero();
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let mid = (lo + hi) / T::lit(2.0);
        let n = T::from_usize_lossy(count_at(mid));
        total = total + (hi - lo) * (T::one() + n.ln()).sqrt();
    }
    total
}

/// `∫_0^δ max_Q sqrt(1 + log N(ε)) dε` over the supplied measures.
///
/// The supremum over all finitely discrete measures is replaced by a maximum
/// over `measures`, so the result is a lower proxy for the uniform entropy
/// integral; [`vc_entropy_bound`] gives a certified upper envelope for
/// VC-type classes.
pub fn entropy_integral<S, T: Scalar>(
    class: &DiscretizedClass<S, T>,
    delta: T,
    measures: &[DiscreteMeasure<S, T>],
) -> Result<T> {
    if !(delta > T::zero() && delta <= T::one()) {
        return Err(Error::invalid("delta", format!("δ = {delta} outside (0, 1]")));
    }
    let radii = normalised_radii(class, measures)?;
    Ok(integrate_entropy(&radii, delta))
}

pub fn entropy_profile<S, T: Scalar>(
    class: &DiscretizedClass<S, T>,
    deltas: &[T],
    measures: &[DiscreteMeasure<S, T>],
) -> Result<EntropyProfile<T>> {
    let radii = normalised_radii(class, measures)?;
    let mut j_values = Vec::with_capacity(deltas.len());
    for &d in deltas {
        if !(d > T::zero() && d <= T::one()) {
            return Err(Error::invalid("delta", format!("δ = {d} outside (0, 1]")));
        }
        j_values.push(integrate_entropy(&radii, d));
    }
    Ok(EntropyProfile {
        delta_grid: deltas.to_vec(),
        j_values,
        source: EntropySource::Empirical,
    })
}

/// Closed-form majorant `2·sqrt(2v)·δ·sqrt(log(A/δ))` of `J(δ)` for a VC-type
/// class with constants `A ≥ e`, `v ≥ 1`.
pub fn vc_entropy_bound<T: Scalar>(a: T, v: T, delta: T) -> Result<T> {
    if !(a >= T::E()) {
        return Err(Error::invalid("A", format!("A = {a} < e")));
    }
    if !(v >= T::one()) {
        return Err(Error::invalid("v", format!("v = {v} < 1")));
    }
    if !(delta > T::zero() && delta <= T::one()) {
        return Err(Error::invalid("delta", format!("δ = {delta} outside (0, 1]")));
    }
    let two = T::lit(2.0);
    Ok(two * (two * v).sqrt() * delta * (a / delta).ln().sqrt())
}

pub fn vc_entropy_profile<T: Scalar>(a: T, v: T, deltas: &[T]) -> Result<EntropyProfile<T>> {
    let j_values = deltas
        .iter()
        .map(|&d| vc_entropy_bound(a, v, d))
        .collect::<Result<_>>()?;
    Ok(EntropyProfile {
        delta_grid: deltas.to_vec(),
        j_values,
        source: EntropySource::VcClosedForm,
    })
}

/// Pointwise product class `{f·g}` with envelope `F·G`, ordered left-major.
pub fn product_class<S: 'static, T: Scalar>(
    left: &DiscretizedClass<S, T>,
    right: &DiscretizedClass<S, T>,
) -> DiscretizedClass<S, T> {
    let mut evaluators = Vec::with_capacity(left.len() * right.len());
    let mut names = Vec::with_capacity(left.len() * right.len());
    for (f, fname) in left.evaluators.iter().zip(&left.names) {
        for (g, gname) in right.evaluators.iter().zip(&right.names) {
            let (f, g) = (Arc::clone(f), Arc::clone(g));
            evaluators.push(Arc::new(move |x: &S| f(x) * g(x)) as Evaluator<S, T>);
            names.push(format!("{fname}*{gname}"));
        }
    }
    let (fe, ge) = (Arc::clone(&left.envelope), Arc::clone(&right.envelope));
    DiscretizedClass {
        evaluators,
        names,
        envelope: Arc::new(move |x: &S| fe(x) * ge(x)),
        centered: false,
        vc_meta: None,
        moment_meta: None,
    }
}

/// A class read from the comma-separated matrix format, defined on atom
/// indices, with the uniform measure over its rows.
#[derive(Debug, Clone)]
pub struct MatrixClass<T> {
    pub class: DiscretizedClass<usize, T>,
    pub measure: DiscreteMeasure<usize, T>,
    pub envelope_name: String,
}

/// Builds a class over atom indices `0..m` from tabulated values
/// (`columns[j][i] = f_j(atom i)`) and envelope values.
pub fn tabulated_class<T: Scalar>(
    columns: Vec<Vec<T>>,
    envelope: Vec<T>,
) -> Result<DiscretizedClass<usize, T>> {
    let m = envelope.len();
    if let Some(c) = columns.iter().find(|c| c.len() != m) {
        return Err(Error::DomainMismatch(format!(
            "column of length {} against {} envelope values",
            c.len(),
            m
        )));
    }
    let evaluators = columns
        .into_iter()
        .map(|col| Arc::new(move |i: &usize| col[*i]) as Evaluator<usize, T>)
        .collect();
    DiscretizedClass::new(evaluators, Arc::new(move |i: &usize| envelope[*i]))
}

/// Parses the matrix text format: a header row with column names, then one
/// row per sample atom holding the function values followed by the envelope
/// value in the last column.
pub fn parse_matrix<T: Scalar + std::str::FromStr>(text: &str) -> Result<MatrixClass<T>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "missing header row".into(),
    })?;
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    if names.len() < 2 {
        return Err(Error::Parse {
            line: hline,
            message: "need at least one function column and an envelope column".into(),
        });
    }
    let k = names.len() - 1;
    let mut columns: Vec<Vec<T>> = vec![Vec::new(); k];
    let mut envelope = Vec::new();
    for (line, row) in lines {
        let fields: Vec<&str> = row.split(',').map(str::trim).collect();
        if fields.len() != names.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", names.len(), fields.len()),
            });
        }
        let mut vals = Vec::with_capacity(fields.len());
        for f in &fields {
            let v: T = f.parse().map_err(|_| Error::Parse {
                line,
                message: format!("not a number: {f:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("non-finite value {f:?}"),
                });
            }
            vals.push(v);
        }
        let env = vals[k];
        if let Some(j) = (0..k).find(|&j| vals[j].abs() > env) {
            return Err(Error::Parse {
                line,
                message: format!("envelope {} is below |{}| = {}", env, names[j], vals[j].abs()),
            });
        }
        for j in 0..k {
            columns[j].push(vals[j]);
        }
        envelope.push(env);
    }
    if envelope.is_empty() {
        return Err(Error::Parse {
            line: hline,
            message: "no data rows".into(),
        });
    }
    let m = envelope.len();
    let envelope_name = names[k].clone();
    let class = tabulated_class(columns, envelope)?.with_names(names[..k].to_vec())?;
    let measure = DiscreteMeasure::uniform((0..m).collect(), "matrix-rows")?;
    Ok(MatrixClass {
        class,
        measure,
        envelope_name,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn constant_envelope(n: usize, values: Vec<Vec<f64>>, env: f64) -> DiscretizedClass<usize, f64> {
        let m = values[0].len();
        assert_eq!(values.len(), n);
        tabulated_class(values, vec![env; m]).unwrap()
    }

    #[test]
    fn singleton_class_covers_itself() {
        let c = constant_envelope(1, vec![vec![0.3, -0.2, 0.9]], 1.0);
        let q = DiscreteMeasure::uniform(vec![0, 1, 2], "u3").unwrap();
        for eps in [1e-3, 0.1, 0.5, 1.0] {
            assert_eq!(covering_number(&c, &q, eps).unwrap(), 1);
        }
    }

    #[test]
    fn two_point_metric_space() {
        // e_Q(f1, f2) = 1 and ‖F‖ = 1
        let c = constant_envelope(2, vec![vec![0.0, 0.0], vec![1.0, 1.0]], 1.0);
        let q = DiscreteMeasure::uniform(vec![0, 1], "u2").unwrap();
        assert_eq!(covering_number(&c, &q, 0.5).unwrap(), 2);
        assert_eq!(covering_number(&c, &q, 1.0 - 1e-12).unwrap(), 2);
        // strict inequality: distance 1 is not < radius 1
        assert_eq!(covering_number(&c, &q, 1.0).unwrap(), 2);
    }

    #[test]
    fn identical_functions_give_one() {
        let c = constant_envelope(3, vec![vec![0.5, 0.1]; 3], 1.0);
        let q = DiscreteMeasure::uniform(vec![0, 1], "u2").unwrap();
        assert_eq!(covering_number(&c, &q, 1e-6).unwrap(), 1);
        assert_eq!(minimal_covering_number(&c, &q, 1e-6).unwrap(), 1);
    }

    #[test]
    fn cube_vertices_match_exhaustive_search() {
        // 8 functions whose values on a 3-atom measure are the vertices of a cube.
        let cols: Vec<Vec<f64>> = (0..8)
            .map(|v| (0..3).map(|b| if v >> b & 1 == 1 { 1.0 } else { -1.0 }).collect())
            .collect();
        let c = constant_envelope(8, cols, 1.0);
        let q = DiscreteMeasure::uniform(vec![0, 1, 2], "u3").unwrap();
        for k in 1..=40 {
            let eps = k as f64 / 40.0;
            let g = covering_number(&c, &q, eps).unwrap();
            let m = minimal_covering_number(&c, &q, eps).unwrap();
            assert_eq!(g, m, "ε = {eps}");
        }
    }

    #[test]
    fn zero_envelope_is_rejected() {
        let c = constant_envelope(1, vec![vec![0.0, 0.0]], 0.0);
        let q = DiscreteMeasure::uniform(vec![0, 1], "u2").unwrap();
        assert_eq!(covering_number(&c, &q, 0.5), Err(Error::DegenerateEnvelope));
    }

    #[test]
    fn non_probability_weights_are_rejected() {
        assert!(matches!(
            DiscreteMeasure::<usize, f64>::new(vec![0, 1], vec![0.5, 0.6], "bad"),
            Err(Error::InvalidMeasure(_))
        ));
        assert!(matches!(
            DiscreteMeasure::<usize, f64>::new(vec![0, 1], vec![1.5, -0.5], "neg"),
            Err(Error::InvalidMeasure(_))
        ));
    }

    #[test]
    fn epsilon_outside_unit_interval_is_rejected() {
        let c = constant_envelope(1, vec![vec![1.0]], 1.0);
        let q = DiscreteMeasure::uniform(vec![0], "u1").unwrap();
        assert!(covering_number(&c, &q, 0.0).is_err());
        assert!(covering_number(&c, &q, 1.5).is_err());
    }

    #[test]
    fn entropy_integral_of_singleton_is_delta() {
        let c = constant_envelope(1, vec![vec![0.2, 0.7]], 1.0);
        let q = DiscreteMeasure::uniform(vec![0, 1], "u2").unwrap();
        for d in [0.01, 0.3, 1.0] {
            let j = entropy_integral(&c, d, std::slice::from_ref(&q)).unwrap();
            assert!((j - d).abs() < 1e-15, "{j} vs {d}");
        }
    }

    #[test]
    fn entropy_integral_two_point_hand_quadrature() {
        // N(ε) = 2 on all of (0, 1], so J(1) = sqrt(1 + log 2).
        let c = constant_envelope(2, vec![vec![0.0, 0.0], vec![1.0, 1.0]], 1.0);
        let q = DiscreteMeasure::uniform(vec![0, 1], "u2").unwrap();
        let j = entropy_integral(&c, 1.0, std::slice::from_ref(&q)).unwrap();
        assert!((j - (1.0 + 2f64.ln()).sqrt()).abs() < 1e-14);
        // With distance 1/2: N = 2 on (0, 1/2], 1 on (1/2, 1].
        let c = constant_envelope(2, vec![vec![0.0, 0.0], vec![0.5, 0.5]], 1.0);
        let j = entropy_integral(&c, 1.0, std::slice::from_ref(&q)).unwrap();
        let hand = 0.5 * (1.0 + 2f64.ln()).sqrt() + 0.5;
        assert!((j - hand).abs() < 1e-14);
    }

    #[test]
    fn entropy_integral_needs_a_measure() {
        let c = constant_envelope(1, vec![vec![1.0]], 1.0);
        assert_eq!(
            entropy_integral::<usize, f64>(&c, 0.5, &[]),
            Err(Error::Empty("measure list"))
        );
    }

    #[test]
    fn vc_bound_closed_form_values() {
        let e = std::f64::consts::E;
        assert!((vc_entropy_bound(e, 1.0, 1.0).unwrap() - 2.0 * 2f64.sqrt()).abs() < 1e-14);
        assert!((vc_entropy_bound(e * e, 4.0, 1.0).unwrap() - 8.0).abs() < 1e-13);
        let a = vc_entropy_bound(5.0, 2.0, 0.5).unwrap();
        let b = vc_entropy_bound(5.0, 2.0, 0.25).unwrap();
        assert!(b <= a);
        assert!(vc_entropy_bound(2.0, 1.0, 0.5).is_err());
        assert!(vc_entropy_bound(3.0, 0.5, 0.5).is_err());
    }

    #[test]
    fn product_with_singletons_and_unit() {
        let f = constant_envelope(1, vec![vec![0.5, -1.0]], 2.0);
        let g = constant_envelope(1, vec![vec![3.0, 0.25]], 4.0);
        let fg = product_class(&f, &g);
        assert_eq!(fg.len(), 1);
        assert_eq!(fg.eval(0, &0), 1.5);
        assert_eq!(fg.eval(0, &1), -0.25);
        assert_eq!(fg.envelope(&1), 8.0);

        let one = constant_envelope(1, vec![vec![1.0, 1.0]], 1.0);
        let c = constant_envelope(2, vec![vec![0.1, 0.2], vec![-0.3, 0.4]], 0.5);
        let p = product_class(&c, &one);
        assert_eq!(p.len(), 2);
        for j in 0..2 {
            for x in 0..2 {
                assert_eq!(p.eval(j, &x), c.eval(j, &x));
                assert_eq!(p.envelope(&x), c.envelope(&x));
            }
        }
    }

    #[test]
    fn parse_matrix_roundtrip_and_errors() {
        let text = "f1,f2,F\n0.1,-0.2,0.5\n0.3,0.4,0.5\n";
        let mc = parse_matrix::<f64>(text).unwrap();
        assert_eq!(mc.class.len(), 2);
        assert_eq!(mc.class.names(), &["f1".to_string(), "f2".to_string()]);
        assert_eq!(mc.envelope_name, "F");
        assert_eq!(mc.class.eval(1, &1), 0.4);
        assert_eq!(mc.measure.len(), 2);

        let bad = "f1,F\n0.1,0.5\n0.9,0.5\n";
        match parse_matrix::<f64>(bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let ragged = "f1,F\n0.1\n";
        assert!(matches!(parse_matrix::<f64>(ragged), Err(Error::Parse { line: 2, .. })));
        let nan = "f1,F\nabc,1\n";
        assert!(matches!(parse_matrix::<f64>(nan), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn envelope_violation_detected() {
        let c = DiscretizedClass::<f64, f64>::from_fns(vec![|x: &f64| *x], |_: &f64| 1.0).unwrap();
        assert_eq!(c.envelope_violation(&[0.5, -0.9]), None);
        assert_eq!(c.envelope_violation(&[0.5, 1.5]).map(|v| v.0), Some(1));
    }

    #[test]
    fn works_in_single_precision() {
        let c = tabulated_class::<f32>(vec![vec![0.0, 0.0], vec![1.0, 1.0]], vec![1.0, 1.0]).unwrap();
        let q = DiscreteMeasure::<usize, f32>::uniform(vec![0, 1], "u2").unwrap();
        assert_eq!(covering_number(&c, &q, 0.5f32).unwrap(), 2);
        let j = entropy_integral(&c, 1.0f32, std::slice::from_ref(&q)).unwrap();
        assert!((j - (1.0f32 + 2f32.ln()).sqrt()).abs() < 1e-6);
    }

    fn random_class(rng: &mut ChaCha8Rng, n: usize, m: usize) -> (DiscretizedClass<usize, f64>, DiscreteMeasure<usize, f64>) {
        let cols: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let env: Vec<f64> = (0..m)
            .map(|i| cols.iter().map(|c| c[i].abs()).fold(0.0, f64::max) + rng.random_range(0.0..0.2))
            .collect();
        let mut w: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= s);
        (
            tabulated_class(cols, env).unwrap(),
            DiscreteMeasure::new((0..m).collect(), w, "random").unwrap(),
        )
    }

    proptest! {
        #[test]
        fn covering_is_monotone_in_epsilon(seed in any::<u64>(), n in 1usize..12, m in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (c, q) = random_class(&mut rng, n, m);
            let eps: Vec<f64> = (1..=50).map(|k| k as f64 / 50.0).collect();
            let rep = covering_report(&c, &q, &eps).unwrap();
            for w in rep.counts.windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
            prop_assert!(rep.counts.iter().all(|&k| k >= 1 && k <= n));
        }

        #[test]
        fn greedy_sandwiched_by_exhaustive(seed in any::<u64>(), n in 1usize..10, m in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (c, q) = random_class(&mut rng, n, m);
            for k in 1..=20 {
                let eps = k as f64 / 20.0;
                let g = covering_number(&c, &q, eps).unwrap();
                let lo = minimal_covering_number(&c, &q, eps).unwrap();
                let hi = minimal_covering_number(&c, &q, eps / 2.0).unwrap();
                prop_assert!(lo <= g && g <= hi, "ε={} lo={} g={} hi={}", eps, lo, g, hi);
            }
        }

        #[test]
        fn entropy_profile_shape(seed in any::<u64>(), n in 1usize..12, m in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (c, q) = random_class(&mut rng, n, m);
            let q2 = q.reweighted(|&i| 1.0 + i as f64, "tilted").unwrap();
            let grid: Vec<f64> = (0..=6).map(|k| 2f64.powi(-k)).rev().collect();
            let prof = entropy_profile(&c, &grid, &[q, q2]).unwrap();
            let v = prof.shape_violations(1e-12);
            prop_assert!(v.is_empty(), "{:?}", v);
        }
    }
}
