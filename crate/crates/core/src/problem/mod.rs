//! Finite-dimensional constrained problems and the singular/smooth variable
//! split.
//!
//! A [`NlpProblem`] is a minimization problem over `n` real variables with
//! inequality constraints (`c(x) <= 0`), equality constraints (`e(x) = 0`)
//! and optional box bounds. Constraints are stored in blocks so structured
//! problems (e.g. one integration-defect block per time step) can expose a
//! sparse weighted-gradient routine instead of dense per-component gradients.
//!
//! A [`Partition`] splits the variables into `p` singular variables `y` (the
//! ones allowed to affect discontinuities) and `q = n - p` smooth variables
//! `z`. [`restrict`] fixes `y` and yields the smooth subproblem in `z`; the
//! two-phase evaluation of that subproblem lives in [`two_phase`].

mod classify;
mod two_phase;

pub use classify::{classify, FeasibilityClass, FeasibilityTag, Sampler};
pub use two_phase::{
    evaluate_two_phase, solve_feasibility, solve_objective, BlackboxResult, TwoPhaseEvaluator,
    TwoPhaseSettings, CACHE_QUANTUM,
};

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Writes the gradient of a scalar function into its second argument.
pub type GradientFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// Writes the values of a constraint block into its second argument.
pub type BlockValuesFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// Accumulates `sum_i w[i] * grad c_i(x)` into its third argument.
pub type BlockWeightedGradFn = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;

/// Relative step for central finite differences: `h = FD_STEP * max(1, |x_i|)`.
pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    /// Component-wise `c(x) <= 0`.
    Inequality,
    /// Component-wise `e(x) = 0`.
    Equality,
}

/// A group of scalar constraints of one kind sharing an evaluation routine.
#[derive(Clone)]
pub struct ConstraintBlock {
    pub kind: ConstraintKind,
    pub dim: usize,
    pub label: String,
    values: BlockValuesFn,
    weighted_gradient: Option<BlockWeightedGradFn>,
}

impl ConstraintBlock {
    pub fn new(
        kind: ConstraintKind,
        dim: usize,
        label: impl Into<String>,
        values: BlockValuesFn,
    ) -> Self {
        Self {
            kind,
            dim,
            label: label.into(),
            values,
            weighted_gradient: None,
        }
    }

    /// Attaches an analytic weighted-gradient routine.
    pub fn with_weighted_gradient(mut self, grad: BlockWeightedGradFn) -> Self {
        self.weighted_gradient = Some(grad);
        self
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        (self.values)(x, out);
    }

    /// Accumulates the weighted gradient `sum_i w[i] grad c_i(x)` into `grad`.
    ///
    /// Falls back to central finite differences of the weighted sum when no
    /// analytic routine is attached.
    pub fn weighted_gradient_accumulate(&self, x: &[f64], weights: &[f64], grad: &mut [f64]) {
        debug_assert_eq!(weights.len(), self.dim);
        if let Some(g) = &self.weighted_gradient {
            g(x, weights, grad);
            return;
        }
        let mut xs = x.to_vec();
        let mut vals = vec![0.0; self.dim];
        for i in 0..x.len() {
            let h = FD_STEP * x[i].abs().max(1.0);
            let orig = xs[i];
            xs[i] = orig + h;
            (self.values)(&xs, &mut vals);
            let fp: f64 = vals.iter().zip(weights).map(|(v, w)| v * w).sum();
            xs[i] = orig - h;
            (self.values)(&xs, &mut vals);
            let fm: f64 = vals.iter().zip(weights).map(|(v, w)| v * w).sum();
            xs[i] = orig;
            grad[i] += (fp - fm) / (2.0 * h);
        }
    }
}

impl fmt::Debug for ConstraintBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConstraintBlock")
            .field("kind", &self.kind)
            .field("dim", &self.dim)
            .field("label", &self.label)
            .field("analytic_gradient", &self.weighted_gradient.is_some())
            .finish()
    }
}

/// Per-variable bounds; infinite endpoints mean unbounded.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Bound {
    pub lo: f64,
    pub hi: f64,
}

impl Bound {
    pub const FREE: Bound = Bound {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "empty bound interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }
}

/// A finite-dimensional constrained minimization problem.
#[derive(Clone)]
pub struct NlpProblem {
    n: usize,
    objective: ScalarFn,
    objective_gradient: Option<GradientFn>,
    blocks: Vec<ConstraintBlock>,
    bounds: Option<Vec<Bound>>,
}

impl NlpProblem {
    /// A problem over `n >= 1` variables with the given objective.
    pub fn new(n: usize, objective: ScalarFn) -> Self {
        assert!(n >= 1, "problem dimension must be at least 1");
        Self {
            n,
            objective,
            objective_gradient: None,
            blocks: Vec::new(),
            bounds: None,
        }
    }

    pub fn with_gradient(mut self, gradient: GradientFn) -> Self {
        self.objective_gradient = Some(gradient);
        self
    }

    /// Adds a single scalar inequality constraint `f(x) <= 0`.
    pub fn with_inequality(self, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        let label = format!("ineq{}", self.blocks.len());
        self.with_block(ConstraintBlock::new(
            ConstraintKind::Inequality,
            1,
            label,
            Arc::new(move |x, out| out[0] = f(x)),
        ))
    }

    /// Adds a single scalar equality constraint `f(x) = 0`.
    pub fn with_equality(self, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        let label = format!("eq{}", self.blocks.len());
        self.with_block(ConstraintBlock::new(
            ConstraintKind::Equality,
            1,
            label,
            Arc::new(move |x, out| out[0] = f(x)),
        ))
    }

    pub fn with_block(mut self, block: ConstraintBlock) -> Self {
        self.blocks.push(block);
        self
    }

    pub fn with_bounds(mut self, bounds: Vec<Bound>) -> Self {
        assert_eq!(bounds.len(), self.n, "one bound per variable");
        self.bounds = Some(bounds);
        self
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn bounds(&self) -> Option<&[Bound]> {
        self.bounds.as_deref()
    }

    pub fn blocks(&self) -> &[ConstraintBlock] {
        &self.blocks
    }

    pub fn constraint_count(&self) -> usize {
        self.blocks.iter().map(|b| b.dim).sum()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.n);
        (self.objective)(x)
    }

    pub fn objective_fn(&self) -> ScalarFn {
        Arc::clone(&self.objective)
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.objective_gradient.is_some()
    }

    /// Writes the objective gradient into `out`, analytically when available,
    /// otherwise by central finite differences.
    pub fn objective_gradient_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(out.len(), self.n);
        if let Some(g) = &self.objective_gradient {
            g(x, out);
            return;
        }
        let mut xs = x.to_vec();
        for i in 0..self.n {
            let h = FD_STEP * x[i].abs().max(1.0);
            let orig = xs[i];
            xs[i] = orig + h;
            let fp = (self.objective)(&xs);
            xs[i] = orig - h;
            let fm = (self.objective)(&xs);
            xs[i] = orig;
            out[i] = (fp - fm) / (2.0 * h);
        }
    }

    /// Evaluates every constraint block, returning per-block value vectors.
    pub fn constraint_values(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.blocks
            .iter()
            .map(|b| {
                let mut vals = vec![0.0; b.dim];
                b.eval_into(x, &mut vals);
                vals
            })
            .collect()
    }

    /// Constraint violation: sum of squared positive parts of inequalities
    /// plus squared equality residuals. Zero exactly when `x` is feasible.
    ///
    /// Equality terms extend the inequality-only measure so that a problem
    /// with equality constraints keeps the zero-iff-feasible property while
    /// staying smooth.
    pub fn violation(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                context: "violation",
                expected: self.n,
                actual: x.len(),
            });
        }
        let mut total = 0.0;
        let mut vals = Vec::new();
        for block in &self.blocks {
            vals.resize(block.dim, 0.0);
            block.eval_into(x, &mut vals);
            for (i, &v) in vals.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFiniteConstraint {
                        label: block.label.clone(),
                        index: i,
                    });
                }
                match block.kind {
                    ConstraintKind::Inequality => {
                        let pos = v.max(0.0);
                        total += pos * pos;
                    }
                    ConstraintKind::Equality => total += v * v,
                }
            }
        }
        Ok(total)
    }

    /// Like [`NlpProblem::violation`] but mapping non-finite values to
    /// infinity instead of an error; used inside solver loops where a
    /// non-finite trial point is simply rejected.
    pub fn violation_value(&self, x: &[f64]) -> f64 {
        let mut total = 0.0;
        let mut vals = Vec::new();
        for block in &self.blocks {
            vals.resize(block.dim, 0.0);
            block.eval_into(x, &mut vals);
            for &v in vals.iter() {
                if !v.is_finite() {
                    return f64::INFINITY;
                }
                match block.kind {
                    ConstraintKind::Inequality => {
                        let pos = v.max(0.0);
                        total += pos * pos;
                    }
                    ConstraintKind::Equality => total += v * v,
                }
            }
        }
        total
    }

    /// Gradient of the violation function, accumulated block by block.
    pub fn violation_gradient_into(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let mut vals = Vec::new();
        let mut weights = Vec::new();
        for block in &self.blocks {
            vals.resize(block.dim, 0.0);
            weights.resize(block.dim, 0.0);
            block.eval_into(x, &mut vals);
            for (w, &v) in weights.iter_mut().zip(vals.iter()) {
                *w = match block.kind {
                    ConstraintKind::Inequality => 2.0 * v.max(0.0),
                    ConstraintKind::Equality => 2.0 * v,
                };
            }
            if weights.iter().any(|&w| w != 0.0) {
                block.weighted_gradient_accumulate(x, &weights, out);
            }
        }
    }
}

impl fmt::Debug for NlpProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NlpProblem")
            .field("n", &self.n)
            .field("blocks", &self.blocks)
            .field("bounded", &self.bounds.is_some())
            .finish()
    }
}

/// Standalone form of [`NlpProblem::violation`].
pub fn violation(problem: &NlpProblem, x: &[f64]) -> Result<f64> {
    problem.violation(x)
}

/// The singular / smooth variable split.
///
/// `singular_indices` lists the `p` variables exposed to the derivative-free
/// layer; the remaining `q = n - p` variables belong to the smooth
/// subproblem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    n: usize,
    singular: Vec<usize>,
    smooth: Vec<usize>,
}

impl Partition {
    /// Builds a partition of `n` variables with the given singular indices.
    ///
    /// Indices must be strictly increasing and within `0..n`.
    pub fn new(n: usize, singular_indices: Vec<usize>) -> Result<Self> {
        for pair in singular_indices.windows(2) {
            if pair[0] >= pair[1] {
                return Err(Error::InvalidPartition(format!(
                    "singular indices must be strictly increasing, got {:?}",
                    singular_indices
                )));
            }
        }
        if let Some(&last) = singular_indices.last() {
            if last >= n {
                return Err(Error::InvalidPartition(format!(
                    "singular index {last} out of range for dimension {n}"
                )));
            }
        }
        let mut is_singular = vec![false; n];
        for &i in &singular_indices {
            is_singular[i] = true;
        }
        let smooth = (0..n).filter(|&i| !is_singular[i]).collect();
        Ok(Self {
            n,
            singular: singular_indices,
            smooth,
        })
    }

    /// All variables smooth (`p = 0`).
    pub fn empty(n: usize) -> Self {
        Self::new(n, Vec::new()).expect("empty partition is always valid")
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    /// Number of singular variables.
    pub fn p(&self) -> usize {
        self.singular.len()
    }

    /// Number of smooth variables.
    pub fn q(&self) -> usize {
        self.n - self.singular.len()
    }

    pub fn singular_indices(&self) -> &[usize] {
        &self.singular
    }

    pub fn smooth_indices(&self) -> &[usize] {
        &self.smooth
    }

    /// Merges a singular vector `y` and a smooth vector `z` back into a full
    /// `n`-vector.
    pub fn assemble(&self, y: &[f64], z: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.p());
        debug_assert_eq!(z.len(), self.q());
        let mut x = vec![0.0; self.n];
        self.assemble_into(y, z, &mut x);
        x
    }

    pub fn assemble_into(&self, y: &[f64], z: &[f64], x: &mut [f64]) {
        for (&i, &v) in self.singular.iter().zip(y) {
            x[i] = v;
        }
        for (&i, &v) in self.smooth.iter().zip(z) {
            x[i] = v;
        }
    }

    /// Splits a full vector into its `(y, z)` parts.
    pub fn split(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        debug_assert_eq!(x.len(), self.n);
        let y = self.singular.iter().map(|&i| x[i]).collect();
        let z = self.smooth.iter().map(|&i| x[i]).collect();
        (y, z)
    }
}

/// Fixes the singular variables at `y` and returns the `q`-dimensional
/// subproblem over the smooth variables.
///
/// Objective, constraints, gradients and bounds are all restricted
/// consistently. With an empty partition the restriction is the problem
/// itself.
pub fn restrict(problem: &NlpProblem, partition: &Partition, y: &[f64]) -> Result<NlpProblem> {
    if partition.dimension() != problem.dimension() {
        return Err(Error::DimensionMismatch {
            context: "restrict partition",
            expected: problem.dimension(),
            actual: partition.dimension(),
        });
    }
    if y.len() != partition.p() {
        return Err(Error::DimensionMismatch {
            context: "restrict singular point",
            expected: partition.p(),
            actual: y.len(),
        });
    }
    if partition.p() == 0 {
        return Ok(problem.clone());
    }

    let n = problem.dimension();
    let part = partition.clone();
    let y_fixed: Vec<f64> = y.to_vec();

    let embed = {
        let part = part.clone();
        let y_fixed = y_fixed.clone();
        move |z: &[f64]| -> Vec<f64> {
            let mut x = vec![0.0; n];
            part.assemble_into(&y_fixed, z, &mut x);
            x
        }
    };

    // p = n would leave nothing to optimize smoothly
    assert!(
        partition.q() >= 1,
        "restriction needs at least one smooth variable"
    );
    let objective = problem.objective_fn();
    let embed_obj = embed.clone();
    let mut restricted = NlpProblem::new(
        partition.q(),
        Arc::new(move |z: &[f64]| objective(&embed_obj(z))),
    );

    if let Some(g) = &problem.objective_gradient {
        let g = Arc::clone(g);
        let part_g = part.clone();
        let embed_g = embed.clone();
        restricted = restricted.with_gradient(Arc::new(move |z: &[f64], out: &mut [f64]| {
            let x = embed_g(z);
            let mut full = vec![0.0; x.len()];
            g(&x, &mut full);
            for (o, &i) in out.iter_mut().zip(part_g.smooth_indices()) {
                *o = full[i];
            }
        }));
    }

    for block in problem.blocks() {
        let values = Arc::clone(&block.values);
        let embed_v = embed.clone();
        let mut new_block = ConstraintBlock::new(
            block.kind,
            block.dim,
            block.label.clone(),
            Arc::new(move |z: &[f64], out: &mut [f64]| values(&embed_v(z), out)),
        );
        if let Some(wg) = &block.weighted_gradient {
            let wg = Arc::clone(wg);
            let part_b = part.clone();
            let embed_b = embed.clone();
            new_block = new_block.with_weighted_gradient(Arc::new(
                move |z: &[f64], w: &[f64], grad: &mut [f64]| {
                    let x = embed_b(z);
                    let mut full = vec![0.0; x.len()];
                    wg(&x, w, &mut full);
                    for (g, &i) in grad.iter_mut().zip(part_b.smooth_indices()) {
                        *g += full[i];
                    }
                },
            ));
        }
        restricted = restricted.with_block(new_block);
    }

    if let Some(bounds) = problem.bounds() {
        let restricted_bounds = partition
            .smooth_indices()
            .iter()
            .map(|&i| bounds[i])
            .collect();
        restricted = restricted.with_bounds(restricted_bounds);
    }

    Ok(restricted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn single_ineq(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> NlpProblem {
        NlpProblem::new(1, Arc::new(|_| 0.0)).with_inequality(f)
    }

    #[test]
    fn violation_of_feasible_point_is_zero() {
        let p = single_ineq(|x| x[0]);
        assert_eq!(p.violation(&[-1.0]).unwrap(), 0.0);
    }

    #[test]
    fn violation_squares_positive_part() {
        let p = single_ineq(|x| x[0]);
        assert_eq!(p.violation(&[2.0]).unwrap(), 4.0);
    }

    #[test]
    fn violation_of_two_sided_linear_constraints() {
        // c(y, z) = (1 - y - z, 1 - y + z) at the origin: both components
        // equal 1, each contributing 1 after squaring
        let p = NlpProblem::new(2, Arc::new(|x: &[f64]| x[0].abs() + x[1] * x[1]))
            .with_inequality(|x| 1.0 - x[0] - x[1])
            .with_inequality(|x| 1.0 - x[0] + x[1]);
        assert_relative_eq!(p.violation(&[0.0, 0.0]).unwrap(), 2.0);
    }

    #[test]
    fn violation_includes_equality_terms() {
        let p = NlpProblem::new(1, Arc::new(|_| 0.0)).with_equality(|x| x[0] - 3.0);
        assert_eq!(p.violation(&[1.0]).unwrap(), 4.0);
        assert_eq!(p.violation(&[3.0]).unwrap(), 0.0);
    }

    #[test]
    fn violation_reports_offending_constraint() {
        let p = NlpProblem::new(1, Arc::new(|_| 0.0))
            .with_inequality(|x| x[0])
            .with_inequality(|x| (x[0] - 1.0).ln());
        let err = p.violation(&[0.5]).unwrap_err();
        match err {
            Error::NonFiniteConstraint { label, index } => {
                assert_eq!(label, "ineq1");
                assert_eq!(index, 0);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn violation_dimension_check() {
        let p = single_ineq(|x| x[0]);
        assert!(p.violation(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn partition_roundtrip() {
        let part = Partition::new(4, vec![1, 3]).unwrap();
        assert_eq!(part.p(), 2);
        assert_eq!(part.q(), 2);
        let x = [10.0, 20.0, 30.0, 40.0];
        let (y, z) = part.split(&x);
        assert_eq!(y, vec![20.0, 40.0]);
        assert_eq!(z, vec![10.0, 30.0]);
        assert_eq!(part.assemble(&y, &z), x.to_vec());
    }

    #[test]
    fn partition_rejects_bad_indices() {
        assert!(Partition::new(3, vec![1, 1]).is_err());
        assert!(Partition::new(3, vec![2, 1]).is_err());
        assert!(Partition::new(3, vec![3]).is_err());
    }

    #[test]
    fn restrict_fixes_singular_variables() {
        // objective |y| e^z restricted at y = 0 vanishes identically
        let p = NlpProblem::new(2, Arc::new(|x: &[f64]| x[0].abs() * x[1].exp()));
        let part = Partition::new(2, vec![0]).unwrap();
        let r = restrict(&p, &part, &[0.0]).unwrap();
        assert_eq!(r.dimension(), 1);
        for z in [-2.0, 0.0, 3.5] {
            assert_eq!(r.objective(&[z]), 0.0);
        }
    }

    #[test]
    fn restrict_mixed_objective() {
        // |y| e^z + |y - 1| z^2 at y = 1 reduces to e^z
        let p = NlpProblem::new(
            2,
            Arc::new(|x: &[f64]| x[0].abs() * x[1].exp() + (x[0] - 1.0).abs() * x[1] * x[1]),
        );
        let part = Partition::new(2, vec![0]).unwrap();
        let r = restrict(&p, &part, &[1.0]).unwrap();
        for z in [-1.0, 0.0, 2.0] {
            assert_relative_eq!(r.objective(&[z]), z.exp());
        }
    }

    #[test]
    fn restrict_empty_partition_is_identity() {
        let p = NlpProblem::new(2, Arc::new(|x: &[f64]| x[0] + x[1]))
            .with_inequality(|x| x[0] * x[0] + x[1] * x[1] - 2.0);
        let part = Partition::empty(2);
        let r = restrict(&p, &part, &[]).unwrap();
        assert_eq!(r.dimension(), 2);
        let x = [0.3, -0.7];
        assert_eq!(r.objective(&x), p.objective(&x));
        assert_eq!(r.violation(&x).unwrap(), p.violation(&x).unwrap());
    }

    #[test]
    fn restricted_constraints_and_bounds() {
        let p = NlpProblem::new(2, Arc::new(|x: &[f64]| x[0].abs() + x[1] * x[1]))
            .with_inequality(|x| 1.0 - x[0] - x[1])
            .with_inequality(|x| 1.0 - x[0] + x[1])
            .with_bounds(vec![Bound::new(-5.0, 5.0), Bound::new(-1.0, 1.0)]);
        let part = Partition::new(2, vec![0]).unwrap();
        let r = restrict(&p, &part, &[0.0]).unwrap();
        // at y = 0 the violation in z is (1 - z)^2_+ + (1 + z)^2_+
        assert_relative_eq!(r.violation(&[0.0]).unwrap(), 2.0);
        assert_eq!(r.bounds().unwrap()[0], Bound::new(-1.0, 1.0));
    }

    #[test]
    fn grid_minimizer_splits_consistently() {
        // on a brute-force grid, the full minimizer's singular part attains
        // the reduced minimum and its smooth part attains the subproblem
        // minimum at that singular point
        let p = NlpProblem::new(2, Arc::new(|x: &[f64]| {
            (x[0] - 0.4).powi(2) * (1.0 + x[1] * x[1]) + 0.3 * (x[1] + 0.8).powi(2)
        }))
        .with_inequality(|x| -1.5 - x[1]);
        let coords: Vec<f64> = (0..60).map(|i| -1.5 + 3.0 * i as f64 / 59.0).collect();
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for &y in &coords {
            for &z in &coords {
                if p.violation(&[y, z]).unwrap() == 0.0 {
                    let f = p.objective(&[y, z]);
                    if f < best.0 {
                        best = (f, y, z);
                    }
                }
            }
        }
        let (f_star, y_star, z_star) = best;
        // reduced value at y*: the subproblem grid minimum
        let sub_min = coords
            .iter()
            .filter(|&&z| p.violation(&[y_star, z]).unwrap() == 0.0)
            .map(|&z| p.objective(&[y_star, z]))
            .fold(f64::INFINITY, f64::min);
        assert_eq!(sub_min.to_bits(), f_star.to_bits());
        assert_eq!(p.objective(&[y_star, z_star]).to_bits(), f_star.to_bits());
        // and y* attains the reduced minimum over the whole grid
        let reduced_min = coords
            .iter()
            .map(|&y| {
                coords
                    .iter()
                    .filter(|&&z| p.violation(&[y, z]).unwrap() == 0.0)
                    .map(|&z| p.objective(&[y, z]))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min);
        assert_eq!(reduced_min.to_bits(), f_star.to_bits());
    }

    #[test]
    fn analytic_gradients_match_finite_differences_at_random_points() {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        let problems: Vec<NlpProblem> = vec![
            NlpProblem::new(3, Arc::new(|x: &[f64]| {
                (x[0] * x[1]).sin() + x[2] * x[2] * x[0] + (0.3 * x[2]).exp()
            }))
            .with_gradient(Arc::new(|x, g| {
                g[0] = x[1] * (x[0] * x[1]).cos() + x[2] * x[2];
                g[1] = x[0] * (x[0] * x[1]).cos();
                g[2] = 2.0 * x[2] * x[0] + 0.3 * (0.3 * x[2]).exp();
            })),
            NlpProblem::new(2, Arc::new(|x: &[f64]| {
                (x[0] - 1.0).powi(4) + x[0] * x[1] + 0.5 * x[1] * x[1]
            }))
            .with_gradient(Arc::new(|x, g| {
                g[0] = 4.0 * (x[0] - 1.0).powi(3) + x[1];
                g[1] = x[0] + x[1];
            })),
        ];
        for p in &problems {
            let n = p.dimension();
            let mut analytic = vec![0.0; n];
            for _ in 0..100 {
                let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
                p.objective_gradient_into(&x, &mut analytic);
                for i in 0..n {
                    let h = 1e-6 * x[i].abs().max(1.0);
                    let mut xp = x.clone();
                    xp[i] += h;
                    let mut xm = x.clone();
                    xm[i] -= h;
                    let fd = (p.objective(&xp) - p.objective(&xm)) / (2.0 * h);
                    let scale = analytic[i].abs().max(1.0);
                    assert!(
                        (analytic[i] - fd).abs() / scale <= 1e-5,
                        "slot {i} at {x:?}: {} vs {fd}",
                        analytic[i]
                    );
                }
            }
        }
    }

    #[test]
    fn finite_difference_gradient_matches_analytic() {
        let quad = |x: &[f64]| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2) + x[0] * x[1];
        let p_fd = NlpProblem::new(2, Arc::new(quad));
        let p_an = NlpProblem::new(2, Arc::new(quad)).with_gradient(Arc::new(|x, g| {
            g[0] = 2.0 * (x[0] - 1.0) + x[1];
            g[1] = 6.0 * (x[1] + 2.0) + x[0];
        }));
        let mut g_fd = [0.0; 2];
        let mut g_an = [0.0; 2];
        for x in [[0.0, 0.0], [1.5, -2.5], [-3.0, 7.0]] {
            p_fd.objective_gradient_into(&x, &mut g_fd);
            p_an.objective_gradient_into(&x, &mut g_an);
            for i in 0..2 {
                let scale = g_an[i].abs().max(1.0);
                assert!((g_fd[i] - g_an[i]).abs() / scale < 1e-5);
            }
        }
    }

    #[test]
    fn weighted_gradient_fd_matches_analytic() {
        let block_analytic = ConstraintBlock::new(
            ConstraintKind::Inequality,
            2,
            "pair",
            Arc::new(|x: &[f64], out: &mut [f64]| {
                out[0] = x[0] * x[0] - x[1];
                out[1] = x[0] + 2.0 * x[1];
            }),
        )
        .with_weighted_gradient(Arc::new(|x: &[f64], w: &[f64], g: &mut [f64]| {
            g[0] += w[0] * 2.0 * x[0] + w[1];
            g[1] += -w[0] + w[1] * 2.0;
        }));
        let block_fd = ConstraintBlock::new(
            ConstraintKind::Inequality,
            2,
            "pair",
            Arc::new(|x: &[f64], out: &mut [f64]| {
                out[0] = x[0] * x[0] - x[1];
                out[1] = x[0] + 2.0 * x[1];
            }),
        );
        let x = [1.3, -0.4];
        let w = [0.7, -1.1];
        let mut g1 = vec![0.0; 2];
        let mut g2 = vec![0.0; 2];
        block_analytic.weighted_gradient_accumulate(&x, &w, &mut g1);
        block_fd.weighted_gradient_accumulate(&x, &w, &mut g2);
        for i in 0..2 {
            assert!((g1[i] - g2[i]).abs() < 1e-6, "{g1:?} vs {g2:?}");
        }
    }

    #[test]
    fn violation_gradient_matches_finite_differences() {
        let p = NlpProblem::new(2, Arc::new(|_| 0.0))
            .with_inequality(|x| 1.0 - x[0] - x[1])
            .with_inequality(|x| 1.0 - x[0] + x[1])
            .with_equality(|x| x[0] * x[1] - 0.5);
        let x = [0.2, 0.4];
        let mut g = vec![0.0; 2];
        p.violation_gradient_into(&x, &mut g);
        for i in 0..2 {
            let h = 1e-6;
            let mut xp = x;
            xp[i] += h;
            let mut xm = x;
            xm[i] -= h;
            let fd = (p.violation(&xp).unwrap() - p.violation(&xm).unwrap()) / (2.0 * h);
            assert!((g[i] - fd).abs() < 1e-5, "component {i}: {} vs {fd}", g[i]);
        }
    }
}
