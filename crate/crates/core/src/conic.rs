//! Solver-neutral conic programs and the backend seam.

use alloc::string::String;
use alloc::vec::Vec;

use crate::expr::Affine;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ConicError {
    #[error("variable index {index} out of range for {num_vars} variables")]
    IndexOutOfRange { index: usize, num_vars: usize },
    #[error("cone {cone:?} expects {expected} rows, got {got}")]
    BadDimension { cone: Cone, expected: usize, got: usize },
}

/// Cone membership of the row vector `(row_0(x), …, row_{m−1}(x))`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cone {
    /// Every row equals zero.
    Zero,
    /// Every row is nonnegative.
    Nonnegative,
    /// `row_0 ≥ ‖(row_1, …)‖₂`.
    SecondOrder,
    /// `row_0 · row_1 ≥ ‖(row_2, …)‖₂²`, `row_0, row_1 ≥ 0`.
    RotatedSecondOrder,
    /// Symmetric `dim × dim` matrix is PSD; rows list the upper triangle
    /// column by column: (0,0), (0,1), (1,1), (0,2), (1,2), (2,2), …
    Psd { dim: usize },
}

impl Cone {
    pub fn triangle_len(dim: usize) -> usize {
        dim * (dim + 1) / 2
    }

    /// Position of entry `(i, j)` in the column-wise upper-triangle layout.
    pub fn triangle_index(i: usize, j: usize) -> usize {
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        c * (c + 1) / 2 + r
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConeConstraint {
    pub cone: Cone,
    pub rows: Vec<Affine>,
}

impl ConeConstraint {
    pub fn zero(row: Affine) -> Self {
        Self { cone: Cone::Zero, rows: alloc::vec![row] }
    }

    pub fn nonneg(row: Affine) -> Self {
        Self { cone: Cone::Nonnegative, rows: alloc::vec![row] }
    }

    pub fn soc(t: Affine, xs: Vec<Affine>) -> Self {
        let mut rows = alloc::vec![t];
        rows.extend(xs);
        Self { cone: Cone::SecondOrder, rows }
    }

    pub fn rsoc(t: Affine, u: Affine, xs: Vec<Affine>) -> Self {
        let mut rows = alloc::vec![t, u];
        rows.extend(xs);
        Self { cone: Cone::RotatedSecondOrder, rows }
    }

    fn validate(&self, num_vars: usize) -> Result<(), ConicError> {
        let got = self.rows.len();
        let expected = match self.cone {
            Cone::Zero | Cone::Nonnegative => got.max(1),
            Cone::SecondOrder => got.max(1),
            Cone::RotatedSecondOrder => got.max(2),
            Cone::Psd { dim } => Cone::triangle_len(dim),
        };
        if got != expected || (matches!(self.cone, Cone::Psd { dim: 0 })) {
            return Err(ConicError::BadDimension { cone: self.cone, expected, got });
        }
        for row in &self.rows {
            if let Some(index) = row.max_index() {
                if index >= num_vars {
                    return Err(ConicError::IndexOutOfRange { index, num_vars });
                }
            }
        }
        Ok(())
    }

    /// Largest violation of cone membership at `x` (0 when inside).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let v: Vec<f64> = self.rows.iter().map(|r| r.eval(x)).collect();
        match self.cone {
            Cone::Zero => v.iter().map(|a| a.abs()).fold(0.0, f64::max),
            Cone::Nonnegative => v.iter().map(|a| (-a).max(0.0)).fold(0.0, f64::max),
            Cone::SecondOrder => {
                let n = crate::math::sqrt(v[1..].iter().map(|a| a * a).sum());
                (n - v[0]).max(0.0)
            }
            Cone::RotatedSecondOrder => {
                let n2: f64 = v[2..].iter().map(|a| a * a).sum();
                let prod = v[0] * v[1];
                (n2 - prod).max(0.0).max(-v[0]).max(-v[1])
            }
            Cone::Psd { dim } => {
                let mut m = alloc::vec![0.0; dim * dim];
                for j in 0..dim {
                    for i in 0..=j {
                        let e = v[Cone::triangle_index(i, j)];
                        m[i * dim + j] = e;
                        m[j * dim + i] = e;
                    }
                }
                let eig = crate::linalg::symmetric_eigenvalues(&m, dim);
                (-eig[dim - 1]).max(0.0)
            }
        }
    }
}

/// Minimize `objective(x)` subject to every cone constraint.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConicProgram {
    pub num_vars: usize,
    pub constraints: Vec<ConeConstraint>,
    pub objective: Affine,
}

/// Building blocks accepted by [`ConicProgram::assemble`].
#[derive(Clone, Debug, PartialEq)]
pub enum Atom {
    Constraint(ConeConstraint),
    /// Added to the objective.
    Cost(Affine),
}

impl ConicProgram {
    /// Collects atoms in insertion order and checks every index.
    pub fn assemble(num_vars: usize, atoms: impl IntoIterator<Item = Atom>) -> Result<Self, ConicError> {
        let mut b = ProgramBuilder::with_vars(num_vars);
        for atom in atoms {
            match atom {
                Atom::Constraint(c) => b.push(c),
                Atom::Cost(e) => b.minimize(e),
            }
        }
        b.build()
    }

    pub fn validate(&self) -> Result<(), ConicError> {
        for c in &self.constraints {
            c.validate(self.num_vars)?;
        }
        if let Some(index) = self.objective.max_index() {
            if index >= self.num_vars {
                return Err(ConicError::IndexOutOfRange { index, num_vars: self.num_vars });
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.eval(x)
    }

    /// Largest cone violation over all constraints.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.constraints.iter().map(|c| c.violation(x)).fold(0.0, f64::max)
    }

    pub fn stats(&self) -> ProgramStats {
        let mut s = ProgramStats { num_vars: self.num_vars, ..ProgramStats::default() };
        for c in &self.constraints {
            match c.cone {
                Cone::Zero => s.zero_rows += c.rows.len(),
                Cone::Nonnegative => s.nonnegative_rows += c.rows.len(),
                Cone::SecondOrder => s.second_order_cones += 1,
                Cone::RotatedSecondOrder => s.rotated_cones += 1,
                Cone::Psd { dim } => s.psd_dims.push(dim),
            }
        }
        s
    }
}

/// Counts by cone type.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ProgramStats {
    pub num_vars: usize,
    pub zero_rows: usize,
    pub nonnegative_rows: usize,
    pub second_order_cones: usize,
    pub rotated_cones: usize,
    pub psd_dims: Vec<usize>,
}

impl ProgramStats {
    /// Scalar equalities and inequalities plus one per conic block.
    pub fn num_constraints(&self) -> usize {
        self.zero_rows + self.nonnegative_rows + self.second_order_cones + self.rotated_cones + self.psd_dims.len()
    }
}

/// Incremental construction of a [`ConicProgram`].
#[derive(Clone, Debug, Default)]
pub struct ProgramBuilder {
    num_vars: usize,
    constraints: Vec<ConeConstraint>,
    objective: Affine,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_vars(num_vars: usize) -> Self {
        Self { num_vars, ..Self::default() }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn add_var(&mut self) -> usize {
        self.num_vars += 1;
        self.num_vars - 1
    }

    /// Appends `n` variables and returns the first index.
    pub fn add_vars(&mut self, n: usize) -> usize {
        let first = self.num_vars;
        self.num_vars += n;
        first
    }

    pub fn push(&mut self, c: ConeConstraint) {
        self.constraints.push(c);
    }

    pub fn zero(&mut self, row: Affine) {
        self.push(ConeConstraint::zero(row));
    }

    pub fn nonneg(&mut self, row: Affine) {
        self.push(ConeConstraint::nonneg(row));
    }

    pub fn soc(&mut self, t: Affine, xs: Vec<Affine>) {
        self.push(ConeConstraint::soc(t, xs));
    }

    pub fn rsoc(&mut self, t: Affine, u: Affine, xs: Vec<Affine>) {
        self.push(ConeConstraint::rsoc(t, u, xs));
    }

    pub fn psd(&mut self, dim: usize, entries: Vec<Affine>) {
        self.push(ConeConstraint { cone: Cone::Psd { dim }, rows: entries });
    }

    pub fn minimize(&mut self, e: Affine) {
        let obj = core::mem::take(&mut self.objective);
        self.objective = obj + e;
    }

    /// Copies `program` with variable `i` renamed to `offset + i`. With
    /// `unit = Some(y)` every constant is multiplied by variable `y`.
    /// The program's objective is returned rather than added.
    pub fn embed(&mut self, program: &ConicProgram, offset: usize, unit: Option<usize>) -> Affine {
        for c in &program.constraints {
            self.push(ConeConstraint {
                cone: c.cone,
                rows: c.rows.iter().map(|r| r.remap(|i| i + offset, unit)).collect(),
            });
        }
        program.objective.remap(|i| i + offset, unit).simplified()
    }

    pub fn build(self) -> Result<ConicProgram, ConicError> {
        let p = ConicProgram { num_vars: self.num_vars, constraints: self.constraints, objective: self.objective };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOutcome {
    pub status: SolveStatus,
    /// Present iff `status == Optimal`.
    pub primal: Option<Vec<f64>>,
    pub objective: Option<f64>,
    /// Dual objective when the solver reports one; by weak duality it is a
    /// lower bound on the optimum up to dual infeasibility.
    pub dual_objective: Option<f64>,
    pub solve_time_s: f64,
    /// Solver converged only to its relaxed tolerances.
    pub reduced_accuracy: bool,
    pub diagnostics: String,
}

impl SolverOutcome {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveSettings {
    pub feasibility_tol: f64,
    pub gap_tol: f64,
    pub max_iter: u32,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self { feasibility_tol: 1e-8, gap_tol: 1e-8, max_iter: 200 }
    }
}

/// A conic optimizer able to handle every cone in [`Cone`].
pub trait ConicSolver: Sync {
    fn solve(&self, program: &ConicProgram, settings: &SolveSettings) -> SolverOutcome;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_program_is_trivial() {
        let p = ConicProgram::assemble(0, []).unwrap();
        assert!(p.constraints.is_empty());
        assert_eq!(p.objective_value(&[]), 0.0);
    }

    #[test]
    fn out_of_range_is_reported() {
        let e = ConicProgram::assemble(2, [Atom::Constraint(ConeConstraint::nonneg(Affine::var(5)))]);
        assert_eq!(e, Err(ConicError::IndexOutOfRange { index: 5, num_vars: 2 }));
        let e = ConicProgram::assemble(1, [Atom::Cost(Affine::var(1))]);
        assert!(e.is_err());
    }

    #[test]
    fn psd_dimension_checked() {
        let c = ConeConstraint { cone: Cone::Psd { dim: 2 }, rows: alloc::vec![Affine::var(0); 2] };
        assert!(matches!(ConicProgram::assemble(1, [Atom::Constraint(c)]), Err(ConicError::BadDimension { .. })));
    }

    #[test]
    fn triangle_layout() {
        assert_eq!(Cone::triangle_index(0, 0), 0);
        assert_eq!(Cone::triangle_index(0, 1), 1);
        assert_eq!(Cone::triangle_index(1, 1), 2);
        assert_eq!(Cone::triangle_index(2, 0), 3);
        assert_eq!(Cone::triangle_len(4), 10);
    }

    #[test]
    fn violation_by_cone() {
        let soc = ConeConstraint::soc(Affine::var(0), alloc::vec![Affine::var(1), Affine::var(2)]);
        assert_eq!(soc.violation(&[5.0, 3.0, 4.0]), 0.0);
        assert!((soc.violation(&[4.0, 3.0, 4.0]) - 1.0).abs() < 1e-12);
        let rsoc = ConeConstraint::rsoc(Affine::var(0), Affine::constant(2.0), alloc::vec![Affine::constant(1.0)]);
        assert_eq!(rsoc.violation(&[0.5]), 0.0);
        let psd = ConeConstraint {
            cone: Cone::Psd { dim: 2 },
            rows: alloc::vec![Affine::constant(1.0), Affine::var(0), Affine::constant(1.0)],
        };
        assert!(psd.violation(&[1.0]) < 1e-12);
        assert!((psd.violation(&[2.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stats_count_by_cone() {
        let mut b = ProgramBuilder::with_vars(3);
        b.zero(Affine::var(0));
        b.nonneg(Affine::var(1));
        b.nonneg(Affine::var(2));
        b.soc(Affine::var(0), alloc::vec![Affine::var(1)]);
        b.psd(2, alloc::vec![Affine::var(0), Affine::var(1), Affine::var(2)]);
        let s = b.build().unwrap().stats();
        assert_eq!((s.zero_rows, s.nonnegative_rows, s.second_order_cones, s.psd_dims.len()), (1, 2, 1, 1));
        assert_eq!(s.num_constraints(), 5);
    }
}
