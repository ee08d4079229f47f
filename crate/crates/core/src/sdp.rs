//! Homogeneous QCQPs over overlapping variable groups and their block Shor
//! relaxation with RLT products.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::conic::{Cone, ConeConstraint, ConicProgram};
use crate::expr::{Affine, QuadForm, Relation};
use crate::linalg::symmetric_eigenvalues;
use crate::math::{self, Vec2};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum RelaxationError {
    #[error("quadratic constraint {0} is not contained in any variable group")]
    UnsupportedConstraint(usize),
    #[error("variable {0} is not covered by any group")]
    UncoveredVariable(usize),
    #[error("variable index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("relaxation solution is missing or incomplete")]
    NotSolved,
}

/// `min objective(y)` s.t. `quadratic_i(y) (rel) 0`, `affine_j(y) (rel) 0`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct QcqpProblem {
    pub num_vars: usize,
    pub objective: QuadForm,
    pub quadratic: Vec<(QuadForm, Relation)>,
    pub affine: Vec<(Affine, Relation)>,
    /// Ordered variable groups; each becomes one moment block.
    pub groups: Vec<Vec<usize>>,
}

impl QcqpProblem {
    pub fn validate(&self) -> Result<(), RelaxationError> {
        let mut covered = alloc::vec![false; self.num_vars];
        for g in &self.groups {
            for &v in g {
                if v >= self.num_vars {
                    return Err(RelaxationError::IndexOutOfRange(v));
                }
                covered[v] = true;
            }
        }
        if let Some(v) = covered.iter().position(|c| !c) {
            return Err(RelaxationError::UncoveredVariable(v));
        }
        for (k, (q, _)) in self.quadratic.iter().enumerate() {
            if q.max_index().is_some_and(|i| i >= self.num_vars) {
                return Err(RelaxationError::IndexOutOfRange(q.max_index().unwrap_or(0)));
            }
            if self.containing_group(&q.support()).is_none() {
                return Err(RelaxationError::UnsupportedConstraint(k));
            }
        }
        for (a, _) in &self.affine {
            if let Some(i) = a.max_index().filter(|&i| i >= self.num_vars) {
                return Err(RelaxationError::IndexOutOfRange(i));
            }
        }
        Ok(())
    }

    pub fn containing_group(&self, support: &[usize]) -> Option<usize> {
        self.groups.iter().position(|g| support.iter().all(|v| g.contains(v)))
    }

    /// Largest constraint violation at `y`.
    pub fn max_violation(&self, y: &[f64]) -> f64 {
        let q = self.quadratic.iter().map(|(f, r)| r.violation(f.eval(y)));
        let a = self.affine.iter().map(|(f, r)| r.violation(f.eval(y)));
        q.chain(a).fold(0.0, f64::max)
    }
}

/// One PSD moment block `X_g = [[1, yᵀ], [y, Y]]` over a variable group.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentBlock {
    /// QCQP variables in block order (block index `k + 1` holds `vars[k]`).
    pub vars: Vec<usize>,
    /// Program variable of each upper-triangle entry, column-wise.
    pub entries: Vec<usize>,
}

impl MomentBlock {
    pub fn dim(&self) -> usize {
        self.vars.len() + 1
    }

    /// Program variable holding `X[a][b]`, with index 0 the homogenizing slot.
    pub fn entry(&self, a: usize, b: usize) -> usize {
        self.entries[Cone::triangle_index(a, b)]
    }

    fn local(&self, var: usize) -> Option<usize> {
        self.vars.iter().position(|&v| v == var).map(|k| k + 1)
    }
}

/// Block Shor relaxation as a conic program over the moment entries.
#[derive(Clone, Debug, PartialEq)]
pub struct SemidefiniteRelaxation {
    pub num_qcqp_vars: usize,
    pub program: ConicProgram,
    pub blocks: Vec<MomentBlock>,
    /// Program variable of the canonical entry for homogeneous pair `(a, b)`,
    /// `a ≤ b`, where 0 is the unit slot and `i + 1` is QCQP variable `i`.
    canonical: BTreeMap<(usize, usize), usize>,
    group_rows: Vec<Vec<(Affine, Relation)>>,
}

impl SemidefiniteRelaxation {
    /// Program variable of the first moment of QCQP variable `i`.
    pub fn first_moment(&self, i: usize) -> usize {
        self.canonical[&(0, i + 1)]
    }

    /// Program variable of the second moment `y_i y_j`, if some block holds it.
    pub fn second_moment(&self, i: usize, j: usize) -> Option<usize> {
        self.canonical.get(&(i.min(j) + 1, i.max(j) + 1)).copied()
    }

    /// Unit entry of the first block.
    pub fn unit_entry(&self) -> usize {
        self.blocks[0].entry(0, 0)
    }

    /// Substitutes first moments into an affine form of QCQP variables.
    pub fn lift_affine(&self, a: &Affine) -> Affine {
        Affine::from_terms(a.terms.iter().map(|&(i, c)| (self.first_moment(i), c)).collect(), a.constant)
    }

    /// Lifts a quadratic form with canonical entries; the constant is kept as
    /// a constant. Returns `None` if some monomial has no block.
    pub fn lift_quadratic(&self, q: &QuadForm) -> Option<Affine> {
        let mut terms: Vec<(usize, f64)> = q.linear.iter().map(|&(i, c)| (self.first_moment(i), c)).collect();
        for &(i, j, c) in &q.quadratic {
            terms.push((self.second_moment(i, j)?, c));
        }
        Some(Affine::from_terms(terms, q.constant))
    }

    fn lift_in_block(&self, q: &QuadForm, b: usize) -> Affine {
        let blk = &self.blocks[b];
        let loc = |v: usize| blk.local(v).expect("support inside block");
        let mut terms = Vec::with_capacity(q.linear.len() + q.quadratic.len() + 1);
        if q.constant != 0.0 {
            terms.push((blk.entry(0, 0), q.constant));
        }
        for &(i, c) in &q.linear {
            terms.push((blk.entry(0, loc(i)), c));
        }
        for &(i, j, c) in &q.quadratic {
            terms.push((blk.entry(loc(i), loc(j)), c));
        }
        Affine::from_terms(terms, 0.0)
    }

    fn blocks_containing(&self, support: &[usize]) -> Vec<usize> {
        (0..self.blocks.len())
            .filter(|&b| support.iter().all(|v| self.blocks[b].vars.contains(v)))
            .collect()
    }

    fn push_row(&mut self, row: Affine, rel: Relation) {
        let c = match rel {
            Relation::Eq => ConeConstraint::zero(row),
            Relation::Ge => ConeConstraint::nonneg(row),
        };
        self.program.constraints.push(c);
    }

    /// Adds a quadratic constraint lifted into the first block containing it.
    pub fn add_quadratic(&mut self, q: &QuadForm, rel: Relation) -> Result<(), RelaxationError> {
        let support = q.support();
        let b = *self.blocks_containing(&support).first().ok_or(RelaxationError::UnsupportedConstraint(0))?;
        let row = self.lift_in_block(q, b);
        self.push_row(row, rel);
        Ok(())
    }

    /// Adds an affine constraint: its first-moment form, plus RLT products
    /// with every earlier row in each block that contains its support.
    pub fn add_affine(&mut self, a: &Affine, rel: Relation) {
        let first = self.lift_affine(a);
        self.push_row(first, rel);
        let support = a.support();
        for b in self.blocks_containing(&support) {
            match rel {
                Relation::Eq => {
                    for k in 0..self.blocks[b].vars.len() {
                        let v = self.blocks[b].vars[k];
                        let row = self.lift_in_block(&a.product(&Affine::var(v)), b);
                        self.push_row(row, Relation::Eq);
                    }
                }
                Relation::Ge => {
                    let earlier: Vec<Affine> = self.group_rows[b]
                        .iter()
                        .filter(|(_, r)| *r == Relation::Ge)
                        .map(|(e, _)| e.clone())
                        .collect();
                    for e in earlier {
                        let row = self.lift_in_block(&a.product(&e), b);
                        self.push_row(row, Relation::Ge);
                    }
                }
            }
            self.group_rows[b].push((a.clone(), rel));
        }
    }

    /// Sets every block to the rank-one lift of `y`.
    pub fn lift_point(&self, y: &[f64]) -> Vec<f64> {
        let mut x = alloc::vec![0.0; self.program.num_vars];
        for blk in &self.blocks {
            let val = |a: usize| if a == 0 { 1.0 } else { y[blk.vars[a - 1]] };
            for j in 0..blk.dim() {
                for i in 0..=j {
                    x[blk.entry(i, j)] = val(i) * val(j);
                }
            }
        }
        x
    }

    /// Symmetric dense copy of block `b` from a solution vector.
    pub fn block_matrix(&self, b: usize, x: &[f64]) -> Vec<f64> {
        let blk = &self.blocks[b];
        let d = blk.dim();
        let mut m = alloc::vec![0.0; d * d];
        for j in 0..d {
            for i in 0..=j {
                let v = x[blk.entry(i, j)];
                m[i * d + j] = v;
                m[j * d + i] = v;
            }
        }
        m
    }
}

/// Lifts a QCQP into one PSD block per group.
pub fn relax(qcqp: &QcqpProblem) -> Result<SemidefiniteRelaxation, RelaxationError> {
    qcqp.validate()?;
    let mut num = 0usize;
    let mut blocks = Vec::with_capacity(qcqp.groups.len());
    for g in &qcqp.groups {
        let dim = g.len() + 1;
        let len = Cone::triangle_len(dim);
        blocks.push(MomentBlock { vars: g.clone(), entries: (num..num + len).collect() });
        num += len;
    }
    let mut canonical = BTreeMap::new();
    for blk in &blocks {
        let hom = |a: usize| if a == 0 { 0 } else { blk.vars[a - 1] + 1 };
        for j in 0..blk.dim() {
            for i in 0..=j {
                let (a, b) = (hom(i).min(hom(j)), hom(i).max(hom(j)));
                canonical.entry((a, b)).or_insert(blk.entry(i, j));
            }
        }
    }
    let mut rel = SemidefiniteRelaxation {
        num_qcqp_vars: qcqp.num_vars,
        program: ConicProgram { num_vars: num, constraints: Vec::new(), objective: Affine::zero() },
        blocks,
        canonical,
        group_rows: alloc::vec![Vec::new(); qcqp.groups.len()],
    };
    for b in 0..rel.blocks.len() {
        let blk = &rel.blocks[b];
        let entries: Vec<Affine> = blk.entries.iter().map(|&e| Affine::var(e)).collect();
        let dim = blk.dim();
        let unit = Affine::var(blk.entry(0, 0)).plus_constant(-1.0);
        rel.program.constraints.push(ConeConstraint::zero(unit));
        rel.program.constraints.push(ConeConstraint { cone: Cone::Psd { dim }, rows: entries });
    }
    // Overlap consistency: every non-canonical copy equals its canonical entry.
    for b in 0..rel.blocks.len() {
        let blk = rel.blocks[b].clone();
        let hom = |a: usize| if a == 0 { 0 } else { blk.vars[a - 1] + 1 };
        for j in 1..blk.dim() {
            for i in 0..=j {
                let key = (hom(i).min(hom(j)), hom(i).max(hom(j)));
                let canon = rel.canonical[&key];
                let own = blk.entry(i, j);
                if canon != own {
                    rel.push_row(Affine::from_terms(alloc::vec![(own, 1.0), (canon, -1.0)], 0.0), Relation::Eq);
                }
            }
        }
    }
    for (k, (q, r)) in qcqp.quadratic.iter().enumerate() {
        rel.add_quadratic(q, *r).map_err(|_| RelaxationError::UnsupportedConstraint(k))?;
    }
    for (a, r) in &qcqp.affine {
        rel.add_affine(a, *r);
    }
    rel.program.objective = rel.lift_quadratic(&qcqp.objective).ok_or(RelaxationError::UnsupportedConstraint(usize::MAX))?;
    Ok(rel)
}

/// Unit direction `a` and offset `b` of the cut `a · r ≥ b` keeping `r` on
/// the short arc between `r_s` and `r_t`; `None` when they are antipodal.
pub fn geodesic_cut(r_s: Vec2, r_t: Vec2) -> Option<(Vec2, f64)> {
    let m = math::add(r_s, r_t);
    let n = math::norm(m);
    if n < 1e-6 {
        return None;
    }
    let a = math::scale(m, 1.0 / n);
    Some((a, math::dot(a, r_s)))
}

/// Problem-specific redundant constraints.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TighteningContext {
    pub rot_start: Vec2,
    pub rot_target: Vec2,
    /// `(cos, sin)` variable pairs, one per knot.
    pub rotation_vars: Vec<[usize; 2]>,
    /// Quadratic equalities redundant on the QCQP (dynamics in a second frame).
    pub redundant_quadratic: Vec<QuadForm>,
}

impl TighteningContext {
    pub fn cut_rows(&self) -> Vec<Affine> {
        match geodesic_cut(self.rot_start, self.rot_target) {
            None => Vec::new(),
            Some((a, b)) => self
                .rotation_vars
                .iter()
                .map(|&[c, s]| Affine::from_terms(alloc::vec![(c, a[0]), (s, a[1])], -b))
                .collect(),
        }
    }
}

pub fn add_tightening(rel: &mut SemidefiniteRelaxation, ctx: &TighteningContext) -> Result<(), RelaxationError> {
    for q in &ctx.redundant_quadratic {
        rel.add_quadratic(q, Relation::Eq)?;
    }
    for row in ctx.cut_rows() {
        rel.add_affine(&row, Relation::Ge);
    }
    // Knots on the arc between the endpoint rotations are never further
    // apart than the endpoints themselves.
    let cos_span = math::dot(ctx.rot_start, ctx.rot_target);
    if geodesic_cut(ctx.rot_start, ctx.rot_target).is_some() && cos_span > 0.0 {
        for w in ctx.rotation_vars.windows(2) {
            let [c0, s0] = w[0];
            let [c1, s1] = w[1];
            let q = Affine::var(c0).product(&Affine::var(c1)).plus(&Affine::var(s0).product(&Affine::var(s1)));
            rel.add_quadratic(&q.plus(&QuadForm::constant(-cos_span)), Relation::Ge)?;
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtractionReport {
    /// First-column estimate of the QCQP variables.
    pub point: Vec<f64>,
    /// `λ₂/λ₁` per block.
    pub eigen_ratios: Vec<f64>,
    pub min_eigenvalue: f64,
    /// Largest disagreement between copies of shared moment entries.
    pub max_overlap_disagreement: f64,
}

/// Reads the first columns of a solved relaxation. `x` holds the relaxation
/// program's variables (for perspective copies, pass the copy's slice).
pub fn extract(rel: &SemidefiniteRelaxation, x: &[f64]) -> Result<ExtractionReport, RelaxationError> {
    if x.len() < rel.program.num_vars || x.iter().take(rel.program.num_vars).any(|v| !v.is_finite()) {
        return Err(RelaxationError::NotSolved);
    }
    let mut point = alloc::vec![0.0; rel.num_qcqp_vars];
    let mut seen = alloc::vec![false; rel.num_qcqp_vars];
    let mut ratios = Vec::with_capacity(rel.blocks.len());
    let mut min_eig = f64::INFINITY;
    let mut disagreement: f64 = 0.0;
    let mut values: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (b, blk) in rel.blocks.iter().enumerate() {
        let x00 = x[blk.entry(0, 0)];
        let unit = if math::abs(x00) > 1e-300 { x00 } else { 1.0 };
        for (k, &v) in blk.vars.iter().enumerate() {
            if !seen[v] {
                point[v] = x[blk.entry(0, k + 1)] / unit;
                seen[v] = true;
            }
        }
        let hom = |a: usize| if a == 0 { 0 } else { blk.vars[a - 1] + 1 };
        for j in 0..blk.dim() {
            for i in 0..=j {
                let key = (hom(i).min(hom(j)), hom(i).max(hom(j)));
                let val = x[blk.entry(i, j)] / unit;
                match values.get(&key) {
                    Some(prev) => disagreement = disagreement.max(math::abs(prev - val)),
                    None => {
                        values.insert(key, val);
                    }
                }
            }
        }
        let eig = symmetric_eigenvalues(&rel.block_matrix(b, x), blk.dim());
        min_eig = min_eig.min(eig[eig.len() - 1]);
        let ratio = if eig[0] > 1e-300 && eig.len() > 1 { (eig[1].max(0.0) / eig[0]).clamp(0.0, 1.0) } else { 0.0 };
        ratios.push(ratio);
    }
    Ok(ExtractionReport { point, eigen_ratios: ratios, min_eigenvalue: min_eig, max_overlap_disagreement: disagreement })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn box_problem(sign: f64) -> QcqpProblem {
        // min sign·y² s.t. −1 ≤ y ≤ 1
        QcqpProblem {
            num_vars: 1,
            objective: QuadForm { quadratic: alloc::vec![(0, 0, sign)], ..QuadForm::default() },
            quadratic: Vec::new(),
            affine: alloc::vec![
                (Affine::from_terms(alloc::vec![(0, -1.0)], 1.0), Relation::Ge),
                (Affine::from_terms(alloc::vec![(0, 1.0)], 1.0), Relation::Ge),
            ],
            groups: alloc::vec![alloc::vec![0]],
        }
    }

    #[test]
    fn rlt_product_bounds_second_moment() {
        let rel = relax(&box_problem(-1.0)).unwrap();
        // (1 − y)(1 + y) ≥ 0 lifted: 1·X00 − Y ≥ 0.
        let y_entry = rel.second_moment(0, 0).unwrap();
        let unit = rel.unit_entry();
        let found = rel.program.constraints.iter().any(|c| {
            c.cone == Cone::Nonnegative && c.rows[0].terms == alloc::vec![(unit, 1.0), (y_entry, -1.0)]
        });
        assert!(found);
    }

    #[test]
    fn lifted_feasible_point_satisfies_everything() {
        let rel = relax(&box_problem(-1.0)).unwrap();
        for y in [-1.0, -0.3, 0.0, 0.8, 1.0] {
            let x = rel.lift_point(&[y]);
            assert!(rel.program.max_violation(&x) < 1e-12);
            assert!((rel.program.objective_value(&x) + y * y).abs() < 1e-15);
        }
    }

    #[test]
    fn extraction_of_nontight_point() {
        let rel = relax(&box_problem(-1.0)).unwrap();
        // Relaxed optimum: y = 0, Y = 1.
        let mut x = alloc::vec![0.0; rel.program.num_vars];
        x[rel.unit_entry()] = 1.0;
        x[rel.second_moment(0, 0).unwrap()] = 1.0;
        let rep = extract(&rel, &x).unwrap();
        assert_eq!(rep.point, alloc::vec![0.0]);
        assert!((rep.eigen_ratios[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn extraction_of_rank_one_point() {
        let rel = relax(&box_problem(1.0)).unwrap();
        let x = rel.lift_point(&[0.7]);
        let rep = extract(&rel, &x).unwrap();
        assert!((rep.point[0] - 0.7).abs() < 1e-15);
        assert!(rep.eigen_ratios[0] < 1e-12);
        assert!(extract(&rel, &x[..1]).is_err());
    }

    #[test]
    fn quadratic_outside_groups_is_rejected() {
        let q = QcqpProblem {
            num_vars: 3,
            objective: QuadForm::default(),
            quadratic: alloc::vec![(QuadForm { quadratic: alloc::vec![(0, 2, 1.0)], ..QuadForm::default() }, Relation::Eq)],
            affine: Vec::new(),
            groups: alloc::vec![alloc::vec![0, 1], alloc::vec![1, 2]],
        };
        assert_eq!(relax(&q).unwrap_err(), RelaxationError::UnsupportedConstraint(0));
    }

    #[test]
    fn overlapping_groups_share_moments() {
        let q = QcqpProblem {
            num_vars: 3,
            objective: QuadForm::default(),
            quadratic: Vec::new(),
            affine: Vec::new(),
            groups: alloc::vec![alloc::vec![0, 1], alloc::vec![1, 2]],
        };
        let rel = relax(&q).unwrap();
        // Shared first moment y1 and second moment y1² are equated.
        let eqs = rel.program.constraints.iter().filter(|c| c.cone == Cone::Zero).count();
        assert_eq!(eqs, 2 + 2);
        let x = rel.lift_point(&[0.1, 0.2, 0.3]);
        assert!(rel.program.max_violation(&x) < 1e-15);
    }

    #[test]
    fn geodesic_cut_examples() {
        let (a, b) = geodesic_cut([1.0, 0.0], [0.0, 1.0]).unwrap();
        let s = 0.5f64.sqrt();
        assert!((a[0] - s).abs() < 1e-15 && (a[1] - s).abs() < 1e-15 && (b - s).abs() < 1e-15);
        let (a, b) = geodesic_cut([0.6, 0.8], [0.6, 0.8]).unwrap();
        assert!((a[0] - 0.6).abs() < 1e-15 && (b - 1.0).abs() < 1e-15);
        assert!(geodesic_cut([1.0, 0.0], [-1.0, 0.0]).is_none());
    }
}
