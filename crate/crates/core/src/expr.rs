//! Sparse affine and quadratic forms over a flat variable vector.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::ops::{Add, Mul, Neg, Sub};

/// Relation of a row to zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    /// `row = 0`
    Eq,
    /// `row ≥ 0`
    Ge,
}

impl Relation {
    /// Violation of `value (relation) 0`, as a nonnegative number.
    pub fn violation(self, value: f64) -> f64 {
        match self {
            Relation::Eq => value.abs(),
            Relation::Ge => (-value).max(0.0),
        }
    }
}

/// `constant + Σ coef · x[var]`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Affine {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Affine {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn var(i: usize) -> Self {
        Self { terms: alloc::vec![(i, 1.0)], constant: 0.0 }
    }

    pub fn term(i: usize, coef: f64) -> Self {
        Self { terms: alloc::vec![(i, coef)], constant: 0.0 }
    }

    pub fn from_terms(terms: Vec<(usize, f64)>, constant: f64) -> Self {
        Self { terms, constant }.simplified()
    }

    pub fn with_term(mut self, i: usize, coef: f64) -> Self {
        self.terms.push((i, coef));
        self
    }

    pub fn plus_constant(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    /// Merges duplicate indices, drops exact zeros and sorts by index.
    pub fn simplified(self) -> Self {
        let mut map: BTreeMap<usize, f64> = BTreeMap::new();
        for (i, c) in self.terms {
            *map.entry(i).or_insert(0.0) += c;
        }
        Self { terms: map.into_iter().filter(|(_, c)| *c != 0.0).collect(), constant: self.constant }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|&(_, c)| c == 0.0)
    }

    pub fn max_index(&self) -> Option<usize> {
        self.terms.iter().map(|&(i, _)| i).max()
    }

    pub fn support(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.terms.iter().filter(|t| t.1 != 0.0).map(|t| t.0).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { terms: self.terms.iter().map(|&(i, c)| (i, c * s)).collect(), constant: self.constant * s }
    }

    /// Renames variables through `map`. With `unit = Some(y)` the constant is
    /// multiplied by variable `y` instead of kept (perspective form).
    pub fn remap(&self, map: impl Fn(usize) -> usize, unit: Option<usize>) -> Self {
        let mut terms: Vec<(usize, f64)> = self.terms.iter().map(|&(i, c)| (map(i), c)).collect();
        let constant = match unit {
            Some(y) => {
                if self.constant != 0.0 {
                    terms.push((y, self.constant));
                }
                0.0
            }
            None => self.constant,
        };
        Self { terms, constant }
    }

    /// Product of two affine forms as a quadratic form.
    pub fn product(&self, other: &Affine) -> QuadForm {
        let mut q = QuadForm::constant(self.constant * other.constant);
        for &(i, a) in &self.terms {
            q.linear.push((i, a * other.constant));
        }
        for &(j, b) in &other.terms {
            q.linear.push((j, b * self.constant));
        }
        for &(i, a) in &self.terms {
            for &(j, b) in &other.terms {
                q.quadratic.push((i.min(j), i.max(j), a * b));
            }
        }
        q.simplified()
    }

    pub fn square(&self) -> QuadForm {
        self.product(self)
    }

    pub fn to_quad(&self) -> QuadForm {
        QuadForm { constant: self.constant, linear: self.terms.clone(), quadratic: Vec::new() }
    }
}

impl Add for Affine {
    type Output = Affine;
    fn add(mut self, rhs: Affine) -> Affine {
        self.terms.extend(rhs.terms);
        self.constant += rhs.constant;
        self.simplified()
    }
}

impl Sub for Affine {
    type Output = Affine;
    fn sub(self, rhs: Affine) -> Affine {
        self + rhs.scaled(-1.0)
    }
}

impl Neg for Affine {
    type Output = Affine;
    fn neg(self) -> Affine {
        self.scaled(-1.0)
    }
}

impl Mul<f64> for Affine {
    type Output = Affine;
    fn mul(self, rhs: f64) -> Affine {
        self.scaled(rhs)
    }
}

/// `constant + Σ a_i x_i + Σ_{i ≤ j} b_ij x_i x_j`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct QuadForm {
    pub constant: f64,
    pub linear: Vec<(usize, f64)>,
    /// Monomials `(i, j, coef)` with `i <= j`.
    pub quadratic: Vec<(usize, usize, f64)>,
}

impl QuadForm {
    pub fn constant(c: f64) -> Self {
        Self { constant: c, ..Self::default() }
    }

    pub fn simplified(self) -> Self {
        let mut lin: BTreeMap<usize, f64> = BTreeMap::new();
        for (i, c) in self.linear {
            *lin.entry(i).or_insert(0.0) += c;
        }
        let mut quad: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (i, j, c) in self.quadratic {
            *quad.entry((i.min(j), i.max(j))).or_insert(0.0) += c;
        }
        Self {
            constant: self.constant,
            linear: lin.into_iter().filter(|(_, c)| *c != 0.0).collect(),
            quadratic: quad.into_iter().filter(|(_, c)| *c != 0.0).map(|((i, j), c)| (i, j, c)).collect(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant
            + self.linear.iter().map(|&(i, c)| c * x[i]).sum::<f64>()
            + self.quadratic.iter().map(|&(i, j, c)| c * x[i] * x[j]).sum::<f64>()
    }

    /// Gradient at `x` as sparse `(index, value)` pairs, sorted by index.
    pub fn gradient(&self, x: &[f64]) -> Vec<(usize, f64)> {
        let mut g: BTreeMap<usize, f64> = BTreeMap::new();
        for &(i, c) in &self.linear {
            *g.entry(i).or_insert(0.0) += c;
        }
        for &(i, j, c) in &self.quadratic {
            *g.entry(i).or_insert(0.0) += c * x[j];
            *g.entry(j).or_insert(0.0) += c * x[i];
        }
        g.into_iter().collect()
    }

    /// First-order Taylor expansion around `x0`.
    pub fn linearize(&self, x0: &[f64]) -> Affine {
        let grad = self.gradient(x0);
        let value = self.eval(x0);
        let shift: f64 = grad.iter().map(|&(i, g)| g * x0[i]).sum();
        Affine::from_terms(grad, value - shift)
    }

    pub fn support(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.linear.iter().map(|t| t.0).collect();
        for &(i, j, _) in &self.quadratic {
            s.push(i);
            s.push(j);
        }
        s.sort_unstable();
        s.dedup();
        s
    }

    pub fn is_affine(&self) -> bool {
        self.quadratic.iter().all(|q| q.2 == 0.0)
    }

    pub fn max_index(&self) -> Option<usize> {
        self.support().last().copied()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            constant: self.constant * s,
            linear: self.linear.iter().map(|&(i, c)| (i, c * s)).collect(),
            quadratic: self.quadratic.iter().map(|&(i, j, c)| (i, j, c * s)).collect(),
        }
    }

    pub fn plus(mut self, other: &QuadForm) -> Self {
        self.constant += other.constant;
        self.linear.extend_from_slice(&other.linear);
        self.quadratic.extend_from_slice(&other.quadratic);
        self.simplified()
    }

    pub fn plus_affine(self, other: &Affine) -> Self {
        self.plus(&other.to_quad())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_matches_pointwise() {
        let a = Affine::from_terms(alloc::vec![(0, 2.0), (1, -1.0)], 0.5);
        let b = Affine::from_terms(alloc::vec![(1, 3.0), (2, 1.0)], -2.0);
        let x = [0.3, -1.2, 2.5];
        let q = a.product(&b);
        assert!((q.eval(&x) - a.eval(&x) * b.eval(&x)).abs() < 1e-12);
    }

    #[test]
    fn linearization_is_tangent() {
        let a = Affine::from_terms(alloc::vec![(0, 1.0), (1, 1.0)], 0.0);
        let q = a.square();
        let x0 = [1.0, 2.0];
        let l = q.linearize(&x0);
        assert!((l.eval(&x0) - q.eval(&x0)).abs() < 1e-12);
        // d/dx0 (x0 + x1)^2 = 2 (x0 + x1) = 6
        assert_eq!(l.terms, alloc::vec![(0, 6.0), (1, 6.0)]);
    }

    #[test]
    fn perspective_remap_moves_constant() {
        let a = Affine::from_terms(alloc::vec![(0, 1.0)], 3.0);
        let p = a.remap(|i| i + 10, Some(99));
        assert_eq!(p.constant, 0.0);
        assert_eq!(p.terms, alloc::vec![(10, 1.0), (99, 3.0)]);
    }
}
