//! Affine expressions over a flat variable vector.

use serde::{Deserialize, Serialize};

/// Index of a scalar decision variable in a [`crate::ConicProgram`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VarId(pub u32);

impl VarId {
    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

/// A sparse affine expression `sum_k coeff_k * x_{var_k} + constant`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn var(v: VarId) -> Self {
        Self { terms: vec![(v, 1.0)], constant: 0.0 }
    }

    pub fn term(v: VarId, coeff: f64) -> Self {
        Self { terms: vec![(v, coeff)], constant: 0.0 }
    }

    /// Adds `coeff * x_v`, merging with an existing term for `v` if present.
    pub fn add_term(&mut self, v: VarId, coeff: f64) -> &mut Self {
        if coeff == 0.0 {
            return self;
        }
        if let Some(t) = self.terms.iter_mut().find(|(w, _)| *w == v) {
            t.1 += coeff;
        } else {
            self.terms.push((v, coeff));
        }
        self
    }

    pub fn add_constant(&mut self, c: f64) -> &mut Self {
        self.constant += c;
        self
    }

    /// Builder-style variant of [`LinExpr::add_term`].
    pub fn plus(mut self, v: VarId, coeff: f64) -> Self {
        self.add_term(v, coeff);
        self
    }

    pub fn plus_const(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            terms: self.terms.iter().map(|&(v, c)| (v, c * s)).collect(),
            constant: self.constant * s,
        }
    }

    pub fn add_expr(&mut self, other: &LinExpr, scale: f64) -> &mut Self {
        for &(v, c) in &other.terms {
            self.add_term(v, c * scale);
        }
        self.constant += other.constant * scale;
        self
    }

    /// Evaluates the expression at a point given as the full variable vector.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut acc = self.constant;
        for &(v, c) in &self.terms {
            acc += c * x[v.idx()];
        }
        acc
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest referenced variable index, if any.
    pub fn max_var(&self) -> Option<u32> {
        self.terms.iter().map(|(v, _)| v.0).max()
    }
}
