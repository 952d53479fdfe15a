//! The solver-agnostic conic program representation.
//!
//! A program holds a flat variable vector, a linear objective (minimized),
//! and three families of constraints:
//!
//! * linear rows `expr {<=,=,>=} rhs`,
//! * second-order-cone blocks `||vector expr||_2 <= scalar expr`,
//! * PSD blocks: a symmetric matrix of affine expressions constrained `>= 0`
//!   (in the Loewner order), stored as a packed upper triangle.
//!
//! Programs are immutable after assembly; solving is done by [`crate::solve`].

use serde::{Deserialize, Serialize};

use crate::expr::{LinExpr, VarId};
use crate::ConicError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinRow {
    pub expr: LinExpr,
    pub sense: Sense,
    pub rhs: f64,
}

/// `||vector||_2 <= scalar`, both sides affine in the variables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SocBlock {
    pub vector: Vec<LinExpr>,
    pub scalar: LinExpr,
}

/// A `dim x dim` symmetric matrix of affine expressions, constrained PSD.
///
/// Entries are stored as the packed upper triangle in column-major order:
/// entry `(i, j)` with `i <= j` lives at index `j*(j+1)/2 + i`, so entries
/// `(i, j)` and `(j, i)` share one expression by construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsdBlock {
    pub dim: usize,
    pub entries: Vec<LinExpr>,
}

impl PsdBlock {
    pub fn zeroed(dim: usize) -> Self {
        Self { dim, entries: vec![LinExpr::new(); dim * (dim + 1) / 2] }
    }

    #[inline]
    pub fn tri_index(i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        j * (j + 1) / 2 + i
    }

    pub fn entry_mut(&mut self, i: usize, j: usize) -> &mut LinExpr {
        let k = Self::tri_index(i, j);
        &mut self.entries[k]
    }

    pub fn entry(&self, i: usize, j: usize) -> &LinExpr {
        &self.entries[Self::tri_index(i, j)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SocId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PsdId(pub usize);

/// A conic program `min c'x` over linear, SOC and PSD constraints.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ConicProgram {
    pub n_vars: usize,
    pub objective: LinExpr,
    pub rows: Vec<LinRow>,
    pub socs: Vec<SocBlock>,
    pub psds: Vec<PsdBlock>,
    /// Per-variable lower bounds; `-inf` when absent. Infinite bounds are
    /// written as `null` in the text dump (JSON has no infinities).
    #[serde(with = "opt_inf::neg")]
    pub lo: Vec<f64>,
    /// Per-variable upper bounds; `+inf` when absent.
    #[serde(with = "opt_inf::pos")]
    pub hi: Vec<f64>,
}

mod opt_inf {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    fn ser<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let opts: Vec<Option<f64>> =
            v.iter().map(|x| if x.is_finite() { Some(*x) } else { None }).collect();
        opts.serialize(s)
    }

    fn de<'de, D: Deserializer<'de>>(d: D, fill: f64) -> Result<Vec<f64>, D::Error> {
        let opts: Vec<Option<f64>> = Vec::deserialize(d)?;
        Ok(opts.into_iter().map(|x| x.unwrap_or(fill)).collect())
    }

    pub mod neg {
        pub fn serialize<S: serde::Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            super::ser(v, s)
        }
        pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            super::de(d, f64::NEG_INFINITY)
        }
    }

    pub mod pos {
        pub fn serialize<S: serde::Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            super::ser(v, s)
        }
        pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            super::de(d, f64::INFINITY)
        }
    }
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self) -> VarId {
        let id = VarId(self.n_vars as u32);
        self.n_vars += 1;
        self.lo.push(f64::NEG_INFINITY);
        self.hi.push(f64::INFINITY);
        id
    }

    pub fn add_vars(&mut self, k: usize) -> Vec<VarId> {
        (0..k).map(|_| self.add_var()).collect()
    }

    pub fn set_lower(&mut self, v: VarId, lo: f64) {
        self.lo[v.idx()] = lo;
    }

    pub fn set_upper(&mut self, v: VarId, hi: f64) {
        self.hi[v.idx()] = hi;
    }

    pub fn set_bounds(&mut self, v: VarId, lo: f64, hi: f64) {
        self.lo[v.idx()] = lo;
        self.hi[v.idx()] = hi;
    }

    pub fn set_objective(&mut self, obj: LinExpr) {
        self.objective = obj;
    }

    pub fn add_objective_term(&mut self, v: VarId, coeff: f64) {
        self.objective.add_term(v, coeff);
    }

    pub fn add_row(&mut self, expr: LinExpr, sense: Sense, rhs: f64) -> RowId {
        self.rows.push(LinRow { expr, sense, rhs });
        RowId(self.rows.len() - 1)
    }

    pub fn add_soc(&mut self, vector: Vec<LinExpr>, scalar: LinExpr) -> SocId {
        self.socs.push(SocBlock { vector, scalar });
        SocId(self.socs.len() - 1)
    }

    pub fn add_psd(&mut self, block: PsdBlock) -> PsdId {
        debug_assert_eq!(block.entries.len(), block.dim * (block.dim + 1) / 2);
        self.psds.push(block);
        PsdId(self.psds.len() - 1)
    }

    /// Checks that every expression references valid variable indices.
    pub fn validate(&self) -> Result<(), ConicError> {
        let n = self.n_vars as u32;
        let check = |e: &LinExpr, what: &str| -> Result<(), ConicError> {
            match e.max_var() {
                Some(v) if v >= n => Err(ConicError::BadProgram(format!(
                    "{what} references variable {v} but the program has {n} variables"
                ))),
                _ => Ok(()),
            }
        };
        check(&self.objective, "objective")?;
        for (k, r) in self.rows.iter().enumerate() {
            check(&r.expr, &format!("row {k}"))?;
        }
        for (k, s) in self.socs.iter().enumerate() {
            check(&s.scalar, &format!("soc {k} scalar"))?;
            for e in &s.vector {
                check(e, &format!("soc {k} vector"))?;
            }
        }
        for (k, p) in self.psds.iter().enumerate() {
            if p.entries.len() != p.dim * (p.dim + 1) / 2 {
                return Err(ConicError::BadProgram(format!(
                    "psd {k}: {} entries for dim {}",
                    p.entries.len(),
                    p.dim
                )));
            }
            for e in &p.entries {
                check(e, &format!("psd {k}"))?;
            }
        }
        Ok(())
    }

    /// Serializes the program to a self-describing text form (JSON).
    pub fn dump(&self) -> String {
        serde_json::to_string_pretty(self).expect("program serialization cannot fail")
    }

    pub fn parse(text: &str) -> Result<Self, ConicError> {
        let p: ConicProgram =
            serde_json::from_str(text).map_err(|e| ConicError::BadProgram(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    /// Total number of scalar conic rows after canonicalization (diagnostic).
    pub fn canonical_rows(&self) -> usize {
        let bounds = self.lo.iter().filter(|v| v.is_finite()).count()
            + self.hi.iter().filter(|v| v.is_finite()).count();
        let soc: usize = self.socs.iter().map(|s| s.vector.len() + 1).sum();
        let psd: usize = self.psds.iter().map(|p| p.dim * (p.dim + 1) / 2).sum();
        self.rows.len() + bounds + soc + psd
    }
}
