use std::fmt;

use crate::linalg::{inverse, LinalgError, Matrix};

/// Itô-type stochastic linear system
/// `dx = A x dt + Σⱼ Nⱼ x dwⱼ + B u dt`, `y = C x`.
#[derive(Clone, Debug, PartialEq)]
pub struct StochasticSystem {
    pub a: Matrix,
    pub n_list: Vec<Matrix>,
    pub b: Matrix,
    pub c: Matrix,
    pub name: Option<String>,
}

/// State, noise, input and output dimensions `(n, k, m, p)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub p: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ValidationIssue {
    Dimension(String),
    NonFinite(&'static str),
    Empty(&'static str),
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationIssue::Dimension(msg) => write!(f, "dimension error: {msg}"),
            ValidationIssue::NonFinite(field) => write!(f, "non-finite entry in {field}"),
            ValidationIssue::Empty(what) => write!(f, "empty {what}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub dims: Dims,
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

impl StochasticSystem {
    /// Builds a system and rejects it unless [`validate`](Self::validate) is clean.
    pub fn new(a: Matrix, n_list: Vec<Matrix>, b: Matrix, c: Matrix) -> Result<Self, crate::Error> {
        let sys = Self {
            a,
            n_list,
            b,
            c,
            name: None,
        };
        let report = sys.validate();
        if let Some(issue) = report.issues.into_iter().next() {
            return Err(crate::Error::InvalidSystem(issue.to_string()));
        }
        Ok(sys)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn dims(&self) -> Dims {
        Dims {
            n: self.a.rows(),
            k: self.n_list.len(),
            m: self.b.cols(),
            p: self.c.rows(),
        }
    }

    pub fn order(&self) -> usize {
        self.a.rows()
    }

    /// Checks shapes and finiteness; never fails, collects every issue.
    pub fn validate(&self) -> ValidationReport {
        let dims = self.dims();
        let n = dims.n;
        let mut issues = Vec::new();
        if n == 0 {
            issues.push(ValidationIssue::Empty("state"));
        }
        if !self.a.is_square() {
            issues.push(ValidationIssue::Dimension(format!(
                "A is {}x{}, expected square",
                self.a.rows(),
                self.a.cols()
            )));
        }
        if self.n_list.is_empty() {
            issues.push(ValidationIssue::Empty("noise list N"));
        }
        for (j, nj) in self.n_list.iter().enumerate() {
            if nj.shape() != (n, n) {
                issues.push(ValidationIssue::Dimension(format!(
                    "N[{j}] is {}x{}, expected {n}x{n}",
                    nj.rows(),
                    nj.cols()
                )));
            }
        }
        if self.b.rows() != n {
            issues.push(ValidationIssue::Dimension(format!(
                "B has {} rows, expected {n}",
                self.b.rows()
            )));
        }
        if dims.m == 0 {
            issues.push(ValidationIssue::Empty("input (B has no columns)"));
        }
        if self.c.cols() != n {
            issues.push(ValidationIssue::Dimension(format!(
                "C has {} columns, expected {n}",
                self.c.cols()
            )));
        }
        if dims.p == 0 {
            issues.push(ValidationIssue::Empty("output (C has no rows)"));
        }
        if !self.a.is_finite() {
            issues.push(ValidationIssue::NonFinite("A"));
        }
        if self.n_list.iter().any(|nj| !nj.is_finite()) {
            issues.push(ValidationIssue::NonFinite("N"));
        }
        if !self.b.is_finite() {
            issues.push(ValidationIssue::NonFinite("B"));
        }
        if !self.c.is_finite() {
            issues.push(ValidationIssue::NonFinite("C"));
        }
        ValidationReport { dims, issues }
    }

    /// `(T⁻¹ A T, T⁻¹ Nⱼ T, T⁻¹ B, C T)`.
    pub fn transformed(&self, t: &Matrix, t_inv: &Matrix) -> StochasticSystem {
        StochasticSystem {
            a: t_inv.matmul(&self.a).matmul(t),
            n_list: self
                .n_list
                .iter()
                .map(|nj| t_inv.matmul(nj).matmul(t))
                .collect(),
            b: t_inv.matmul(&self.b),
            c: self.c.matmul(t),
            name: self.name.clone(),
        }
    }

    /// Similarity transform computing `T⁻¹` by LU.
    pub fn similarity(&self, t: &Matrix) -> Result<StochasticSystem, LinalgError> {
        let t_inv = inverse(t)?;
        Ok(self.transformed(t, &t_inv))
    }

    /// The same system with every noise matrix removed (set to zero).
    pub fn without_noise(&self) -> StochasticSystem {
        let n = self.order();
        StochasticSystem {
            n_list: vec![Matrix::zeros(n, n); self.n_list.len().max(1)],
            ..self.clone()
        }
    }

    /// Output scaled by `s`.
    pub fn with_scaled_output(&self, s: f64) -> StochasticSystem {
        StochasticSystem {
            c: self.c.scale(s),
            ..self.clone()
        }
    }

    pub fn partition(&self, r_state: usize) -> Result<PartitionedSystem, crate::Error> {
        PartitionedSystem::new(self, r_state)
    }
}

/// Two-by-two block view of a system split after `r_state` states.
#[derive(Clone, Debug)]
pub struct PartitionedSystem {
    pub r_state: usize,
    pub a11: Matrix,
    pub a12: Matrix,
    pub a21: Matrix,
    pub a22: Matrix,
    /// `[N₁₁, N₁₂, N₂₁, N₂₂]` per noise channel.
    pub n_blocks: Vec<[Matrix; 4]>,
    pub b1: Matrix,
    pub b2: Matrix,
    pub c1: Matrix,
    pub c2: Matrix,
}

fn split4(m: &Matrix, r: usize) -> [Matrix; 4] {
    let n = m.rows();
    [
        m.submatrix(0, 0, r, r),
        m.submatrix(0, r, r, n - r),
        m.submatrix(r, 0, n - r, r),
        m.submatrix(r, r, n - r, n - r),
    ]
}

impl PartitionedSystem {
    pub fn new(sys: &StochasticSystem, r_state: usize) -> Result<Self, crate::Error> {
        let n = sys.order();
        if r_state == 0 || r_state >= n {
            return Err(crate::Error::Domain(format!(
                "split index {r_state} must satisfy 1 <= r < n = {n}"
            )));
        }
        let [a11, a12, a21, a22] = split4(&sys.a, r_state);
        let m = sys.b.cols();
        let p = sys.c.rows();
        Ok(Self {
            r_state,
            a11,
            a12,
            a21,
            a22,
            n_blocks: sys.n_list.iter().map(|nj| split4(nj, r_state)).collect(),
            b1: sys.b.submatrix(0, 0, r_state, m),
            b2: sys.b.submatrix(r_state, 0, n - r_state, m),
            c1: sys.c.submatrix(0, 0, p, r_state),
            c2: sys.c.submatrix(0, r_state, p, n - r_state),
        })
    }

    /// Reassembles the parent system.
    pub fn assemble(&self) -> StochasticSystem {
        let join = |blk: &[Matrix; 4]| {
            let top = Matrix::hstack(&[&blk[0], &blk[1]]);
            let bottom = Matrix::hstack(&[&blk[2], &blk[3]]);
            Matrix::vstack(&[&top, &bottom])
        };
        StochasticSystem {
            a: join(&[
                self.a11.clone(),
                self.a12.clone(),
                self.a21.clone(),
                self.a22.clone(),
            ]),
            n_list: self.n_blocks.iter().map(join).collect(),
            b: Matrix::vstack(&[&self.b1, &self.b2]),
            c: Matrix::hstack(&[&self.c1, &self.c2]),
            name: None,
        }
    }

    /// The truncated system `(A₁₁, N₁₁, B₁, C₁)`.
    pub fn leading(&self) -> StochasticSystem {
        StochasticSystem {
            a: self.a11.clone(),
            n_list: self.n_blocks.iter().map(|b| b[0].clone()).collect(),
            b: self.b1.clone(),
            c: self.c1.clone(),
            name: None,
        }
    }
}
