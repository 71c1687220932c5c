//! The (max, +) semiring over the reals extended with minus infinity.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const EPS: f64 = f64::NEG_INFINITY;

pub fn oplus(a: f64, b: f64) -> f64 {
    a.max(b)
}

/// `-inf` absorbs: `-inf + x = -inf` for every x, including `+inf`.
pub fn otimes(a: f64, b: f64) -> f64 {
    if a == EPS || b == EPS {
        EPS
    } else {
        a + b
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxPlusMatrix {
    n: usize,
    data: Vec<f64>,
}

impl MaxPlusMatrix {
    pub fn new(n: usize) -> Self {
        MaxPlusMatrix {
            n,
            data: vec![EPS; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::new(n);
        for i in 0..n {
            m.set(i, i, 0.0);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let n = rows.len();
        let mut m = Self::new(n);
        for (i, r) in rows.into_iter().enumerate() {
            assert_eq!(r.len(), n, "matrix must be square");
            for (j, v) in r.into_iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn oplus(&self, o: &Self) -> Self {
        assert_eq!(self.n, o.n);
        MaxPlusMatrix {
            n: self.n,
            data: self.data.iter().zip(&o.data).map(|(&a, &b)| oplus(a, b)).collect(),
        }
    }

    pub fn otimes(&self, o: &Self) -> Self {
        assert_eq!(self.n, o.n);
        let n = self.n;
        let mut r = Self::new(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == EPS {
                    continue;
                }
                for j in 0..n {
                    let v = otimes(a, o.get(k, j));
                    if v > r.get(i, j) {
                        r.set(i, j, v);
                    }
                }
            }
        }
        r
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                (0..self.n)
                    .map(|j| otimes(self.get(i, j), x[j]))
                    .fold(EPS, oplus)
            })
            .collect()
    }

    /// Kleene star `I ⊕ A ⊕ A² ⊕ ...` by Floyd-Warshall; `None` when a
    /// positive-weight cycle makes it unbounded.
    pub fn star(&self) -> Option<Self> {
        let n = self.n;
        let mut d = self.oplus(&Self::identity(n));
        for k in 0..n {
            for i in 0..n {
                let ik = d.get(i, k);
                if ik == EPS {
                    continue;
                }
                for j in 0..n {
                    let v = otimes(ik, d.get(k, j));
                    if v > d.get(i, j) {
                        d.set(i, j, v);
                    }
                }
            }
        }
        (0..n).all(|i| d.get(i, i) <= 0.0).then_some(d)
    }
}

/// One row of the timing model per subnet.
#[derive(Clone, Debug)]
pub struct TimingGraph {
    /// Execution time per iteration.
    pub exec: Vec<u64>,
    /// `(j, i, delay)`: subnet `i` consumes subnet `j`'s output `delay` after
    /// it ends.
    pub edges: Vec<(usize, usize, u64)>,
}

impl TimingGraph {
    /// Iteration matrix `T = A* ⊗ D` with `A[i][j] = t_i + c_ji` for each
    /// edge and `D = diag(t)`, so that `x(k) = T ⊗ x(k-1)` gives end times.
    pub fn matrix(&self) -> MaxPlusMatrix {
        let n = self.exec.len();
        let mut a = MaxPlusMatrix::new(n);
        for &(j, i, c) in &self.edges {
            let v = (self.exec[i] + c) as f64;
            if v > a.get(i, j) {
                a.set(i, j, v);
            }
        }
        let star = a.star().expect("timing graph is acyclic");
        let mut d = MaxPlusMatrix::new(n);
        for i in 0..n {
            d.set(i, i, self.exec[i] as f64);
        }
        star.otimes(&d)
    }
}

/// End-time vectors `x(1)..x(k)` from `x(0) = t0`.
pub fn maxplus_evolve(t: &MaxPlusMatrix, t0: &[f64], k: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(k);
    let mut x = t0.to_vec();
    for _ in 0..k {
        x = t.apply(&x);
        out.push(x.clone());
    }
    out
}

#[derive(Debug, Error, PartialEq)]
pub enum IntervalError {
    #[error("no periodic regime within {0} iterations")]
    Diverged(usize),
    #[error("matrix has no finite cycle")]
    NoCycle,
}

/// Maximum cycle mean by power iteration: run `x(k) = T ⊗ x(k-1)` until the
/// increment sequence becomes periodic, then average over one period.
pub fn steady_state_interval(t: &MaxPlusMatrix, cap: usize) -> Result<f64, IntervalError> {
    let n = t.dim();
    if n == 0 {
        return Err(IntervalError::NoCycle);
    }
    let mut x = vec![0.0; n];
    let mut deltas: Vec<Vec<f64>> = Vec::new();
    for k in 1..=cap {
        let y = t.apply(&x);
        let d: Vec<f64> = y
            .iter()
            .zip(&x)
            .map(|(&a, &b)| if a == EPS { EPS } else { a - b })
            .collect();
        x = y;
        deltas.push(d);
        for p in 1..=k / 3 {
            let last = &deltas[k - 3 * p..];
            if (0..2 * p).all(|j| last[j] == last[j + p]) {
                let rate = (0..n)
                    .map(|i| last[2 * p..].iter().map(|d| d[i]).sum::<f64>() / p as f64)
                    .fold(EPS, f64::max);
                return if rate == EPS {
                    Err(IntervalError::NoCycle)
                } else {
                    Ok(rate)
                };
            }
        }
    }
    Err(IntervalError::Diverged(cap))
}
