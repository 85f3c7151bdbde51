//! Frequency-domain evaluation of the spectral density
//! `Phi(iw) = W(iw) W(iw)^*`, its partition blocks and rank profile.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::linalg::{cond, numerical_rank, CMatrix, Tolerances};
use crate::lti::{log_grid, tf_eval, CtModel};

/// Ordering of the output channels into `(y, u)`: positions `0..p` of
/// `row_order` are the y-channels, `p..p+q` the u-channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionSpec {
    p: usize,
    q: usize,
    row_order: Vec<usize>,
}

impl PartitionSpec {
    pub fn new(p: usize, q: usize, row_order: Vec<usize>) -> Result<Self> {
        if row_order.len() != p + q {
            return Err(Error::dims("row_order", format!("expected {} entries, got {}", p + q, row_order.len())));
        }
        let mut seen = vec![false; p + q];
        for &r in &row_order {
            if r >= p + q || seen[r] {
                return Err(Error::InvalidArgument(format!("row_order {row_order:?} is not a permutation")));
            }
            seen[r] = true;
        }
        Ok(PartitionSpec { p, q, row_order })
    }

    /// `y` = `y_rows` (in the given order), `u` = `u_rows`.
    pub fn from_rows(y_rows: &[usize], u_rows: &[usize]) -> Result<Self> {
        let order: Vec<usize> = y_rows.iter().chain(u_rows).copied().collect();
        PartitionSpec::new(y_rows.len(), u_rows.len(), order)
    }

    pub fn p(&self) -> usize {
        self.p
    }
    pub fn q(&self) -> usize {
        self.q
    }
    pub fn row_order(&self) -> &[usize] {
        &self.row_order
    }
    pub fn y_rows(&self) -> &[usize] {
        &self.row_order[..self.p]
    }
    pub fn u_rows(&self) -> &[usize] {
        &self.row_order[self.p..]
    }
}

/// `Phi(i omega)` in the model's original channel order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSample {
    pub omega: f64,
    pub phi: CMatrix,
}

/// The four blocks of a spectrum sample under a partition.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumBlocks {
    pub y: CMatrix,
    pub yu: CMatrix,
    pub uy: CMatrix,
    pub u: CMatrix,
}

impl SpectrumSample {
    pub fn blocks(&self, part: &PartitionSpec) -> Result<SpectrumBlocks> {
        if part.p + part.q != self.phi.nrows() {
            return Err(Error::dims(
                "partition",
                format!("p + q = {} but the spectrum has {} channels", part.p + part.q, self.phi.nrows()),
            ));
        }
        let pick = |rows: &[usize], cols: &[usize]| CMatrix::from_fn(rows.len(), cols.len(), |i, j| self.phi[(rows[i], cols[j])]);
        let (y, u) = (part.y_rows(), part.u_rows());
        Ok(SpectrumBlocks {
            y: pick(y, y),
            yu: pick(y, u),
            uy: pick(u, y),
            u: pick(u, u),
        })
    }
}

/// 200 log-spaced frequencies on `[1e-3, 1e3]` rad/s.
pub fn default_grid() -> Vec<f64> {
    log_grid(1e-3, 1e3, 200)
}

pub fn spectral_density_eval(model: &CtModel, omega: f64) -> Result<SpectrumSample> {
    let w = tf_eval(model.ss(), Complex64::new(0.0, omega))?;
    let phi = &w * w.adjoint();
    Ok(SpectrumSample { omega, phi })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankProfile {
    /// Most frequent numerical rank over the grid (ties go to the larger rank).
    pub mode: usize,
    pub ranks: Vec<usize>,
    /// Grid indices whose rank differs from the mode.
    pub deviating: Vec<usize>,
}

pub fn spectral_rank_profile(model: &CtModel, grid: &[f64], tol: &Tolerances) -> Result<RankProfile> {
    spectral_rank_profile_with(model, grid, tol, Exec::default())
}

/// Modal rank of `Phi(i omega)` over `grid`.
///
/// Rank drops are tolerated at isolated grid points (zeros of the spectral
/// factor), provided no two consecutive points deviate and at most a tenth of
/// the grid does. The mode must equal `model.m()`.
pub fn spectral_rank_profile_with(model: &CtModel, grid: &[f64], tol: &Tolerances, exec: Exec) -> Result<RankProfile> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("frequency grid is empty".into()));
    }
    let ranks: Vec<usize> = exec.try_map(grid, |&w| spectral_density_eval(model, w).map(|s| numerical_rank(&s.phi, tol)))?;
    let max_rank = ranks.iter().copied().max().unwrap_or(0);
    let mut counts = vec![0usize; max_rank + 1];
    for &r in &ranks {
        counts[r] += 1;
    }
    let mode = (0..=max_rank).rev().max_by_key(|&r| counts[r]).unwrap_or(0);
    let deviating: Vec<usize> = (0..ranks.len()).filter(|&i| ranks[i] != mode).collect();
    let profile = RankProfile { mode, ranks, deviating };

    if profile.deviating.windows(2).any(|w| w[1] == w[0] + 1) || profile.deviating.len() * 10 > grid.len() {
        return Err(Error::RankInconsistent(format!(
            "{} of {} grid points deviate from modal rank {}",
            profile.deviating.len(),
            grid.len(),
            mode
        )));
    }
    if mode != model.m() {
        return Err(Error::RankInconsistent(format!("modal rank {} differs from rank(CB) = {}", mode, model.m())));
    }
    Ok(profile)
}

/// `Phi_yu(i omega) Phi_u(i omega)^{-1}`.
pub fn f_from_spectrum_eval(model: &CtModel, part: &PartitionSpec, omega: f64) -> Result<CMatrix> {
    let blocks = spectral_density_eval(model, omega)?.blocks(part)?;
    let c = cond(&blocks.u);
    if c.is_nan() || c >= 1e12 {
        return Err(Error::PhiUSingular { omega, cond: c });
    }
    let inv = blocks.u.try_inverse().ok_or(Error::PhiUSingular { omega, cond: c })?;
    Ok(blocks.yu * inv)
}
