//! Steklov spectra of `M = B^m(R) x F` by separation of variables, and the
//! rigidity condition `sigma(mu_1(F)) >= 1/R`.
//!
//! Each Laplace level `mu` of `F` contributes the branch eigenvalues of the
//! ball problem `Delta f = mu f`, `df/dnu = sigma f`, with multiplicity
//! (ball-branch multiplicity) x (multiplicity of `mu`).

use crate::ball::{ball_branches, sigma_of_mu, BallFactorQuery, Branch, Parity};
use crate::error::{Error, Result};
use crate::fiber::{FiberSpectrum, MERGE_TOL};

/// Tolerance of the rigidity comparison `sigma(mu_1) >= 1/R`.
pub const RIGIDITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ProductSpec {
    pub m: u32,
    pub radius: f64,
    pub fiber: FiberSpectrum,
    /// Number of eigenvalues to emit, counted with multiplicity, `sigma_0`
    /// included.
    pub num: usize,
}

impl ProductSpec {
    pub fn validate(&self) -> Result<()> {
        if !matches!(self.m, 1 | 2) {
            return Err(Error::UnsupportedDimension(self.m));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::InvalidParameter(format!("radius must be positive, got {}", self.radius)));
        }
        if self.num == 0 {
            return Err(Error::InvalidParameter("num must be at least 1".into()));
        }
        self.fiber.validate()
    }

    fn lowest_branch(&self) -> Branch {
        if self.m == 1 {
            Branch::Parity(Parity::Even)
        } else {
            Branch::Angular(0)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProductSpectrum {
    /// `(value, multiplicity)` ascending; multiplicities sum to `num` unless
    /// a finite fiber list ran out first.
    pub levels: Vec<(f64, usize)>,
    /// False when a finite fiber list was exhausted before the scan could
    /// prove that no further level contributes below the last value.
    pub complete: bool,
}

impl ProductSpectrum {
    /// Eigenvalues repeated by multiplicity.
    pub fn values(&self) -> Vec<f64> {
        self.levels.iter().flat_map(|&(v, n)| std::iter::repeat_n(v, n)).collect()
    }
}

/// Value of the `num`-th smallest entry (1-based, with multiplicity).
fn nth_value(levels: &[(f64, usize)], num: usize) -> Option<f64> {
    let mut seen = 0;
    for &(v, n) in levels {
        seen += n;
        if seen >= num {
            return Some(v);
        }
    }
    None
}

fn merge(levels: &mut Vec<(f64, usize)>) {
    levels.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, usize)> = Vec::with_capacity(levels.len());
    for &(v, n) in levels.iter() {
        match out.last_mut() {
            Some((w, k)) if (v - *w).abs() <= MERGE_TOL * v.abs().max(w.abs()) => *k += n,
            _ => out.push((v, n)),
        }
    }
    *levels = out;
}

pub fn product_steklov_spectrum(spec: &ProductSpec) -> Result<ProductSpectrum> {
    spec.validate()?;
    let mut acc: Vec<(f64, usize)> = Vec::new();
    let mut cutoff = f64::INFINITY;
    let mut processed = 0usize;
    let mut bound = spec.fiber.first_positive().unwrap_or(1.0).max(1e-300);
    let mut complete = false;
    'scan: loop {
        let levels = spec.fiber.levels_up_to(bound);
        for &(mu, mult) in &levels[processed..] {
            let lowest = BallFactorQuery { m: spec.m, radius: spec.radius, mu, branch: spec.lowest_branch() }
                .branch_sigma()?;
            // sigma(mu) is nondecreasing, so no later level can contribute
            if lowest > cutoff {
                complete = true;
                break 'scan;
            }
            let branch_cut = if cutoff.is_finite() { cutoff } else { spec.num as f64 / spec.radius + lowest };
            for (sigma, bm) in ball_branches(spec.m, spec.radius, mu, branch_cut)? {
                acc.push((sigma, bm * mult));
            }
            merge(&mut acc);
            if let Some(v) = nth_value(&acc, spec.num) {
                cutoff = v;
            }
        }
        processed = levels.len();
        if !spec.fiber.is_infinite() {
            break;
        }
        if bound > 1e12 {
            break;
        }
        bound *= 2.0;
    }
    // truncate to num entries counted with multiplicity
    let mut levels = Vec::new();
    let mut left = spec.num;
    for (v, n) in acc {
        if left == 0 {
            break;
        }
        levels.push((v, n.min(left)));
        left -= n.min(left);
    }
    Ok(ProductSpectrum { levels, complete })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rigidity {
    pub holds: bool,
    pub sigma_mu1: f64,
    pub threshold: f64,
}

pub fn rigidity_condition(spec: &ProductSpec) -> Result<Rigidity> {
    spec.validate()?;
    let mu1 = spec.fiber.first_positive().ok_or(Error::NoPositiveEigenvalue)?;
    let sigma_mu1 =
        sigma_of_mu(&BallFactorQuery { m: spec.m, radius: spec.radius, mu: mu1, branch: spec.lowest_branch() })?;
    let threshold = 1.0 / spec.radius;
    Ok(Rigidity { holds: sigma_mu1 >= threshold - RIGIDITY_TOL, sigma_mu1, threshold })
}

/// `L*` with `(1/L*) tanh(1/L*) = 1`: the cylinder `[-1, 1] x S^1(L)` attains
/// equality in the trace estimate exactly for `L <= L*`.
pub fn critical_length() -> f64 {
    let f = |l: f64| (1.0 / l) * (1.0 / l).tanh() - 1.0;
    let (mut lo, mut hi) = (0.5, 1.0);
    debug_assert!(f(lo) > 0.0 && f(hi) < 0.0);
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Circle radius `L*` at which `sigma(1/L^2) = 1/R` on `B^m(R) x S^1(L)`,
/// found by bracketing and bisection.
pub fn critical_circle_radius(m: u32, radius: f64) -> Result<f64> {
    let g = |l: f64| -> Result<f64> {
        let q = BallFactorQuery { m, radius, mu: 1.0 / (l * l), branch: Branch::Angular(0) };
        Ok(sigma_of_mu(&q)? - 1.0 / radius)
    };
    let (mut lo, mut hi) = (radius, radius);
    while g(lo)? <= 0.0 {
        lo *= 0.5;
    }
    while g(hi)? > 0.0 {
        hi *= 2.0;
    }
    while hi - lo > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        if g(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
