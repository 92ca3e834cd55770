//! Laplace spectra of closed factors `F`.

use crate::error::{Error, Result};

/// Relative tolerance under which two eigenvalues count as one level.
pub const MERGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum FiberSpectrum {
    /// Round circle of radius `L`: `(k/L)^2`, each `k >= 1` twice.
    Circle { radius: f64 },
    /// `S^1(l1) x S^1(l2)`: sums of two circle spectra.
    FlatTorus { l1: f64, l2: f64 },
    /// User-supplied eigenvalues, ascending, repeated by multiplicity,
    /// starting with 0.
    List(Vec<f64>),
}

impl FiberSpectrum {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        match self {
            FiberSpectrum::Circle { radius } => positive("circle radius", *radius),
            FiberSpectrum::FlatTorus { l1, l2 } => {
                positive("l1", *l1)?;
                positive("l2", *l2)
            }
            FiberSpectrum::List(values) => {
                if values.first() != Some(&0.0) {
                    return Err(Error::InvalidSpectrumList("list must start with 0".into()));
                }
                if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::InvalidSpectrumList("entries must be finite and nonnegative".into()));
                }
                if values.windows(2).any(|w| w[1] < w[0]) {
                    return Err(Error::InvalidSpectrumList("entries must be ascending".into()));
                }
                Ok(())
            }
        }
    }

    pub fn descriptor(&self) -> String {
        match self {
            FiberSpectrum::Circle { radius } => format!("circle(L={radius})"),
            FiberSpectrum::FlatTorus { l1, l2 } => format!("flat-torus(L1={l1},L2={l2})"),
            FiberSpectrum::List(v) => format!("list(n={})", v.len()),
        }
    }

    /// Whether the spectrum continues past any bound (closed forms) or is a
    /// finite user list.
    pub fn is_infinite(&self) -> bool {
        !matches!(self, FiberSpectrum::List(_))
    }

    /// Distinct eigenvalues `<= max_mu` with multiplicities, ascending.
    pub fn levels_up_to(&self, max_mu: f64) -> Vec<(f64, usize)> {
        let mut values = Vec::new();
        match self {
            FiberSpectrum::Circle { radius } => {
                values.push(0.0);
                for k in 1.. {
                    let mu = (k as f64 / radius).powi(2);
                    if mu > max_mu {
                        break;
                    }
                    values.extend([mu, mu]);
                }
            }
            FiberSpectrum::FlatTorus { l1, l2 } => {
                let amax = (l1 * max_mu.sqrt()).floor() as i64;
                let bmax = (l2 * max_mu.sqrt()).floor() as i64;
                for a in -amax..=amax {
                    for b in -bmax..=bmax {
                        let mu = (a as f64 / l1).powi(2) + (b as f64 / l2).powi(2);
                        if mu <= max_mu {
                            values.push(mu);
                        }
                    }
                }
            }
            FiberSpectrum::List(list) => values.extend(list.iter().copied().filter(|&v| v <= max_mu)),
        }
        group_levels(values)
    }

    /// Smallest positive eigenvalue.
    pub fn first_positive(&self) -> Option<f64> {
        match self {
            FiberSpectrum::Circle { radius } => Some(radius.powi(-2)),
            FiberSpectrum::FlatTorus { l1, l2 } => Some(l1.max(*l2).powi(-2)),
            FiberSpectrum::List(list) => list.iter().copied().find(|&v| v > 0.0),
        }
    }
}

/// Sort and merge values equal to within [`MERGE_TOL`] relative.
pub(crate) fn group_levels(mut values: Vec<f64>) -> Vec<(f64, usize)> {
    values.sort_by(f64::total_cmp);
    let mut out: Vec<(f64, usize)> = Vec::new();
    for v in values {
        match out.last_mut() {
            Some((w, n)) if (v - *w).abs() <= MERGE_TOL * v.abs().max(w.abs()) => *n += 1,
            _ => out.push((v, 1)),
        }
    }
    out
}

/// The first `count` Laplace eigenvalues of the factor, repeated by
/// multiplicity. User lists are validated and passed through (truncated to
/// `count`).
pub fn laplace_closed_factor_spectrum(factor: &FiberSpectrum, count: usize) -> Result<Vec<f64>> {
    factor.validate()?;
    if let FiberSpectrum::List(list) = factor {
        return Ok(list.iter().copied().take(count).collect());
    }
    let mut bound = factor.first_positive().unwrap_or(1.0);
    loop {
        let levels = factor.levels_up_to(bound);
        let total: usize = levels.iter().map(|l| l.1).sum();
        if total >= count {
            return Ok(levels
                .into_iter()
                .flat_map(|(v, n)| std::iter::repeat_n(v, n))
                .take(count)
                .collect());
        }
        bound *= 2.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_circle() {
        let mu = laplace_closed_factor_spectrum(&FiberSpectrum::Circle { radius: 1.0 }, 7).unwrap();
        assert_eq!(mu, vec![0.0, 1.0, 1.0, 4.0, 4.0, 9.0, 9.0]);
    }

    #[test]
    fn circle_first_positive_is_inverse_square_radius() {
        for l in [0.25, 0.5, 2.0] {
            let f = FiberSpectrum::Circle { radius: l };
            assert_eq!(f.first_positive(), Some(1.0 / (l * l)));
            assert_eq!(laplace_closed_factor_spectrum(&f, 2).unwrap()[1], 1.0 / (l * l));
        }
    }

    #[test]
    fn square_torus_multiplicities() {
        let t = FiberSpectrum::FlatTorus { l1: 1.0, l2: 1.0 };
        let levels = t.levels_up_to(5.0);
        assert_eq!(levels, vec![(0.0, 1), (1.0, 4), (2.0, 4), (4.0, 4), (5.0, 8)]);
        let t = FiberSpectrum::FlatTorus { l1: 1.0, l2: 0.5 };
        assert_eq!(t.first_positive(), Some(1.0));
        assert_eq!(t.levels_up_to(4.0), vec![(0.0, 1), (1.0, 2), (4.0, 4)]);
    }

    #[test]
    fn circle_spectrum_matches_finite_differences() {
        // periodic second-difference operator on n points of a circle of radius L
        let (l, n) = (1.5, 4000);
        let h = 2.0 * std::f64::consts::PI * l / n as f64;
        let closed = laplace_closed_factor_spectrum(&FiberSpectrum::Circle { radius: l }, 5).unwrap();
        // eigenvalues of the periodic stencil are (2 - 2 cos(2 pi k / n)) / h^2
        for (i, want) in closed.iter().enumerate() {
            let k = i.div_ceil(2);
            let fd = (2.0 - 2.0 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos()) / (h * h);
            assert!((fd - want).abs() < 1e-5 * want.max(1.0));
        }
    }

    #[test]
    fn lists() {
        let f = FiberSpectrum::List(vec![0.0]);
        assert_eq!(laplace_closed_factor_spectrum(&f, 3).unwrap(), vec![0.0]);
        assert_eq!(f.first_positive(), None);
        for bad in [vec![], vec![1.0], vec![0.0, -1.0], vec![0.0, 2.0, 1.0]] {
            assert!(matches!(
                laplace_closed_factor_spectrum(&FiberSpectrum::List(bad), 3),
                Err(Error::InvalidSpectrumList(_))
            ));
        }
    }
}
