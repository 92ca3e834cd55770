//! The `sigma(mu)` problem on a ball `B^m(R)`, `m` in {1, 2}:
//! `Delta f = mu f` inside, `df/dnu = sigma f` on the boundary.
//!
//! For `m = 1` the ball is the interval `[-R, R]` and every branch has a
//! closed form. For `m = 2` each angular index `k` gives one radial problem,
//! solved by RK4 shooting in the variable `s = ln r`, which removes the
//! coordinate singularity at the origin. The modified-Bessel series in
//! [`bessel`] and the radial finite elements in [`discrete`] are independent
//! checks of the shooting code.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    /// Interval branches (`m = 1`).
    Parity(Parity),
    /// Angular index on the disk (`m = 2`).
    Angular(u32),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallFactorQuery {
    pub m: u32,
    pub radius: f64,
    pub mu: f64,
    pub branch: Branch,
}

impl BallFactorQuery {
    pub fn validate(&self) -> Result<()> {
        if !matches!(self.m, 1 | 2) {
            return Err(Error::UnsupportedDimension(self.m));
        }
        check_radius_mu(self.radius, self.mu)
    }

    /// Eigenvalue of the selected branch.
    pub fn branch_sigma(&self) -> Result<f64> {
        self.validate()?;
        match (self.m, self.branch) {
            (1, Branch::Parity(p)) => Ok(sigma_mu_interval(self.radius, self.mu, p)),
            (2, Branch::Angular(k)) => sigma_mu_disk(self.radius, self.mu, k),
            _ => Err(Error::InvalidParameter(format!(
                "branch {:?} does not exist for m = {}",
                self.branch, self.m
            ))),
        }
    }
}

fn check_radius_mu(radius: f64, mu: f64) -> Result<()> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {radius}")));
    }
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(Error::InvalidParameter(format!("mu must be nonnegative, got {mu}")));
    }
    Ok(())
}

/// Closed form on `[-R, R]`: `sqrt(mu) tanh(sqrt(mu) R)` for the even
/// branch, `sqrt(mu) coth(sqrt(mu) R)` for the odd one.
pub fn sigma_mu_interval(radius: f64, mu: f64, parity: Parity) -> f64 {
    debug_assert!(radius > 0.0 && mu >= 0.0);
    let q = mu.sqrt();
    let x = q * radius;
    match parity {
        Parity::Even => q * x.tanh(),
        Parity::Odd if x == 0.0 => 1.0 / radius,
        // x coth x, written to stay accurate as x -> 0
        Parity::Odd if x < 1e-4 => (1.0 + x * x / 3.0) / radius,
        Parity::Odd => q / x.tanh(),
    }
}

/// Base number of RK4 steps for the radial shooting.
const SHOOT_STEPS: usize = 10_000;
/// Relative agreement required between `N` and `2N` steps.
const SHOOT_TOL: f64 = 1e-9;
/// Beyond this value of `sqrt(mu) R` the Riccati form is integrated.
const RICCATI_SWITCH: f64 = 30.0;
const MAX_DOUBLINGS: u32 = 6;

/// Disk branch `k`: `g'(R) / g(R)` for the regular solution of
/// `g'' + g'/r - (k^2/r^2 + mu) g = 0`.
pub fn sigma_mu_disk(radius: f64, mu: f64, k: u32) -> Result<f64> {
    check_radius_mu(radius, mu)?;
    if mu == 0.0 {
        // harmonic polynomial r^k
        return Ok(k as f64 / radius);
    }
    let riccati = mu.sqrt() * radius > RICCATI_SWITCH;
    let mut steps = SHOOT_STEPS;
    let mut coarse = shoot(radius, mu, k, steps, riccati);
    let mut disagreement = f64::INFINITY;
    for _ in 0..=MAX_DOUBLINGS {
        let fine = shoot(radius, mu, k, 2 * steps, riccati);
        disagreement = (fine - coarse).abs() / fine.abs().max(1.0 / radius);
        if disagreement.is_finite() && disagreement <= SHOOT_TOL {
            // one Richardson extrapolation step for the O(step^4) error
            return Ok(fine + (fine - coarse) / 15.0);
        }
        coarse = fine;
        steps *= 2;
    }
    Err(Error::ShootingBlowup { disagreement })
}

/// One RK4 pass from `r0 = 1e-6 R` to `R` in `s = ln r`.
fn shoot(radius: f64, mu: f64, k: u32, steps: usize, riccati: bool) -> f64 {
    let k2 = (k * k) as f64;
    let r0 = 1e-6 * radius;
    let (s0, s1) = (r0.ln(), radius.ln());
    let ds = (s1 - s0) / steps as f64;
    // regular series start, normalised by r0^k:
    //   g ~ r^k (1 + mu r^2 / (4(k+1))),  G = r g'
    let c = mu * r0 * r0 / (4.0 * (k as f64 + 1.0));
    let g0 = 1.0 + c;
    let big_g0 = k as f64 * (1.0 + c) + 2.0 * c;
    let potential = |s: f64| k2 + mu * (2.0 * s).exp();
    if riccati {
        // W = G / g,  W' = k^2 + mu r^2 - W^2
        let f = |s: f64, w: f64| potential(s) - w * w;
        let mut w = big_g0 / g0;
        for i in 0..steps {
            let s = s0 + i as f64 * ds;
            let a = f(s, w);
            let b = f(s + 0.5 * ds, w + 0.5 * ds * a);
            let c = f(s + 0.5 * ds, w + 0.5 * ds * b);
            let d = f(s + ds, w + ds * c);
            w += ds / 6.0 * (a + 2.0 * b + 2.0 * c + d);
        }
        w / radius
    } else {
        // g' = G,  G' = (k^2 + mu r^2) g
        let mut y = [g0, big_g0];
        let f = |s: f64, y: [f64; 2]| [y[1], potential(s) * y[0]];
        for i in 0..steps {
            let s = s0 + i as f64 * ds;
            let a = f(s, y);
            let b = f(s + 0.5 * ds, [y[0] + 0.5 * ds * a[0], y[1] + 0.5 * ds * a[1]]);
            let c = f(s + 0.5 * ds, [y[0] + 0.5 * ds * b[0], y[1] + 0.5 * ds * b[1]]);
            let d = f(s + ds, [y[0] + ds * c[0], y[1] + ds * c[1]]);
            for j in 0..2 {
                y[j] += ds / 6.0 * (a[j] + 2.0 * b[j] + 2.0 * c[j] + d[j]);
            }
            // rescale; the equation is linear
            if y[0].abs() > 1e100 {
                y = [y[0] * 1e-100, y[1] * 1e-100];
            }
        }
        y[1] / (y[0] * radius)
    }
}

/// `sigma(mu)`: the lowest branch (even parity for `m = 1`, and the
/// minimum over `k = 0, 1` for `m = 2`; higher `k` only increase).
pub fn sigma_of_mu(query: &BallFactorQuery) -> Result<f64> {
    query.validate()?;
    let (r, mu) = (query.radius, query.mu);
    match query.m {
        1 => Ok(sigma_mu_interval(r, mu, Parity::Even).min(sigma_mu_interval(r, mu, Parity::Odd))),
        _ => Ok(sigma_mu_disk(r, mu, 0)?.min(sigma_mu_disk(r, mu, 1)?)),
    }
}

/// Branch eigenvalues of the ball problem at `mu` that are `<= cutoff`, as
/// `(value, multiplicity)`, ascending. The lowest branch is always returned,
/// and so are both parities of the interval.
pub fn ball_branches(m: u32, radius: f64, mu: f64, cutoff: f64) -> Result<Vec<(f64, usize)>> {
    check_radius_mu(radius, mu)?;
    let mut out = match m {
        1 => vec![
            (sigma_mu_interval(radius, mu, Parity::Even), 1),
            (sigma_mu_interval(radius, mu, Parity::Odd), 1),
        ],
        2 => {
            let mut out = vec![(sigma_mu_disk(radius, mu, 0)?, 1)];
            // sigma_k >= k / R, so the scan terminates
            for k in 1u32.. {
                let sigma = sigma_mu_disk(radius, mu, k)?;
                if sigma > cutoff {
                    break;
                }
                out.push((sigma, 2));
            }
            out
        }
        _ => return Err(Error::UnsupportedDimension(m)),
    };
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

/// Modified Bessel functions by their power series.
pub mod bessel {
    /// `I_k(x) = sum_j (x/2)^(2j+k) / (j! (j+k)!)`, summed until terms stop
    /// changing the sum. All terms are positive, so there is no cancellation.
    pub fn bessel_i(k: u32, x: f64) -> f64 {
        let half = 0.5 * x;
        let mut term = 1.0;
        for j in 1..=k {
            term *= half / j as f64;
        }
        let mut sum = term;
        let q = half * half;
        for j in 1.. {
            term *= q / (j as f64 * (j + k) as f64);
            let next = sum + term;
            if next == sum {
                break;
            }
            sum = next;
        }
        sum
    }

    /// `sqrt(mu) I_k'(x) / I_k(x)` with `x = sqrt(mu) R`, using
    /// `I_k' = I_{k+1} + (k/x) I_k`.
    pub fn disk_sigma(radius: f64, mu: f64, k: u32) -> f64 {
        if mu == 0.0 {
            return k as f64 / radius;
        }
        let q = mu.sqrt();
        let x = q * radius;
        q * bessel_i(k + 1, x) / bessel_i(k, x) + k as f64 / radius
    }
}

/// One-dimensional finite-element discretisations of the ball quotients,
/// `int (|f'|^2 + mu f^2) / int_boundary f^2`.
pub mod discrete {
    /// Gauss-Legendre points and weights on `[0, 1]`.
    const GAUSS5: [(f64, f64); 5] = [
        (0.046_910_077_030_668_004, 0.118_463_442_528_094_54),
        (0.230_765_344_947_158_45, 0.239_314_335_249_683_23),
        (0.5, 0.284_444_444_444_444_45),
        (0.769_234_655_052_841_6, 0.239_314_335_249_683_23),
        (0.953_089_922_969_332, 0.118_463_442_528_094_54),
    ];

    /// Solve a symmetric tridiagonal system with the Thomas algorithm.
    fn thomas(diag: &[f64], off: &[f64], rhs: &[f64]) -> Vec<f64> {
        let n = diag.len();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut denom = diag[0];
        c[0] = if n > 1 { off[0] / denom } else { 0.0 };
        d[0] = rhs[0] / denom;
        for i in 1..n {
            denom = diag[i] - off[i - 1] * c[i - 1];
            if i + 1 < n {
                c[i] = off[i] / denom;
            }
            d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / denom;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        d
    }

    /// Both P1 eigenvalues `[even, odd]` of the interval problem on
    /// `[-R, R]` with `n` elements, via the 2x2 Schur complement onto the
    /// endpoints.
    pub fn interval_sigmas(radius: f64, mu: f64, n: usize) -> [f64; 2] {
        assert!(n >= 2);
        let h = 2.0 * radius / n as f64;
        let (kd, ko) = (1.0 / h, -1.0 / h);
        let (md, mo) = (h / 3.0, h / 6.0);
        let end = kd + mu * md;
        let off = ko + mu * mo;
        let mid = 2.0 * (kd + mu * md);
        // interior nodes 1..n-1
        let ni = n - 1;
        let diag = vec![mid; ni];
        let offs = vec![off; ni.saturating_sub(1)];
        let mut e_first = vec![0.0; ni];
        e_first[0] = 1.0;
        let x = thomas(&diag, &offs, &e_first);
        // by symmetry A_ii^{-1} e_last is x reversed
        let s00 = end - off * off * x[0];
        let s0n = -off * off * x[ni - 1];
        let (a, b) = (s00 + s0n, s00 - s0n);
        [a.min(b), a.max(b)]
    }

    /// P1 upper bound for branch `k` of the disk problem with `n` radial
    /// elements: `int_0^R (g'^2 + (k^2/r^2 + mu) g^2) r dr / (R g(R)^2)`.
    pub fn disk_radial_sigma(radius: f64, mu: f64, k: u32, n: usize) -> f64 {
        assert!(n >= 2);
        let h = radius / n as f64;
        let k2 = (k * k) as f64;
        let mut diag = vec![0.0; n + 1];
        let mut off = vec![0.0; n];
        for e in 0..n {
            let ra = e as f64 * h;
            let mut local = [[0.0; 2]; 2];
            for &(xi, w) in &GAUSS5 {
                let r = ra + xi * h;
                let phi = [1.0 - xi, xi];
                let dphi = [-1.0 / h, 1.0 / h];
                let weight = if k2 > 0.0 { k2 / r + mu * r } else { mu * r };
                for i in 0..2 {
                    for j in 0..2 {
                        local[i][j] += w * h * (dphi[i] * dphi[j] * r + weight * phi[i] * phi[j]);
                    }
                }
            }
            diag[e] += local[0][0];
            diag[e + 1] += local[1][1];
            off[e] += local[0][1];
        }
        // g(0) = 0 for k >= 1
        let first = if k > 0 { 1 } else { 0 };
        let interior_diag = &diag[first..n];
        let interior_off = &off[first..n - 1];
        let mut rhs = vec![0.0; interior_diag.len()];
        *rhs.last_mut().unwrap() = 1.0;
        let x = thomas(interior_diag, interior_off, &rhs);
        let coupling = off[n - 1];
        let schur = diag[n] - coupling * coupling * x.last().unwrap();
        schur / radius
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_closed_forms() {
        assert!((sigma_mu_interval(1.0, 1.0, Parity::Even) - 1f64.tanh()).abs() < 1e-15);
        assert_eq!(sigma_mu_interval(1.0, 0.0, Parity::Odd), 1.0);
        assert_eq!(sigma_mu_interval(1.0, 0.0, Parity::Even), 0.0);
        // small-mu limits: even ~ mu R, odd -> 1/R
        let mu = 1e-10;
        assert!((sigma_mu_interval(2.0, mu, Parity::Even) / (mu * 2.0) - 1.0).abs() < 1e-9);
        assert!((sigma_mu_interval(2.0, mu, Parity::Odd) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn disk_harmonic_branches() {
        for k in 0..5 {
            assert_eq!(sigma_mu_disk(1.0, 0.0, k).unwrap(), k as f64);
            assert_eq!(sigma_mu_disk(2.0, 0.0, k).unwrap(), k as f64 / 2.0);
        }
    }

    #[test]
    fn tiny_mu_shooting_tends_to_harmonic_value() {
        for k in 0..3 {
            let s = sigma_mu_disk(1.0, 1e-8, k).unwrap();
            let want = bessel::disk_sigma(1.0, 1e-8, k);
            assert!((s - want).abs() < 1e-10, "k={k}: {s} vs {want}");
        }
    }

    #[test]
    fn disk_matches_bessel_series() {
        let want = 1f64.sqrt() * bessel::bessel_i(1, 1.0) / bessel::bessel_i(0, 1.0);
        let got = sigma_mu_disk(1.0, 1.0, 0).unwrap();
        assert!((got - want).abs() <= 1e-10 * want, "{got} vs {want}");
    }

    #[test]
    fn bessel_series_known_values() {
        // I_0(1) and I_1(1) to 16 digits
        assert!((bessel::bessel_i(0, 1.0) - 1.266_065_877_752_008_4).abs() < 1e-15);
        assert!((bessel::bessel_i(1, 1.0) - 0.565_159_103_992_485).abs() < 1e-15);
        assert_eq!(bessel::bessel_i(0, 0.0), 1.0);
        assert_eq!(bessel::bessel_i(2, 0.0), 0.0);
    }

    #[test]
    fn large_mu_uses_riccati_and_tends_to_sqrt_mu() {
        let mu = 1e4;
        let s = sigma_of_mu(&BallFactorQuery { m: 2, radius: 1.0, mu, branch: Branch::Angular(0) }).unwrap();
        assert!((s / mu.sqrt() - 1.0).abs() < 0.01);
        let series = bessel::disk_sigma(1.0, mu, 0);
        assert!((s - series).abs() < 1e-8 * series);
    }

    #[test]
    fn sigma_of_mu_picks_lowest_branch() {
        let q = BallFactorQuery { m: 1, radius: 1.0, mu: 4.0, branch: Branch::Parity(Parity::Odd) };
        assert_eq!(sigma_of_mu(&q).unwrap(), 2.0 * 2f64.tanh());
        assert_eq!(q.branch_sigma().unwrap(), 2.0 / 2f64.tanh());
        let q = BallFactorQuery { m: 2, radius: 1.0, mu: 0.0, branch: Branch::Angular(3) };
        assert_eq!(sigma_of_mu(&q).unwrap(), 0.0);
        assert_eq!(q.branch_sigma().unwrap(), 3.0);
    }

    #[test]
    fn invalid_queries() {
        let q = BallFactorQuery { m: 3, radius: 1.0, mu: 1.0, branch: Branch::Angular(0) };
        assert!(matches!(sigma_of_mu(&q), Err(Error::UnsupportedDimension(3))));
        assert!(sigma_mu_disk(1.0, -1.0, 0).is_err());
        assert!(sigma_mu_disk(0.0, 1.0, 0).is_err());
        let q = BallFactorQuery { m: 1, radius: 1.0, mu: 1.0, branch: Branch::Angular(0) };
        assert!(q.branch_sigma().is_err());
    }

    #[test]
    fn branches_for_products() {
        let b = ball_branches(1, 1.0, 0.0, 10.0).unwrap();
        assert_eq!(b, vec![(0.0, 1), (1.0, 1)]);
        let b = ball_branches(2, 1.0, 0.0, 2.5).unwrap();
        assert_eq!(b, vec![(0.0, 1), (1.0, 2), (2.0, 2)]);
    }

    #[test]
    fn discrete_interval_converges_to_closed_form() {
        for mu in [0.0, 0.3, 1.0, 10.0] {
            let [even, odd] = discrete::interval_sigmas(1.0, mu, 20_000);
            assert!((even - sigma_mu_interval(1.0, mu, Parity::Even)).abs() < 1e-6, "mu={mu}");
            assert!((odd - sigma_mu_interval(1.0, mu, Parity::Odd)).abs() < 1e-6, "mu={mu}");
        }
    }

    #[test]
    fn radial_fem_is_an_upper_bound() {
        for mu in [0.0, 0.01, 1.0, 100.0] {
            for k in 0..3 {
                let fem = discrete::disk_radial_sigma(1.0, mu, k, 4000);
                let exact = bessel::disk_sigma(1.0, mu, k);
                assert!(fem >= exact - 1e-6, "mu={mu} k={k}: {fem} < {exact}");
                assert!(fem - exact < 1e-3 * exact.max(1.0), "mu={mu} k={k}: {fem} vs {exact}");
            }
        }
    }
}
