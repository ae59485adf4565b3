//! Randomized-benchmarking decay: synthetic data, `A p^m` fitting and process infidelity.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;
use crate::signal::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RbPoint<T> {
    /// Sequence length in Clifford gates.
    pub m: u32,
    pub survival: T,
    pub shots: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RbDataset<T> {
    pub points: Vec<RbPoint<T>>,
    /// Hilbert-space dimension: 2 for one qubit, 4 for two.
    pub dimension: u32,
}

fn check_dimension(d: u32) -> Result<()> {
    if d == 2 || d == 4 {
        Ok(())
    } else {
        invalid("dimension", format!("{d} must be 2 or 4"))
    }
}

impl<T: Real> RbDataset<T> {
    pub fn new(points: Vec<RbPoint<T>>, dimension: u32) -> Result<Self> {
        check_dimension(dimension)?;
        for p in &points {
            if p.m < 1 {
                return invalid("m", "sequence lengths must be >= 1");
            }
            if !(p.survival >= T::zero() && p.survival <= T::one()) {
                return invalid("survival", format!("{} outside [0, 1]", p.survival));
            }
            if p.shots < 1 {
                return invalid("shots", "must be >= 1");
            }
        }
        Ok(Self { points, dimension })
    }

    pub fn distinct_lengths(&self) -> usize {
        let mut ms: Vec<u32> = self.points.iter().map(|p| p.m).collect();
        ms.sort_unstable();
        ms.dedup();
        ms.len()
    }
}

fn check_model<T: Real>(a: T, p: T) -> Result<()> {
    if !(p > T::zero() && p <= T::one()) {
        return invalid("p", format!("{p} outside (0, 1]"));
    }
    if !(a > T::zero() && a <= T::one()) {
        return invalid("A", format!("{a} outside (0, 1]"));
    }
    Ok(())
}

/// Survival at each length drawn as `Binomial(shots, A p^m) / shots`.
pub fn gen_synthetic_rb<T: Real>(a: T, p: T, lengths: &[u32], shots: u64, seed: u64, dimension: u32) -> Result<RbDataset<T>> {
    check_model(a, p)?;
    if shots < 1 {
        return invalid("shots", "must be >= 1");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = lengths
        .iter()
        .map(|&m| {
            let q = (a * p.powi(m as i32)).as_f64();
            let k = Binomial::new(shots, q)
                .map_err(|e| Error::Invalid { name: "A p^m", reason: e.to_string() })?
                .sample(&mut rng);
            Ok(RbPoint { m, survival: T::lit(k as f64 / shots as f64), shots })
        })
        .collect::<Result<Vec<_>>>()?;
    RbDataset::new(points, dimension)
}

/// The infinite-shot limit: survival is exactly `A p^m`; `shots` only sets fit weights.
pub fn gen_exact_rb<T: Real>(a: T, p: T, lengths: &[u32], shots: u64, dimension: u32) -> Result<RbDataset<T>> {
    check_model(a, p)?;
    let points = lengths
        .iter()
        .map(|&m| RbPoint { m, survival: a * p.powi(m as i32), shots })
        .collect();
    RbDataset::new(points, dimension)
}

/// `e = (d^2 - 1)(1 - p) / d^2`.
pub fn process_infidelity<T: Real>(p: T, d: u32) -> Result<T> {
    check_dimension(d)?;
    if !(p > T::zero() && p <= T::one()) {
        return invalid("p", format!("{p} outside (0, 1]"));
    }
    let d2 = T::lit(f64::from(d * d));
    Ok((d2 - T::one()) * (T::one() - p) / d2)
}

/// Inverse of [`process_infidelity`].
pub fn decay_from_infidelity<T: Real>(e: T, d: u32) -> Result<T> {
    check_dimension(d)?;
    let d2 = T::lit(f64::from(d * d));
    let p = T::one() - e * d2 / (d2 - T::one());
    if !(e >= T::zero() && p > T::zero()) {
        return invalid("infidelity", format!("{e} maps outside p in (0, 1]"));
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitStatus {
    Converged,
    /// The unconstrained estimate left `(0, 1]` and was clamped.
    PClamped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RbFit<T> {
    pub a: T,
    pub p: T,
    pub a_stderr: T,
    pub p_stderr: T,
    pub process_infidelity: T,
    pub infidelity_stderr: T,
    pub dimension: u32,
    pub status: FitStatus,
    pub iterations: usize,
    /// `(m, A p^m)` at the input lengths, sorted by `m`.
    pub curve: Vec<(u32, T)>,
}

const MAX_ITERATIONS: usize = 500;

/// Weighted nonlinear least squares for `A p^m`.
///
/// Starts from a log-linear regression; weights are `shots / max(y(1-y), 1/shots)`
/// with `y` the model value, refreshed once after the first solve. Points are
/// put in a canonical order first, so the result ignores input order.
pub fn fit_decay<T: Real>(data: &RbDataset<T>) -> Result<RbFit<T>> {
    let data = RbDataset::new(data.points.clone(), data.dimension)?;
    if data.distinct_lengths() < 3 {
        return invalid("dataset", "fitting needs at least 3 distinct lengths");
    }
    let mut pts = data.points.clone();
    pts.sort_by(|x, y| (x.m, x.shots).cmp(&(y.m, y.shots)).then(x.survival.partial_cmp(&y.survival).expect("finite")));

    let (mut a, mut p) = log_linear_start(&pts);
    let mut status = FitStatus::Converged;
    if p > T::one() {
        p = T::one();
        status = FitStatus::PClamped;
    }
    let mut iterations = 0;
    let mut weights = vec![T::one(); pts.len()];
    for _ in 0..2 {
        for (w, pt) in weights.iter_mut().zip(&pts) {
            *w = weight(pt, model(a, p, pt.m));
        }
        let (na, np, it, clamped) = levenberg_marquardt(&pts, &weights, a, p)?;
        a = na;
        p = np;
        iterations += it;
        if clamped {
            status = FitStatus::PClamped;
        }
    }

    let n = T::from_usize_lossy(pts.len());
    let chi2 = pts
        .iter()
        .zip(&weights)
        .map(|(pt, &w)| w * (pt.survival - model(a, p, pt.m)).powi(2))
        .sum::<T>();
    let s2 = chi2 / (n - T::lit(2.0));
    let (jtj, _) = normal_equations(&pts, &weights, a, p);
    let det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
    let (a_var, p_var) = if det > T::zero() {
        (s2 * jtj[1][1] / det, s2 * jtj[0][0] / det)
    } else {
        (T::infinity(), T::infinity())
    };
    let d2 = T::lit(f64::from(data.dimension * data.dimension));
    let mut ms: Vec<u32> = pts.iter().map(|pt| pt.m).collect();
    ms.dedup();
    Ok(RbFit {
        a,
        p,
        a_stderr: a_var.sqrt(),
        p_stderr: p_var.sqrt(),
        process_infidelity: process_infidelity(p, data.dimension)?,
        infidelity_stderr: (d2 - T::one()) / d2 * p_var.sqrt(),
        dimension: data.dimension,
        status,
        iterations,
        curve: ms.into_iter().map(|m| (m, model(a, p, m))).collect(),
    })
}

fn model<T: Real>(a: T, p: T, m: u32) -> T {
    a * p.powi(m as i32)
}

fn weight<T: Real>(pt: &RbPoint<T>, y: T) -> T {
    let shots = T::lit(pt.shots as f64);
    let var = (y * (T::one() - y)).max(shots.recip());
    shots / var
}

fn log_linear_start<T: Real>(pts: &[RbPoint<T>]) -> (T, T) {
    let rows: Vec<(T, T)> = pts
        .iter()
        .map(|pt| {
            let floor = T::lit(0.5 / pt.shots as f64);
            (T::from_usize_lossy(pt.m as usize), pt.survival.max(floor).ln())
        })
        .collect();
    let n = T::from_usize_lossy(rows.len());
    let mx = rows.iter().map(|r| r.0).sum::<T>() / n;
    let my = rows.iter().map(|r| r.1).sum::<T>() / n;
    let sxy = rows.iter().map(|r| (r.0 - mx) * (r.1 - my)).sum::<T>();
    let sxx = rows.iter().map(|r| (r.0 - mx).powi(2)).sum::<T>();
    let slope = sxy / sxx;
    ((my - slope * mx).exp().min(T::one()), slope.exp())
}

/// `(J^T W J, J^T W r)` for parameters `(A, p)`.
fn normal_equations<T: Real>(pts: &[RbPoint<T>], w: &[T], a: T, p: T) -> ([[T; 2]; 2], [T; 2]) {
    let mut h = [[T::zero(); 2]; 2];
    let mut g = [T::zero(); 2];
    for (pt, &wi) in pts.iter().zip(w) {
        let pm1 = if pt.m == 0 { T::zero() } else { p.powi(pt.m as i32 - 1) };
        let j = [p * pm1, a * T::lit(f64::from(pt.m)) * pm1];
        let r = pt.survival - a * p * pm1;
        for (row, hrow) in h.iter_mut().enumerate() {
            for (col, hv) in hrow.iter_mut().enumerate() {
                *hv = *hv + wi * j[row] * j[col];
            }
            g[row] = g[row] + wi * j[row] * r;
        }
    }
    (h, g)
}

fn cost<T: Real>(pts: &[RbPoint<T>], w: &[T], a: T, p: T) -> T {
    pts.iter().zip(w).map(|(pt, &wi)| wi * (pt.survival - model(a, p, pt.m)).powi(2)).sum()
}

fn levenberg_marquardt<T: Real>(pts: &[RbPoint<T>], w: &[T], mut a: T, mut p: T) -> Result<(T, T, usize, bool)> {
    let mut lambda = T::lit(1e-3);
    let mut c = cost(pts, w, a, p);
    let mut clamped = false;
    for it in 1..=MAX_ITERATIONS {
        let (h, g) = normal_equations(pts, w, a, p);
        let h00 = h[0][0] * (T::one() + lambda);
        let h11 = h[1][1] * (T::one() + lambda);
        let det = h00 * h11 - h[0][1] * h[1][0];
        if det == T::zero() || !det.is_finite() {
            return Err(Error::Singular("decay fit normal equations"));
        }
        let da = (g[0] * h11 - h[0][1] * g[1]) / det;
        let dp = (h00 * g[1] - h[1][0] * g[0]) / det;
        let mut na = a + da;
        let mut np = p + dp;
        let mut hit = false;
        if np > T::one() {
            np = T::one();
            hit = true;
        } else if np <= T::zero() {
            np = T::epsilon();
            hit = true;
        }
        if na <= T::zero() {
            na = a * T::lit(0.5);
        }
        let nc = cost(pts, w, na, np);
        if nc <= c {
            let small = (na - a).abs() <= T::epsilon() * T::lit(4.0) * a.abs()
                && (np - p).abs() <= T::epsilon() * T::lit(4.0) * p.abs();
            a = na;
            p = np;
            clamped = hit;
            let settled = (c - nc) <= T::epsilon() * c;
            c = nc;
            lambda = (lambda * T::lit(0.1)).max(T::lit(1e-12));
            if small || (settled && c > T::zero()) || c == T::zero() {
                return Ok((a, p, it, clamped));
            }
        } else {
            lambda = lambda * T::lit(10.0);
            if lambda > T::lit(1e12) {
                return Ok((a, p, it, clamped));
            }
        }
    }
    Err(Error::NoConvergence(format!("decay fit after {MAX_ITERATIONS} iterations")))
}

/// Seed-to-seed spread of the fitted infidelity for a fixed synthetic design.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedSpread<T> {
    pub seeds: usize,
    pub median_infidelity: T,
    /// Sample standard deviation across seeds.
    pub std_infidelity: T,
    pub median_fit_stderr: T,
}

fn median<T: Real>(mut v: Vec<T>) -> T {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) * T::lit(0.5)
    }
}

/// Fits `seeds` independent datasets (streams derived from `base_seed`) in parallel.
pub fn infidelity_spread<T: Real>(
    a: T,
    p: T,
    lengths: &[u32],
    shots: u64,
    dimension: u32,
    base_seed: u64,
    seeds: usize,
) -> Result<SeedSpread<T>> {
    if seeds < 2 {
        return invalid("seeds", "spread needs at least 2 seeds");
    }
    let fits = (0..seeds as u64)
        .into_par_iter()
        .map(|k| fit_decay(&gen_synthetic_rb(a, p, lengths, shots, derive_seed(base_seed, k), dimension)?))
        .collect::<Result<Vec<_>>>()?;
    let e: Vec<T> = fits.iter().map(|f| f.process_infidelity).collect();
    let n = T::from_usize_lossy(seeds);
    let mean = e.iter().copied().sum::<T>() / n;
    let var = e.iter().map(|&x| (x - mean).powi(2)).sum::<T>() / (n - T::one());
    Ok(SeedSpread {
        seeds,
        median_infidelity: median(e),
        std_infidelity: var.sqrt(),
        median_fit_stderr: median(fits.iter().map(|f| f.infidelity_stderr).collect()),
    })
}

/// `2, 4, ..., 2^k` up to and including `max`.
pub fn doubling_lengths(max: u32) -> Vec<u32> {
    std::iter::successors(Some(2u32), |&m| m.checked_mul(2)).take_while(|&m| m <= max).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infidelity_conversion() {
        assert_eq!(process_infidelity(1.0, 2).unwrap(), 0.0);
        assert!((decay_from_infidelity(9.3e-4f64, 2).unwrap() - 0.99876).abs() < 1e-12);
        assert!((decay_from_infidelity(2.7e-2f64, 4).unwrap() - 0.9712).abs() < 1e-12);
        let p = 0.987f64;
        for d in [2, 4] {
            let e = process_infidelity(p, d).unwrap();
            assert!((decay_from_infidelity(e, d).unwrap() - p).abs() < 1e-15);
        }
        assert!(process_infidelity(1.01, 2).is_err());
        assert!(process_infidelity(0.9, 3).is_err());
    }

    #[test]
    fn generator_contract() {
        let ls = doubling_lengths(512);
        assert_eq!(ls, vec![2, 4, 8, 16, 32, 64, 128, 256, 512]);
        let a = gen_synthetic_rb(0.9f64, 0.99, &ls, 500, 4, 2).unwrap();
        let b = gen_synthetic_rb(0.9, 0.99, &ls, 500, 4, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, gen_synthetic_rb(0.9, 0.99, &ls, 500, 5, 2).unwrap());
        let flat = gen_synthetic_rb(0.9f64, 1.0, &ls, 100_000, 1, 2).unwrap();
        assert!(flat.points.iter().all(|pt| (pt.survival - 0.9).abs() < 0.01));
        let exact = gen_exact_rb(0.9, 0.99, &ls, 1000, 2).unwrap();
        assert_eq!(exact.points[1].survival, 0.9 * 0.99f64.powi(4));
        assert!(gen_synthetic_rb(1.1, 0.99, &ls, 10, 0, 2).is_err());
        assert!(gen_synthetic_rb(0.9, 0.99, &ls, 0, 0, 2).is_err());
    }

    #[test]
    fn exact_data_recovered() {
        let d = gen_exact_rb(0.9f64, 0.995, &doubling_lengths(512), 1000, 2).unwrap();
        let f = fit_decay(&d).unwrap();
        assert!((f.a - 0.9).abs() < 1e-9 && (f.p - 0.995).abs() < 1e-9, "{f:?}");
        assert_eq!(f.status, FitStatus::Converged);
        assert_eq!(f.curve.len(), 9);
    }

    #[test]
    fn perfect_gates_give_zero_infidelity() {
        let d = gen_exact_rb(0.97f64, 1.0, &doubling_lengths(64), 1000, 2).unwrap();
        let f = fit_decay(&d).unwrap();
        assert!(f.process_infidelity.abs() < 1e-12, "{f:?}");
    }

    #[test]
    fn growth_is_clamped_and_flagged() {
        let pts = [(2, 0.80), (4, 0.85), (8, 0.9)]
            .iter()
            .map(|&(m, s)| RbPoint { m, survival: s, shots: 1000 })
            .collect();
        let f = fit_decay(&RbDataset::new(pts, 2).unwrap()).unwrap();
        assert_eq!(f.status, FitStatus::PClamped);
        assert_eq!(f.p, 1.0);
    }

    #[test]
    fn needs_three_lengths() {
        let pts = [(2, 0.9), (2, 0.91), (4, 0.88)]
            .iter()
            .map(|&(m, s)| RbPoint { m, survival: s, shots: 100 })
            .collect();
        assert!(fit_decay(&RbDataset::new(pts, 2).unwrap()).is_err());
    }

    #[test]
    fn dataset_invariants() {
        let pt = |m, s| RbPoint { m, survival: s, shots: 10 };
        assert!(RbDataset::new(vec![pt(0, 0.5)], 2).is_err());
        assert!(RbDataset::new(vec![pt(1, 1.5)], 2).is_err());
        assert!(RbDataset::new(vec![pt(1, 0.5)], 3).is_err());
    }

    #[test]
    fn stderr_is_sane() {
        let ls = doubling_lengths(512);
        let p = decay_from_infidelity(9.3e-4f64, 2).unwrap();
        let spread = infidelity_spread(0.98, p, &ls, 1000, 2, 9, 40).unwrap();
        // fit standard error and seed spread describe the same scatter
        let ratio = spread.median_fit_stderr / spread.std_infidelity;
        assert!(ratio > 0.6 && ratio < 1.6, "{spread:?}");
    }
}
