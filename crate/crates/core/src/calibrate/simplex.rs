//! Two-parameter Nelder-Mead with a single half-step restart on stall.
//!
//! Only orderings of objective values are used, so any monotone transform of
//! the objective (dB versus linear) yields the same sequence of points.

use crate::error::Error;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation<T> {
    pub x: [T; 2],
    pub value: T,
    /// Best value seen up to and including this evaluation.
    pub best: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxEvals,
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum<T> {
    pub x: [T; 2],
    pub value: T,
    pub trace: Vec<Evaluation<T>>,
    pub termination: Termination,
}

enum Halt {
    Done(Termination),
    Failed(Error),
}

struct Evaluator<'a, T, F> {
    f: &'a mut F,
    trace: Vec<Evaluation<T>>,
    best: ([T; 2], T),
    max_evals: usize,
    tol: T,
}

impl<T: Real, F: FnMut([T; 2]) -> crate::Result<T>> Evaluator<'_, T, F> {
    fn eval(&mut self, x: [T; 2]) -> Result<T, Halt> {
        if self.trace.len() >= self.max_evals {
            return Err(Halt::Done(Termination::MaxEvals));
        }
        let v = (self.f)(x).map_err(Halt::Failed)?;
        let v = if v.is_nan() { T::infinity() } else { v };
        if v < self.best.1 || self.trace.is_empty() {
            self.best = (x, v);
        }
        self.trace.push(Evaluation { x, value: v, best: self.best.1 });
        if self.best.1 <= self.tol {
            return Err(Halt::Done(Termination::Converged));
        }
        Ok(v)
    }
}

fn lerp<T: Real>(a: [T; 2], b: [T; 2], t: T) -> [T; 2] {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

/// Minimizes `f` from `x0` until a value `<= tol` is seen, the budget is
/// spent, or the simplex collapses twice.
///
/// The initial simplex has edge `step` and is rotated by `angle`.
pub fn minimize<T: Real, F>(
    mut f: F,
    x0: [T; 2],
    step: T,
    angle: T,
    max_evals: usize,
    tol: T,
) -> crate::Result<Minimum<T>>
where
    F: FnMut([T; 2]) -> crate::Result<T>,
{
    let mut ev = Evaluator {
        f: &mut f,
        trace: Vec::new(),
        best: (x0, T::infinity()),
        max_evals,
        tol,
    };
    let outcome = run(&mut ev, x0, step, angle);
    let termination = match outcome {
        Halt::Done(t) => t,
        Halt::Failed(e) => return Err(e),
    };
    Ok(Minimum {
        x: ev.best.0,
        value: ev.best.1,
        trace: ev.trace,
        termination,
    })
}

fn run<T: Real, F: FnMut([T; 2]) -> crate::Result<T>>(
    ev: &mut Evaluator<'_, T, F>,
    x0: [T; 2],
    step: T,
    angle: T,
) -> Halt {
    let f0 = match ev.eval(x0) {
        Ok(v) => v,
        Err(h) => return h,
    };
    let mut start = (x0, f0);
    for attempt in 0..2 {
        let h = if attempt == 0 { step } else { step * T::lit(0.5) };
        match descend(ev, start, h, angle) {
            Ok(()) => start = ev.best,
            Err(halt) => return halt,
        }
    }
    Halt::Done(Termination::Stalled)
}

/// Runs until the simplex collapses (`Ok`) or a halt condition fires.
fn descend<T: Real, F: FnMut([T; 2]) -> crate::Result<T>>(
    ev: &mut Evaluator<'_, T, F>,
    start: ([T; 2], T),
    h: T,
    angle: T,
) -> Result<(), Halt> {
    let (s, c) = angle.sin_cos();
    let x = start.0;
    let p1 = [x[0] + h * c, x[1] + h * s];
    let p2 = [x[0] - h * s, x[1] + h * c];
    let mut simplex = [(x, start.1), (p1, ev.eval(p1)?), (p2, ev.eval(p2)?)];
    let collapse = h * T::epsilon().sqrt() * T::lit(1e-3);
    let half = T::lit(0.5);
    loop {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("NaN mapped to +inf"));
        let diameter = simplex
            .iter()
            .map(|p| (p.0[0] - simplex[0].0[0]).hypot(p.0[1] - simplex[0].0[1]))
            .fold(T::zero(), T::max);
        if diameter <= collapse || simplex[0].1 == simplex[2].1 {
            return Ok(());
        }
        let centroid = lerp(simplex[0].0, simplex[1].0, half);
        let worst = simplex[2];
        let xr = lerp(centroid, worst.0, -T::one());
        let fr = ev.eval(xr)?;
        if fr < simplex[0].1 {
            let xe = lerp(centroid, worst.0, T::lit(-2.0));
            let fe = ev.eval(xe)?;
            simplex[2] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[1].1 {
            simplex[2] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let xc = lerp(centroid, xr, half);
                (xc, ev.eval(xc)?)
            } else {
                let xc = lerp(centroid, worst.0, half);
                (xc, ev.eval(xc)?)
            };
            if fc < worst.1.min(fr) {
                simplex[2] = (xc, fc);
            } else {
                let best = simplex[0].0;
                for p in simplex.iter_mut().skip(1) {
                    let x = lerp(best, p.0, half);
                    *p = (x, ev.eval(x)?);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bowl(x: [f64; 2]) -> crate::Result<f64> {
        Ok((x[0] - 0.3).powi(2) + 4.0 * (x[1] + 0.1).powi(2) + 0.5 * (x[0] - 0.3) * (x[1] + 0.1))
    }

    #[test]
    fn finds_quadratic_minimum() {
        let m = minimize(bowl, [0.0, 0.0], 0.1, 0.0, 500, 1e-20).unwrap();
        assert_eq!(m.termination, Termination::Converged);
        assert!((m.x[0] - 0.3).abs() < 1e-9 && (m.x[1] + 0.1).abs() < 1e-9, "{:?}", m.x);
    }

    #[test]
    fn reported_best_is_monotone_and_attained() {
        let m = minimize(bowl, [1.0, 1.0], 0.2, 0.7, 60, -1.0).unwrap();
        assert_eq!(m.termination, Termination::MaxEvals);
        assert_eq!(m.trace.len(), 60);
        assert!(m.trace.windows(2).all(|w| w[1].best <= w[0].best));
        let min_seen = m.trace.iter().map(|e| e.value).fold(f64::INFINITY, f64::min);
        assert_eq!(m.value, min_seen);
        assert!(m.trace.iter().any(|e| e.x == m.x && e.value == m.value));
    }

    #[test]
    fn already_at_target() {
        let m = minimize(|_| Ok(-200.0), [0.0, 0.0], 0.1, 0.0, 100, -80.0).unwrap();
        assert_eq!(m.trace.len(), 1);
        assert_eq!(m.termination, Termination::Converged);
    }

    #[test]
    fn flat_objective_stalls() {
        let m = minimize(|_| Ok(1.0), [0.0, 0.0], 0.1, 0.0, 100, 0.0).unwrap();
        assert_eq!(m.termination, Termination::Stalled);
        assert!(m.trace.len() < 10);
    }

    #[test]
    fn errors_propagate() {
        let r = minimize(|_| Err(Error::Singular("x")), [0.0, 0.0], 0.1, 0.0, 100, 0.0);
        assert!(r.is_err());
    }
}
