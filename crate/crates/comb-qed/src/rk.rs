//! Adaptive Dormand–Prince 5(4) stepper on dense complex matrices.
//!
//! Generic over the right-hand side; dense output between accepted steps is
//! cubic Hermite interpolation using the FSAL derivatives at both ends.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{CombError, Result};

const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [&[f64]; 6] = [
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
    ],
    &[
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
    ],
    &[
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// b − b̂ (5th-order weights minus embedded 4th-order weights).
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const MIN_SCALE: f64 = 0.2;
const MAX_SCALE: f64 = 5.0;
const SAFETY: f64 = 0.9;

pub(crate) struct Dopri5 {
    k: [DMatrix<Complex64>; 7],
    y_try: DMatrix<Complex64>,
    pub rtol: f64,
    pub atol: f64,
}

/// One accepted step, exposed so callers can interpolate output samples.
pub(crate) struct StepRecord<'a> {
    pub t0: f64,
    pub h: f64,
    pub y0: &'a DMatrix<Complex64>,
    pub y1: &'a DMatrix<Complex64>,
    pub f0: &'a DMatrix<Complex64>,
    pub f1: &'a DMatrix<Complex64>,
}

impl StepRecord<'_> {
    /// Cubic Hermite interpolation at t ∈ [t0, t0 + h].
    pub fn interpolate(&self, t: f64) -> DMatrix<Complex64> {
        let s = (t - self.t0) / self.h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let ch = |x: f64| Complex64::new(x, 0.0);
        self.y0 * ch(h00)
            + self.f0 * ch(h10 * self.h)
            + self.y1 * ch(h01)
            + self.f1 * ch(h11 * self.h)
    }
}

impl Dopri5 {
    pub fn new(template: &DMatrix<Complex64>, rtol: f64, atol: f64) -> Self {
        let z = DMatrix::zeros(template.nrows(), template.ncols());
        Dopri5 {
            k: [
                z.clone(),
                z.clone(),
                z.clone(),
                z.clone(),
                z.clone(),
                z.clone(),
                z.clone(),
            ],
            y_try: z,
            rtol,
            atol,
        }
    }

    /// Integrate from `t0` to `t_end`, calling `observe` after every accepted
    /// step. The RHS writes dy/dt for (t, y) into its third argument.
    pub fn integrate<F, O>(
        &mut self,
        mut rhs: F,
        y: &mut DMatrix<Complex64>,
        t0: f64,
        t_end: f64,
        mut observe: O,
    ) -> Result<()>
    where
        F: FnMut(f64, &DMatrix<Complex64>, &mut DMatrix<Complex64>),
        O: FnMut(&StepRecord) -> Result<()>,
    {
        if t_end <= t0 {
            return Ok(());
        }
        let mut t = t0;
        let mut h = self.initial_step(&mut rhs, y, t0, t_end);
        rhs(t, y, &mut self.k[0]);
        let mut y0 = y.clone();
        let mut first_same_as_last = true;
        let mut rejected_in_a_row = 0usize;
        while t < t_end {
            h = h.min(t_end - t);
            if h < 1e-12 * t_end.abs().max(1.0) {
                return Err(CombError::IntegrationFailure {
                    t_last: t,
                    reason: "step size underflow".into(),
                });
            }
            if !first_same_as_last {
                rhs(t, &y0, &mut self.k[0]);
                first_same_as_last = true;
            }
            // stages 2..7
            for stage in 0..6 {
                self.y_try.copy_from(&y0);
                for (j, &a) in A[stage].iter().enumerate() {
                    if a != 0.0 {
                        self.y_try.zip_apply(&self.k[j], |v, kv| {
                            *v += Complex64::new(h * a, 0.0) * kv
                        });
                    }
                }
                let ts = t + C[stage] * h;
                let (head, tail) = self.k.split_at_mut(stage + 1);
                let _ = head;
                rhs(ts, &self.y_try, &mut tail[0]);
            }
            // 5th-order solution is stage 7's argument (b row == A[5])
            // error estimate from E weights
            let mut err: f64 = 0.0;
            let n = y0.len();
            {
                let ks: Vec<&[Complex64]> = self.k.iter().map(|k| k.as_slice()).collect();
                let y0s = y0.as_slice();
                let y1s = self.y_try.as_slice();
                for i in 0..n {
                    let mut e = Complex64::default();
                    for (j, &w) in E.iter().enumerate() {
                        if w != 0.0 {
                            e += Complex64::new(h * w, 0.0) * ks[j][i];
                        }
                    }
                    let sc = self.atol + self.rtol * y0s[i].norm().max(y1s[i].norm());
                    let r = e.norm() / sc;
                    err += r * r;
                }
            }
            err = (err / n as f64).sqrt();
            if err <= 1.0 {
                // accept; k7 (last stage) is the derivative at the new point
                let t_new = t + h;
                {
                    let rec = StepRecord {
                        t0: t,
                        h,
                        y0: &y0,
                        y1: &self.y_try,
                        f0: &self.k[0],
                        f1: &self.k[6],
                    };
                    observe(&rec)?;
                }
                t = t_new;
                std::mem::swap(&mut y0, &mut self.y_try);
                self.k.swap(0, 6); // FSAL
                first_same_as_last = true;
                rejected_in_a_row = 0;
                let scale = if err == 0.0 {
                    MAX_SCALE
                } else {
                    (SAFETY * err.powf(-0.2)).clamp(MIN_SCALE, MAX_SCALE)
                };
                h *= scale;
            } else {
                rejected_in_a_row += 1;
                if rejected_in_a_row > 60 {
                    return Err(CombError::IntegrationFailure {
                        t_last: t,
                        reason: "repeated step rejection".into(),
                    });
                }
                h *= (SAFETY * err.powf(-0.2)).clamp(MIN_SCALE, 1.0);
            }
        }
        y.copy_from(&y0);
        Ok(())
    }

    fn initial_step<F>(
        &mut self,
        rhs: &mut F,
        y: &DMatrix<Complex64>,
        t0: f64,
        t_end: f64,
    ) -> f64
    where
        F: FnMut(f64, &DMatrix<Complex64>, &mut DMatrix<Complex64>),
    {
        // cheap heuristic: h ~ tol^(1/5) / ‖f‖, clamped to the window
        rhs(t0, y, &mut self.k[1]);
        let fnorm = self.k[1].iter().map(|z| z.norm()).fold(0.0, f64::max);
        let span = t_end - t0;
        if fnorm < 1e-12 {
            return 1e-2 * span;
        }
        (0.1 / fnorm).min(1e-1 * span).max(1e-8 * span)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_exponential_decay() {
        // dy/dt = −y, y(0) = 1 → e^{−t}
        let mut y = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        let mut solver = Dopri5::new(&y, 1e-10, 1e-12);
        solver
            .integrate(
                |_t, y, out| out.copy_from(&(-y)),
                &mut y,
                0.0,
                3.0,
                |_| Ok(()),
            )
            .unwrap();
        assert!((y[(0, 0)].re - (-3.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn oscillator_phase_accuracy() {
        // dy/dt = i·ω·y over many periods
        let om = 2.0 * std::f64::consts::PI;
        let mut y = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        let mut solver = Dopri5::new(&y, 1e-10, 1e-12);
        solver
            .integrate(
                |_t, y, out| out.copy_from(&(y * Complex64::new(0.0, om))),
                &mut y,
                0.0,
                10.0,
                |_| Ok(()),
            )
            .unwrap();
        assert!((y[(0, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-7);
    }

    #[test]
    fn dense_output_matches_true_solution() {
        let mut y = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        let mut solver = Dopri5::new(&y, 1e-9, 1e-12);
        let mut worst: f64 = 0.0;
        solver
            .integrate(
                |_t, y, out| out.copy_from(&(-y)),
                &mut y,
                0.0,
                2.0,
                |rec| {
                    let tm = rec.t0 + 0.5 * rec.h;
                    let interp = rec.interpolate(tm)[(0, 0)].re;
                    worst = worst.max((interp - (-tm).exp()).abs());
                    Ok(())
                },
            )
            .unwrap();
        assert!(worst < 1e-6, "interpolation error {worst}");
    }
}
