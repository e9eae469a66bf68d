//! Dormand–Prince 5(4) embedded pair over complex paths, with the
//! standard order-4 dense output. Steps are taken in the arclength
//! parameter of the current path segment; the chain rule brings in the
//! segment tangent.

use num_complex::Complex64;

use super::systems::OdeSystem;
use super::{IntegratorConfig, PathSpec};
use crate::error::{Error, Result};

type C = Complex64;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One accepted step, exposed to observers.
pub struct StepRecord<'a, const N: usize> {
    /// Position at the start and end of the step.
    pub z0: C,
    pub z1: C,
    pub y0: &'a [C; N],
    pub y1: &'a [C; N],
    /// Arclength step size.
    pub h: f64,
    k: &'a [[C; N]; 7],
}

impl<'a, const N: usize> StepRecord<'a, N> {
    /// Dense evaluation of the solution at fraction `theta` of the step.
    pub fn dense(&self, theta: f64) -> [C; N] {
        let t1 = 1.0 - theta;
        let mut out = [C::new(0.0, 0.0); N];
        for i in 0..N {
            let dy = self.y1[i] - self.y0[i];
            let r1 = self.y0[i];
            let r2 = dy;
            let r3 = self.k[0][i] * self.h - dy;
            let r4 = dy - self.k[6][i] * self.h - r3;
            let r5 = (self.k[0][i] * D1
                + self.k[2][i] * D3
                + self.k[3][i] * D4
                + self.k[4][i] * D5
                + self.k[5][i] * D6
                + self.k[6][i] * D7)
                * self.h;
            out[i] = r1 + (r2 + (r3 + (r4 + r5 * t1) * theta) * t1) * theta;
        }
        out
    }

    /// Position at fraction `theta` of the step (exact on each segment).
    pub fn z_at(&self, theta: f64, seg_point: impl Fn(f64) -> C, s0: f64) -> C {
        seg_point(s0 + theta * self.h)
    }
}

/// Why a drive ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Halt {
    /// Reached the end of the path.
    Completed,
    /// |monitored component| exceeded the blow-up threshold.
    Blowup,
    /// The observer asked to stop.
    Stopped,
}

/// Outcome of [`drive`].
pub struct DriveOutcome<const N: usize> {
    pub z: C,
    pub y: [C; N],
    pub halt: Halt,
    pub steps: usize,
}

/// Observer control flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Flow {
    Continue,
    Stop,
}

/// Integrate `system` from `y0` along `path`, streaming accepted steps
/// to `observer`. The error estimate uses the mixed absolute/relative
/// tolerance of `cfg`; near a pole approach the step is capped by
/// 0.2/|w| so the trajectory samples the fitting window instead of
/// overshooting it.
pub fn drive<const N: usize, S, F>(
    system: &S,
    y0: [C; N],
    path: &PathSpec,
    cfg: &IntegratorConfig,
    mut observer: F,
) -> Result<DriveOutcome<N>>
where
    S: OdeSystem<N>,
    F: FnMut(&StepRecord<'_, N>) -> Flow,
{
    cfg.validate()?;
    path.validate()?;

    let monitored = system.blowup_component();
    let mut y = y0;
    let mut z = path.start();
    let mut steps_total = 0usize;
    let mut h_carry: Option<f64> = None;

    for seg in path.segments() {
        let len = seg.length();
        if len < cfg.min_step {
            z = seg.end();
            continue;
        }
        let mut s = 0.0f64;
        // tangent changes between segments, so FSAL restarts here
        let mut k: [[C; N]; 7] = [[C::new(0.0, 0.0); N]; 7];
        let mut f_cur = scaled_rhs(system, seg.point(s), &y, seg.tangent(s));

        let mut h = h_carry
            .unwrap_or_else(|| initial_step(&f_cur, &y, cfg))
            .min(len);

        loop {
            if s >= len * (1.0 - 1e-14) {
                break;
            }
            if steps_total >= cfg.max_steps {
                return Err(Error::MaxStepsExceeded(cfg.max_steps));
            }

            h = h.min(len - s);
            if let Some(m) = monitored {
                let wm = y[m].norm();
                if wm > 2.0 * (1.0 + z.norm().sqrt()) {
                    h = h.min(0.2 / wm);
                }
            }
            if h < cfg.min_step {
                let near_pole = monitored
                    .map(|m| y[m].norm() > 0.5 * cfg.blowup_threshold)
                    .unwrap_or(false);
                if near_pole {
                    // effectively at the pole; report as blow-up below
                    return Ok(DriveOutcome {
                        z,
                        y,
                        halt: Halt::Blowup,
                        steps: steps_total,
                    });
                }
                return Err(Error::StepUnderflow {
                    z,
                    required: h,
                    min_step: cfg.min_step,
                });
            }

            steps_total += 1;

            // stage evaluations
            k[0] = f_cur;
            let stage = |ss: f64, yy: &[C; N]| -> [C; N] {
                scaled_rhs(system, seg.point(ss), yy, seg.tangent(ss))
            };
            let mut yt = [C::new(0.0, 0.0); N];

            for i in 0..N {
                yt[i] = y[i] + k[0][i] * (A21 * h);
            }
            k[1] = stage(s + C2 * h, &yt);
            for i in 0..N {
                yt[i] = y[i] + (k[0][i] * A31 + k[1][i] * A32) * h;
            }
            k[2] = stage(s + C3 * h, &yt);
            for i in 0..N {
                yt[i] = y[i] + (k[0][i] * A41 + k[1][i] * A42 + k[2][i] * A43) * h;
            }
            k[3] = stage(s + C4 * h, &yt);
            for i in 0..N {
                yt[i] =
                    y[i] + (k[0][i] * A51 + k[1][i] * A52 + k[2][i] * A53 + k[3][i] * A54) * h;
            }
            k[4] = stage(s + C5 * h, &yt);
            for i in 0..N {
                yt[i] = y[i]
                    + (k[0][i] * A61 + k[1][i] * A62 + k[2][i] * A63 + k[3][i] * A64
                        + k[4][i] * A65)
                        * h;
            }
            k[5] = stage(s + h, &yt);
            let mut y1 = [C::new(0.0, 0.0); N];
            for i in 0..N {
                y1[i] = y[i]
                    + (k[0][i] * A71 + k[2][i] * A73 + k[3][i] * A74 + k[4][i] * A75
                        + k[5][i] * A76)
                        * h;
            }
            k[6] = stage(s + h, &y1);

            // error estimate
            let mut err_sq = 0.0f64;
            for i in 0..N {
                let e = (k[0][i] * E1
                    + k[2][i] * E3
                    + k[3][i] * E4
                    + k[4][i] * E5
                    + k[5][i] * E6
                    + k[6][i] * E7)
                    * h;
                let sc = cfg.abs_tol + cfg.rel_tol * y[i].norm().max(y1[i].norm());
                err_sq += (e.norm() / sc).powi(2);
            }
            let err = (err_sq / N as f64).sqrt();

            if err <= 1.0 {
                let z1 = seg.point(s + h);
                let rec = StepRecord {
                    z0: z,
                    z1,
                    y0: &y,
                    y1: &y1,
                    h,
                    k: &k,
                };
                let flow = observer(&rec);
                s += h;
                z = z1;
                y = y1;
                f_cur = k[6]; // FSAL

                if flow == Flow::Stop {
                    return Ok(DriveOutcome {
                        z,
                        y,
                        halt: Halt::Stopped,
                        steps: steps_total,
                    });
                }
                if let Some(m) = monitored {
                    if y[m].norm() > cfg.blowup_threshold {
                        return Ok(DriveOutcome {
                            z,
                            y,
                            halt: Halt::Blowup,
                            steps: steps_total,
                        });
                    }
                }
                let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 5.0);
                h *= fac;
            } else {
                let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
                h *= fac;
            }
        }
        h_carry = Some(h);
    }

    Ok(DriveOutcome {
        z,
        y,
        halt: Halt::Completed,
        steps: steps_total,
    })
}

fn scaled_rhs<const N: usize, S: OdeSystem<N>>(system: &S, z: C, y: &[C; N], tangent: C) -> [C; N] {
    let mut f = system.rhs(z, y);
    for fi in f.iter_mut() {
        *fi *= tangent;
    }
    f
}

fn initial_step<const N: usize>(f0: &[C; N], y0: &[C; N], cfg: &IntegratorConfig) -> f64 {
    let mut d0 = 0.0f64;
    let mut d1 = 0.0f64;
    for i in 0..N {
        let sc = cfg.abs_tol + cfg.rel_tol * y0[i].norm();
        d0 += (y0[i].norm() / sc).powi(2);
        d1 += (f0[i].norm() / sc).powi(2);
    }
    let d0 = (d0 / N as f64).sqrt();
    let d1 = (d1 / N as f64).sqrt();
    if d1 < 1e-10 {
        1e-4
    } else {
        (0.01 * d0.max(1e-6) / d1).clamp(1e-10, 0.1)
    }
}
