//! Pole scanning: drive a solution along a fan of rays, watch for pole
//! proximity, dive onto each pole, fit its Laurent data, and continue
//! past it.
//!
//! Proximity is detected from the state itself: near a simple pole the
//! Newton point z + w/w' sits within a couple of scaled units and |w|
//! is large against the local scale |z|^{1/2}; the smooth square-root
//! growth of the far field never satisfies both at once. The fan is
//! spaced so adjacent rays pass within the trigger range of every
//! in-region pole.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{AdvanceEnd, Cursor, Field};
use crate::integrator::{Flow, IntegratorConfig};
use crate::laurent::{self, PoleRecord};
use crate::parallel;

type C = Complex64;

/// An annular sector to scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub r_min: f64,
    pub r_max: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    /// Number of scan rays; 0 lets the scanner pick the density that
    /// guarantees adjacent string crossings closer than half the local
    /// pole spacing.
    pub ray_count: usize,
}

impl Region {
    pub fn sector(r_min: f64, r_max: f64, theta_min: f64, theta_max: f64) -> Region {
        Region { r_min, r_max, theta_min, theta_max, ray_count: 0 }
    }

    pub fn full_annulus(r_min: f64, r_max: f64) -> Region {
        Self::sector(r_min, r_max, -std::f64::consts::PI, std::f64::consts::PI)
    }

    pub fn validate(&self) -> Result<()> {
        if self.r_min < 1.0 {
            return Err(Error::InvalidInput("r_min must be at least 1".into()));
        }
        if self.r_max <= self.r_min {
            return Err(Error::InvalidInput("r_max must exceed r_min".into()));
        }
        if self.theta_max < self.theta_min {
            return Err(Error::InvalidInput("angles must be ordered".into()));
        }
        Ok(())
    }

    pub fn angular_span(&self) -> f64 {
        self.theta_max - self.theta_min
    }

    /// Default fan density: transverse ray spacing at the outer radius
    /// below half the local pole spacing π·r^{-1/2}/2.
    pub fn auto_ray_count(&self) -> usize {
        let dtheta = 0.5 * std::f64::consts::PI * self.r_max.powf(-1.5) * 0.5;
        ((self.angular_span() / dtheta).ceil() as usize).max(3)
    }

    pub fn rays(&self) -> usize {
        if self.ray_count == 0 {
            self.auto_ray_count()
        } else {
            self.ray_count
        }
    }

    pub fn contains(&self, p: C) -> bool {
        let r = p.norm();
        if r < self.r_min - 1e-9 || r > self.r_max + 1e-9 {
            return false;
        }
        let span = self.angular_span();
        if span >= 2.0 * std::f64::consts::PI - 1e-12 {
            return true;
        }
        let d = (p.arg() - self.theta_min).rem_euclid(2.0 * std::f64::consts::PI);
        d <= span + 1e-9
    }
}

/// Scan tuning knobs.
#[derive(Debug, Clone, Copy)]
pub struct ScanOptions {
    pub integrator: IntegratorConfig,
    /// Run rays on the thread pool (when the `parallel` feature is on).
    pub parallel: bool,
    /// Two records merge when |p - p'|·|p|^{1/2} falls below this.
    pub merge_epsilon: f64,
    /// Capture attempts allowed per ray.
    pub capture_budget: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            integrator: IntegratorConfig::with_tol(1e-9),
            parallel: true,
            merge_epsilon: 0.1,
            capture_budget: 4000,
        }
    }
}

/// Per-ray diagnostics; rays that failed mid-flight still contribute
/// the poles they found.
#[derive(Debug, Clone)]
pub struct RayDiagnostic {
    pub theta: f64,
    pub captures: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ScanOutcome {
    /// Deduplicated records ordered by (|p|, arg p).
    pub poles: Vec<PoleRecord>,
    pub rays: Vec<RayDiagnostic>,
    /// True when at least one ray reported an error.
    pub partial: bool,
}

fn scaled_dist(a: C, b: C) -> f64 {
    (a - b).norm() * a.norm().max(1.0).sqrt()
}

/// Pole-proximity trigger on a streamed state.
fn near_pole(s: &crate::solution::OdeState) -> Option<C> {
    let scale = s.z.norm().max(1.0).sqrt();
    if s.w.norm() < 0.35 * scale {
        return None;
    }
    if s.wp.norm() == 0.0 {
        return None;
    }
    let newton = s.w / s.wp;
    if newton.norm() * scale > 1.8 {
        return None;
    }
    Some(s.z + newton)
}

/// Walk onto the pole the trigger pointed at and fit it. The cursor is
/// left in the pole's fitting window.
pub(crate) fn dive(cursor: &mut Cursor<'_>, alpha: C, cfg: &IntegratorConfig) -> Result<PoleRecord> {
    let mut tail: Vec<crate::solution::OdeState> = Vec::new();
    let b = cfg.blowup_threshold;
    for _ in 0..200 {
        let s = cursor.state()?;
        tail.push(s);
        if s.w.norm() >= 0.9 * b {
            break;
        }
        if s.wp.norm() == 0.0 {
            return Err(Error::FitDiverged("derivative vanished during dive".into()));
        }
        let newton = s.w / s.wp;
        let step = newton * 0.7;
        let target = s.z + step;
        let end = cursor.advance(target, |st| {
            tail.push(*st);
            Flow::Continue
        })?;
        if end == AdvanceEnd::Blowup {
            tail.extend(cursor.pole_tail());
            break;
        }
    }
    laurent::fit_pole_with(&tail, alpha, b)
}

/// Scan one ray: approach from the seed to the inner radius, then walk
/// outward capturing every pole within trigger range.
fn scan_ray(field: &Field, theta: f64, region: &Region, opts: &ScanOptions) -> Result<(Vec<PoleRecord>, usize)> {
    let alpha = field.alpha();
    let cfg = opts.integrator;
    let mut cursor = field.cursor(&cfg);
    let dir = C::from_polar(1.0, theta);
    let start = dir * region.r_min;
    let outer = dir * region.r_max;

    let mut records: Vec<PoleRecord> = Vec::new();
    let mut captures = 0usize;

    // seed-to-start approach may cross poles; keep whatever was fitted
    cursor.goto(start)?;
    records.extend(cursor.take_crossed_poles());

    let mut suppressed: Vec<C> = records.iter().map(|r| r.p).collect();

    loop {
        if captures >= opts.capture_budget {
            return Err(Error::MaxStepsExceeded(captures));
        }
        let mut trigger: Option<C> = None;
        let end = cursor.advance(outer, |s| {
            if let Some(p_hat) = near_pole(s) {
                let fresh = suppressed
                    .iter()
                    .all(|&q| scaled_dist(q, s.z) > 2.2 && scaled_dist(q, p_hat) > 0.6);
                if fresh && p_hat.norm() <= region.r_max * 1.05 + 2.0 {
                    trigger = Some(p_hat);
                    return Flow::Stop;
                }
            }
            Flow::Continue
        })?;

        match end {
            AdvanceEnd::Reached => break,
            AdvanceEnd::Stopped => {
                let _ = trigger;
                captures += 1;
                match dive(&mut cursor, alpha, &cfg) {
                    Ok(rec) => {
                        suppressed.push(rec.p);
                        let duplicate = records
                            .iter()
                            .any(|r| scaled_dist(r.p, rec.p) < opts.merge_epsilon);
                        if !duplicate {
                            records.push(rec);
                        }
                        cursor.hop(&rec, dir)?;
                    }
                    Err(_) => {
                        // not a clean pole approach; push on from just
                        // past the current position
                        let z = cursor.z();
                        let nudge = z + dir * (0.3 * z.norm().max(1.0).powf(-0.5));
                        cursor.goto(nudge)?;
                        records.extend(cursor.take_crossed_poles());
                        suppressed = records.iter().map(|r| r.p).collect();
                    }
                }
            }
            AdvanceEnd::Blowup => {
                captures += 1;
                let rec = cursor.fit_blowup_pole()?;
                suppressed.push(rec.p);
                let duplicate = records
                    .iter()
                    .any(|r| scaled_dist(r.p, rec.p) < opts.merge_epsilon);
                if !duplicate {
                    records.push(rec);
                }
                cursor.hop(&rec, dir)?;
            }
        }
    }

    Ok((records, captures))
}

/// Scan the region with a fan of rays and return the deduplicated,
/// deterministically ordered pole set.
pub fn scan_poles(field: &Field, region: &Region, opts: &ScanOptions) -> Result<ScanOutcome> {
    region.validate()?;
    let n_rays = region.rays();
    let span = region.angular_span();
    let full_circle = span >= 2.0 * std::f64::consts::PI - 1e-12;
    let thetas: Vec<f64> = (0..n_rays)
        .map(|i| {
            if full_circle {
                // avoid the duplicate seam ray
                region.theta_min + span * i as f64 / n_rays as f64
            } else if n_rays == 1 {
                0.5 * (region.theta_min + region.theta_max)
            } else {
                region.theta_min + span * i as f64 / (n_rays - 1) as f64
            }
        })
        .collect();

    let results = parallel::map_ordered(opts.parallel, thetas.clone(), |theta| {
        scan_ray(field, theta, region, opts)
    });

    let mut rays = Vec::with_capacity(n_rays);
    let mut all: Vec<PoleRecord> = Vec::new();
    let mut partial = false;
    for (theta, res) in thetas.into_iter().zip(results) {
        match res {
            Ok((records, captures)) => {
                all.extend(records);
                rays.push(RayDiagnostic { theta, captures, error: None });
            }
            Err(e) => {
                partial = true;
                rays.push(RayDiagnostic { theta, captures: 0, error: Some(e.to_string()) });
            }
        }
    }

    let poles = dedup_poles(all, opts.merge_epsilon)
        .into_iter()
        .filter(|r| region.contains(r.p))
        .collect();

    Ok(ScanOutcome { poles, rays, partial })
}

/// Merge records closer than `eps` scaled units, keeping the best fit.
/// Ordering is (|p|, arg p), which makes the outcome independent of the
/// ray execution order.
pub fn dedup_poles(mut records: Vec<PoleRecord>, eps: f64) -> Vec<PoleRecord> {
    records.sort_by(|a, b| {
        a.p.norm()
            .total_cmp(&b.p.norm())
            .then(a.p.arg().total_cmp(&b.p.arg()))
    });
    let mut out: Vec<PoleRecord> = Vec::with_capacity(records.len());
    for rec in records {
        let mut merged = false;
        // only nearby-in-radius candidates can collide
        for kept in out.iter_mut().rev() {
            if rec.p.norm() - kept.p.norm() > 2.0 * eps {
                break;
            }
            if scaled_dist(kept.p, rec.p) < eps {
                if rec.fit_residual < kept.fit_residual {
                    *kept = rec;
                }
                merged = true;
                break;
            }
        }
        if !merged {
            out.push(rec);
        }
    }
    out
}
