//! Contour residue count: (1/2πi)·∮ w dz over the circle |z| = r,
//! detoured around any pole closer than δ scaled units so the count
//! n₊(r) − n₋(r) is read off the quadrature.
//!
//! The circle is walked as a fine inscribed polygon (the integrand is
//! analytic away from poles, so chords give the same integral as arcs
//! while the winding around every pole is preserved by keeping the
//! sagitta small against the admissible margin). A scan prepass along
//! the contour finds the poles that need detours; detour arcs keep a
//! pole with |p| ≤ r inside the contour and a pole with |p| > r
//! outside.

use num_complex::Complex64;

use super::scan::{dedup_poles, ScanOptions};
use crate::error::{Error, Result};
use crate::field::{AdvanceEnd, Field};
use crate::integrator::Flow;
use crate::laurent::PoleRecord;

type C = Complex64;

const TAU: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct ContourCount {
    /// (1/2πi)·∮ w dz before rounding.
    pub raw: C,
    pub rounded: i64,
    /// |Im raw|; the count of a closed contour must be real.
    pub im_residual: f64,
    /// Poles that forced a detour.
    pub detours: Vec<PoleRecord>,
}

/// Vertices of the detoured polygon, starting and ending at angle π.
fn build_path(r: f64, delta: f64, near: &[PoleRecord]) -> Result<Vec<C>> {
    // chord angle keeps the sagitta a small fraction of the margin
    let dtheta = (0.8 * delta).sqrt() * r.powf(-0.75) * 0.5;
    let n = ((TAU / dtheta).ceil() as usize).max(256);

    // detour windows in angle, sorted
    struct Window {
        lo: f64,
        hi: f64,
        pole: PoleRecord,
        rho: f64,
    }
    let mut windows: Vec<Window> = Vec::new();
    for rec in near {
        let rho = delta * rec.p.norm().max(1.0).powf(-0.5);
        let d = rec.p.norm();
        let dist = (d - r).abs();
        if dist >= rho {
            continue;
        }
        // angular half-width of the circle arc inside the detour disc
        let cos_half = ((r * r + d * d - rho * rho) / (2.0 * r * d)).clamp(-1.0, 1.0);
        let half = cos_half.acos();
        let center = rec.p.arg();
        windows.push(Window { lo: center - half, hi: center + half, pole: *rec, rho });
    }
    windows.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    for pair in windows.windows(2) {
        if pair[1].lo < pair[0].hi {
            return Err(Error::PoleOnContour(pair[0].pole.p));
        }
    }

    let start = std::f64::consts::PI;
    for w in &windows {
        let lo = (w.lo - start).rem_euclid(TAU);
        let hi = (w.hi - start).rem_euclid(TAU);
        if lo < 1e-9 || hi < 1e-9 || lo > hi {
            return Err(Error::PoleOnContour(w.pole.p));
        }
    }

    let mut vertices: Vec<C> = Vec::new();
    let mut theta = 0.0f64; // offset from the start angle
    let angle_of = |offset: f64| start + offset;
    let point = |offset: f64| C::from_polar(r, angle_of(offset));
    vertices.push(point(0.0));

    // windows in offset coordinates
    let mut offs: Vec<(f64, f64, &Window)> = windows
        .iter()
        .map(|w| {
            let lo = (w.lo - start).rem_euclid(TAU);
            (lo, lo + (w.hi - w.lo), w)
        })
        .collect();
    offs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let step = TAU / n as f64;
    for (lo, hi, w) in offs {
        // circle arc up to the window entry
        while theta + step < lo {
            theta += step;
            vertices.push(point(theta));
        }
        theta = lo;
        let entry = point(theta);
        vertices.push(entry);
        // detour arc around the pole: keep |p| <= r inside the contour
        // (bulge outward), |p| > r outside (bulge inward)
        let exit = point(hi.min(TAU));
        let a_in = (entry - w.pole.p).arg();
        let a_out = (exit - w.pole.p).arg();
        let outward = w.pole.p.norm() <= r;
        // choose sweep direction so the midpoint lands on the right side
        let mut sweep = (a_out - a_in).rem_euclid(TAU);
        let mid_ccw = w.pole.p + C::from_polar(w.rho, a_in + sweep / 2.0);
        let ccw_is_outward = mid_ccw.norm() >= r;
        if ccw_is_outward != outward {
            sweep -= TAU; // go the other way round
        }
        let arc_steps = (sweep.abs() / 0.1).ceil().max(8.0) as usize;
        for k in 1..=arc_steps {
            let ang = a_in + sweep * k as f64 / arc_steps as f64;
            vertices.push(w.pole.p + C::from_polar(w.rho, ang));
        }
        theta = hi;
        if theta < TAU {
            vertices.push(point(theta));
        }
    }
    while theta + step < TAU {
        theta += step;
        vertices.push(point(theta));
    }
    vertices.push(point(TAU));
    Ok(vertices)
}

/// Count residues inside |z| = r by quadrature. `delta` is the scaled
/// clearance the contour keeps from every pole.
pub fn contour_residue_count(
    field: &Field,
    r: f64,
    delta: f64,
    opts: &ScanOptions,
) -> Result<ContourCount> {
    let start = C::from_polar(r, std::f64::consts::PI);

    // prepass: walk the circle finding poles within trigger range
    let mut cursor = field.cursor(&opts.integrator);
    cursor.goto(start)?;
    cursor.take_crossed_poles();
    let mut near: Vec<PoleRecord> = Vec::new();
    {
        let n_probe = 720usize.max((8.0 * r) as usize);
        let mut suppressed: Vec<C> = Vec::new();
        for k in 1..=n_probe {
            let target = C::from_polar(r, std::f64::consts::PI + TAU * k as f64 / n_probe as f64);
            let mut trigger = false;
            let end = cursor.advance(target, |s| {
                let scale = s.z.norm().max(1.0).sqrt();
                if s.w.norm() < 0.35 * scale || s.wp.norm() == 0.0 {
                    return Flow::Continue;
                }
                let newton = s.w / s.wp;
                if newton.norm() * scale > 1.8 {
                    return Flow::Continue;
                }
                let p_hat = s.z + newton;
                if suppressed
                    .iter()
                    .any(|&q| (q - p_hat).norm() * q.norm().max(1.0).sqrt() < 0.6)
                {
                    return Flow::Continue;
                }
                trigger = true;
                Flow::Stop
            })?;
            match end {
                AdvanceEnd::Reached => continue,
                AdvanceEnd::Stopped if trigger => {
                    // dive from here using the scan machinery
                    let rec = super::scan_dive(&mut cursor, field.alpha(), &opts.integrator)?;
                    suppressed.push(rec.p);
                    near.push(rec);
                    // resume on the circle past the pole
                    let resume =
                        rec.p + (target - rec.p) / (target - rec.p).norm() * (0.2 * rec.local_scale());
                    cursor.hop(&rec, (resume - rec.p) / (resume - rec.p).norm())?;
                    cursor.goto(target)?;
                    near.extend(cursor.take_crossed_poles());
                }
                AdvanceEnd::Stopped => unreachable!(),
                AdvanceEnd::Blowup => {
                    let rec = cursor.fit_blowup_pole()?;
                    suppressed.push(rec.p);
                    near.push(rec);
                    cursor.hop(&rec, C::from_polar(1.0, target.arg() + 0.5 * TAU / n_probe as f64))?;
                    cursor.goto(target)?;
                    near.extend(cursor.take_crossed_poles());
                }
            }
        }
    }
    let near = dedup_poles(near, opts.merge_epsilon);

    // quadrature pass along the detoured polygon
    let vertices = build_path(r, delta, &near)?;
    let mut cursor = field.cursor(&opts.integrator);
    cursor.goto(vertices[0])?;
    cursor.take_crossed_poles();
    let mut integral = C::new(0.0, 0.0);
    for v in &vertices[1..] {
        integral += cursor.advance_quad(*v)?;
    }

    let raw = integral / C::new(0.0, TAU);
    let rounded = raw.re.round() as i64;
    let detours: Vec<PoleRecord> = near
        .into_iter()
        .filter(|rec| {
            let rho = delta * rec.p.norm().max(1.0).powf(-0.5);
            (rec.p.norm() - r).abs() < rho
        })
        .collect();
    Ok(ContourCount {
        raw,
        rounded,
        im_residual: raw.im.abs(),
        detours,
    })
}
