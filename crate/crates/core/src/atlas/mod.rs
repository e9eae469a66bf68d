//! Global pole atlas: scanning annular sectors, linking poles into
//! strings, counting functions and ledger statistics, accompanying
//! zero strings, and the contour residue count.

pub mod contour;
pub mod scan;

pub use contour::{contour_residue_count, ContourCount};
pub use scan::{dedup_poles, scan_poles, Region, RayDiagnostic, ScanOptions, ScanOutcome};

pub(crate) use scan::dive as scan_dive;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::integrator::IntegratorConfig;
use crate::laurent::PoleRecord;

type C = Complex64;

const SQRT2_PI: f64 = std::f64::consts::SQRT_2 * std::f64::consts::PI;

/// Lattice family a string follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StringKind {
    /// successor ≈ p + √2·π·p^{-1/2}, constant residues
    FirstKind,
    /// successor ≈ p + iπ·p^{-1/2}, alternating residues
    SecondKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResiduePattern {
    Constant(i32),
    Alternating,
}

/// An ordered pole sequence with its lattice label.
#[derive(Debug, Clone)]
pub struct StringRecord {
    pub poles: Vec<PoleRecord>,
    pub kind: StringKind,
    pub residue_pattern: ResiduePattern,
    /// Direction of the outermost member.
    pub asymptotic_ray: f64,
    /// No candidate predecessor position inside the scanned set.
    pub maximal: bool,
}

impl StringRecord {
    pub fn len(&self) -> usize {
        self.poles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poles.is_empty()
    }

    pub fn root(&self) -> &PoleRecord {
        &self.poles[0]
    }
}

/// Strings plus the poles no string would take.
#[derive(Debug, Clone)]
pub struct LinkOutcome {
    pub strings: Vec<StringRecord>,
    pub unassigned: Vec<PoleRecord>,
}

/// Successor displacement for each kind: s·p^{-1/2} with the branch of
/// the square root chosen so the step points radially outward.
pub fn successor_step(p: C, kind: StringKind) -> C {
    let q = (C::new(1.0, 0.0) / p).sqrt();
    let factor = match kind {
        StringKind::FirstKind => C::new(SQRT2_PI, 0.0),
        StringKind::SecondKind => C::new(0.0, std::f64::consts::PI),
    };
    let step = factor * q;
    if (step * p.conj()).re >= 0.0 {
        step
    } else {
        -step
    }
}

fn scaled_dist_at(p: C, d: C) -> f64 {
    d.norm() * p.norm().max(1.0).sqrt()
}

fn residues_compatible(kind: StringKind, a: i32, b: i32) -> bool {
    match kind {
        StringKind::FirstKind => a == b,
        StringKind::SecondKind => a == -b,
    }
}

/// Link poles into strings under both lattice hypotheses. Each pole
/// takes at most one successor; a pole with two candidates inside the
/// tolerance is reported as ambiguous rather than guessed.
pub fn link_strings(poles: &[PoleRecord], epsilon: f64) -> Result<LinkOutcome> {
    let mut sorted: Vec<PoleRecord> = poles.to_vec();
    sorted.sort_by(|a, b| {
        a.p.norm()
            .total_cmp(&b.p.norm())
            .then(a.p.arg().total_cmp(&b.p.arg()))
    });
    let n = sorted.len();

    let mut succ: Vec<Option<(usize, StringKind)>> = vec![None; n];
    let mut pred_count = vec![0usize; n];

    for i in 0..n {
        let mut found: Option<(usize, StringKind, f64)> = None;
        for kind in [StringKind::FirstKind, StringKind::SecondKind] {
            let target = sorted[i].p + successor_step(sorted[i].p, kind);
            for (j, cand) in sorted.iter().enumerate() {
                if j == i || !residues_compatible(kind, sorted[i].eta, cand.eta) {
                    continue;
                }
                let d = scaled_dist_at(sorted[i].p, cand.p - target);
                if d < epsilon {
                    match found {
                        None => found = Some((j, kind, d)),
                        Some((j0, _, _)) if j0 != j => {
                            return Err(Error::AmbiguousLink {
                                p: sorted[i].p,
                                a: sorted[j0].p,
                                b: cand.p,
                            });
                        }
                        Some((_, _, d0)) if d < d0 => found = Some((j, kind, d)),
                        _ => {}
                    }
                }
            }
        }
        if let Some((j, kind, _)) = found {
            succ[i] = Some((j, kind));
            pred_count[j] += 1;
        }
    }

    for (j, &count) in pred_count.iter().enumerate() {
        if count > 1 {
            return Err(Error::AmbiguousLink {
                p: sorted[j].p,
                a: sorted[j].p,
                b: sorted[j].p,
            });
        }
    }

    let mut used = vec![false; n];
    let mut chains: Vec<(Vec<usize>, StringKind)> = Vec::new();
    // roots first (no predecessor), then any leftovers from broken joints
    let mut order: Vec<usize> = (0..n).filter(|&i| pred_count[i] == 0).collect();
    order.extend((0..n).filter(|&i| pred_count[i] > 0));

    for start in order {
        if used[start] || succ[start].is_none() {
            continue;
        }
        let kind = succ[start].unwrap().1;
        let mut members = vec![start];
        used[start] = true;
        let mut cur = start;
        while let Some((j, k)) = succ[cur] {
            if k != kind || used[j] {
                break;
            }
            members.push(j);
            used[j] = true;
            cur = j;
        }
        chains.push((members, kind));
    }

    let mut strings = Vec::new();
    let mut unassigned = Vec::new();
    for (members, kind) in chains {
        if members.len() < 2 {
            unassigned.extend(members.into_iter().map(|i| sorted[i]));
            continue;
        }
        let member_poles: Vec<PoleRecord> = members.iter().map(|&i| sorted[i]).collect();
        let pattern = match kind {
            StringKind::FirstKind => ResiduePattern::Constant(member_poles[0].eta),
            StringKind::SecondKind => ResiduePattern::Alternating,
        };
        // a root is maximal when no pole sits near its predicted
        // in-set predecessor position
        let root = member_poles[0].p;
        let back = root - successor_step(root, kind);
        let has_pred_candidate = sorted
            .iter()
            .any(|q| scaled_dist_at(root, q.p - back) < 1.5 * epsilon);
        let ray = member_poles.last().unwrap().p.arg();
        strings.push(StringRecord {
            poles: member_poles,
            kind,
            residue_pattern: pattern,
            asymptotic_ray: ray,
            maximal: !has_pred_candidate,
        });
    }
    for (i, &u) in used.iter().enumerate() {
        if !u {
            unassigned.push(sorted[i]);
        }
    }

    strings.sort_by(|a, b| {
        a.root()
            .p
            .norm()
            .total_cmp(&b.root().p.norm())
            .then(a.root().p.arg().total_cmp(&b.root().p.arg()))
    });
    Ok(LinkOutcome { strings, unassigned })
}

/// Counting functions over a radius grid plus maximal-string tallies.
#[derive(Debug, Clone)]
pub struct CountingData {
    pub r_grid: Vec<f64>,
    pub n: Vec<usize>,
    pub n_plus: Vec<usize>,
    pub n_minus: Vec<usize>,
    /// Least-squares slope of log n against log r.
    pub fit_exponent: f64,
    /// exp(intercept) of the same fit.
    pub fit_coefficient: f64,
    /// n(r_max) / r_max^{3/2}, the coefficient read off at the edge.
    pub coefficient_at_rmax: f64,
    pub ell_plus: usize,
    pub ell_minus: usize,
    pub delta: i64,
}

/// Count poles by radius and tally maximal strings by residue sign.
/// Alternating strings contribute to neither tally.
pub fn counting(poles: &[PoleRecord], strings: &[StringRecord], r_grid: &[f64]) -> CountingData {
    let mut grid: Vec<f64> = r_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let count_upto = |r: f64, eta: Option<i32>| -> usize {
        poles
            .iter()
            .filter(|p| p.p.norm() <= r && eta.map_or(true, |e| p.eta == e))
            .count()
    };
    let n: Vec<usize> = grid.iter().map(|&r| count_upto(r, None)).collect();
    let n_plus: Vec<usize> = grid.iter().map(|&r| count_upto(r, Some(1))).collect();
    let n_minus: Vec<usize> = grid.iter().map(|&r| count_upto(r, Some(-1))).collect();

    // log-log fit over grid points with at least a few poles
    let pts: Vec<(f64, f64)> = grid
        .iter()
        .zip(&n)
        .filter(|(_, &cnt)| cnt >= 3)
        .map(|(&r, &cnt)| (r.ln(), (cnt as f64).ln()))
        .collect();
    let (fit_exponent, fit_coefficient) = if pts.len() >= 2 {
        let m = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let denom = m * sxx - sx * sx;
        if denom.abs() > 1e-12 {
            let slope = (m * sxy - sx * sy) / denom;
            let intercept = (sy - slope * sx) / m;
            (slope, intercept.exp())
        } else {
            (f64::NAN, f64::NAN)
        }
    } else {
        (f64::NAN, f64::NAN)
    };

    let coefficient_at_rmax = match (grid.last(), n.last()) {
        (Some(&r), Some(&cnt)) if r > 0.0 => cnt as f64 / r.powf(1.5),
        _ => f64::NAN,
    };

    let mut ell_plus = 0usize;
    let mut ell_minus = 0usize;
    for s in strings {
        if !s.maximal {
            continue;
        }
        match s.residue_pattern {
            ResiduePattern::Constant(1) => ell_plus += 1,
            ResiduePattern::Constant(-1) => ell_minus += 1,
            _ => {}
        }
    }

    CountingData {
        r_grid: grid,
        n,
        n_plus,
        n_minus,
        fit_exponent,
        fit_coefficient,
        coefficient_at_rmax,
        ell_plus,
        ell_minus,
        delta: ell_plus as i64 - ell_minus as i64,
    }
}

/// Scaled separation statistics between strings.
#[derive(Debug, Clone)]
pub struct SeparationReport {
    /// For each ordered pair (i, j): minimum over members of
    /// |p|^{1/2}·dist(p, other string).
    pub pair_min: Vec<(usize, usize, f64)>,
    pub min_overall: f64,
    /// True when the scaled distance trends upward along every pair.
    pub increasing: bool,
    /// False for fewer than two strings.
    pub applicable: bool,
}

pub fn separation_check(strings: &[StringRecord]) -> SeparationReport {
    if strings.len() < 2 {
        return SeparationReport {
            pair_min: Vec::new(),
            min_overall: f64::INFINITY,
            increasing: true,
            applicable: false,
        };
    }
    let mut pair_min = Vec::new();
    let mut min_overall = f64::INFINITY;
    let mut increasing = true;
    for i in 0..strings.len() {
        for j in 0..strings.len() {
            if i == j {
                continue;
            }
            let mut samples: Vec<(f64, f64)> = Vec::new();
            for p in &strings[i].poles {
                let d = strings[j]
                    .poles
                    .iter()
                    .map(|q| (p.p - q.p).norm())
                    .fold(f64::INFINITY, f64::min);
                samples.push((p.p.norm(), d * p.p.norm().sqrt()));
            }
            let m = samples
                .iter()
                .map(|s| s.1)
                .fold(f64::INFINITY, f64::min);
            pair_min.push((i, j, m));
            min_overall = min_overall.min(m);
            if samples.len() >= 3 {
                // slope of scaled distance against radius
                let n = samples.len() as f64;
                let sx: f64 = samples.iter().map(|s| s.0).sum();
                let sy: f64 = samples.iter().map(|s| s.1).sum();
                let sxx: f64 = samples.iter().map(|s| s.0 * s.0).sum();
                let sxy: f64 = samples.iter().map(|s| s.0 * s.1).sum();
                let denom = n * sxx - sx * sx;
                if denom.abs() > 1e-12 && (n * sxy - sx * sy) / denom <= 0.0 {
                    increasing = false;
                }
            }
        }
    }
    SeparationReport { pair_min, min_overall, increasing, applicable: true }
}

/// Zeros accompanying a first-kind string, one per consecutive pole
/// pair, with the worst relative deviation from the half-spacing
/// offset (√2/2)π·p^{-1/2} over members with |p| > 50.
#[derive(Debug, Clone)]
pub struct ZeroString {
    pub zeros: Vec<C>,
    pub max_offset_deviation: f64,
}

/// Locate the zero of w between each consecutive pole pair of a
/// first-kind string by Newton iteration on the continued solution.
pub fn zero_string(field: &Field, string: &StringRecord, cfg: &IntegratorConfig) -> Result<ZeroString> {
    if string.kind != StringKind::FirstKind {
        return Err(Error::InvalidInput(
            "zero strings accompany first-kind strings only".into(),
        ));
    }
    let mut cursor = field.cursor(cfg);
    let mut zeros = Vec::new();
    let mut max_offset_deviation: f64 = 0.0;
    for pair in string.poles.windows(2) {
        let (a, b) = (pair[0].p, pair[1].p);
        let gap = (b - a).norm();
        let start = a + (b - a) * 0.5;
        cursor.goto(start)?;
        cursor.take_crossed_poles();
        let mut z = start;
        let mut converged = false;
        for _ in 0..40 {
            let s = cursor.state()?;
            if s.wp.norm() == 0.0 {
                break;
            }
            let delta = -s.w / s.wp;
            if delta.norm() > 0.6 * gap {
                break;
            }
            z = s.z + delta;
            cursor.goto(z)?;
            if delta.norm() < 1e-11 * (1.0 + z.norm()) {
                converged = true;
                break;
            }
        }
        let s = cursor.state()?;
        if !converged && s.w.norm() > 1e-6 {
            return Err(Error::ZeroNotFound(a, b));
        }
        zeros.push(z);
        if a.norm() > 50.0 {
            let predicted = std::f64::consts::FRAC_PI_2 * std::f64::consts::SQRT_2
                / a.norm().sqrt();
            let actual = (z - a).norm();
            max_offset_deviation =
                max_offset_deviation.max((actual - predicted).abs() / predicted);
        }
    }
    Ok(ZeroString { zeros, max_offset_deviation })
}

/// One comparison row of the ledger.
#[derive(Debug, Clone)]
pub struct LedgerCheck {
    pub name: String,
    pub expected: i64,
    pub got: i64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct LedgerReport {
    pub checks: Vec<LedgerCheck>,
    pub consistent: bool,
}

/// Compare string tallies of a solution and its up-image:
/// ℓ₊(after) = ℓ₋(before), ℓ₋(after) = ℓ₋(before) − Δ(before),
/// Δ(after) = Δ(before), and |Δ| ∈ {1, 3} on both sides.
pub fn ledger(before: &CountingData, after: &CountingData) -> LedgerReport {
    let mut checks = Vec::new();
    let mut push = |name: &str, expected: i64, got: i64| {
        checks.push(LedgerCheck {
            name: name.to_string(),
            expected,
            got,
            pass: expected == got,
        });
    };
    push("ell_plus(image) = ell_minus(source)", before.ell_minus as i64, after.ell_plus as i64);
    push(
        "ell_minus(image) = ell_minus(source) - delta(source)",
        before.ell_minus as i64 - before.delta,
        after.ell_minus as i64,
    );
    push("delta(image) = delta(source)", before.delta, after.delta);
    let abs_ok = |d: i64| d.abs() == 1 || d.abs() == 3;
    checks.push(LedgerCheck {
        name: "|delta(source)| in {1, 3}".into(),
        expected: 1,
        got: i64::from(abs_ok(before.delta)),
        pass: abs_ok(before.delta),
    });
    checks.push(LedgerCheck {
        name: "|delta(image)| in {1, 3}".into(),
        expected: 1,
        got: i64::from(abs_ok(after.delta)),
        pass: abs_ok(after.delta),
    });
    let consistent = checks.iter().all(|c| c.pass);
    LedgerReport { checks, consistent }
}

/// Refine zeros of V = w' + w² + z/2 near candidate points by Newton
/// iteration on the continued base solution. Used to feed the
/// residue-correspondence check.
pub fn find_v_zeros(field: &Field, candidates: &[C], cfg: &IntegratorConfig) -> Result<Vec<C>> {
    let alpha = field.alpha();
    let mut out = Vec::new();
    let mut cursor = field.cursor(cfg);
    for &c0 in candidates {
        // start slightly off the candidate in case it sits on a pole of
        // the image (where V of the base vanishes)
        let mut z = c0;
        let mut ok = false;
        for _ in 0..30 {
            cursor.goto(z)?;
            cursor.take_crossed_poles();
            let s = cursor.state()?;
            let v = crate::transforms::v_up(&s);
            let w2 = alpha + s.z * s.w + 2.0 * s.w * s.w * s.w;
            let vp = w2 + 2.0 * s.w * s.wp + 0.5;
            if vp.norm() == 0.0 {
                break;
            }
            let delta = -v / vp;
            z = s.z + delta;
            if delta.norm() < 1e-10 * (1.0 + z.norm()) {
                ok = true;
                break;
            }
            if (z - c0).norm() > 1.0 {
                break;
            }
        }
        if ok {
            out.push(z);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn synthetic_first_kind(p0: f64, count: usize, eta: i32) -> Vec<PoleRecord> {
        let alpha = c(0.5, 0.0);
        let mut poles = Vec::new();
        let mut p = c(p0, 0.0);
        for _ in 0..count {
            poles.push(PoleRecord::synthetic(p, eta, c(0.0, 0.0), alpha));
            p += successor_step(p, StringKind::FirstKind);
        }
        poles
    }

    fn synthetic_second_kind(p0: C, count: usize) -> Vec<PoleRecord> {
        let alpha = c(0.5, 0.0);
        let mut poles = Vec::new();
        let mut p = p0;
        let mut eta = 1i32;
        for _ in 0..count {
            poles.push(PoleRecord::synthetic(p, eta, c(0.0, 0.0), alpha));
            p += successor_step(p, StringKind::SecondKind);
            eta = -eta;
        }
        poles
    }

    #[test]
    fn links_synthetic_first_kind_lattice() {
        let poles = synthetic_first_kind(25.0, 10, -1);
        let out = link_strings(&poles, 0.3).unwrap();
        assert_eq!(out.strings.len(), 1);
        assert!(out.unassigned.is_empty());
        let s = &out.strings[0];
        assert_eq!(s.kind, StringKind::FirstKind);
        assert_eq!(s.residue_pattern, ResiduePattern::Constant(-1));
        assert_eq!(s.len(), 10);
        assert!(s.maximal);
        assert!(s.asymptotic_ray.abs() < 1e-12);
    }

    #[test]
    fn links_synthetic_second_kind_lattice() {
        let poles = synthetic_second_kind(c(-25.0, 0.0), 8);
        let out = link_strings(&poles, 0.3).unwrap();
        assert_eq!(out.strings.len(), 1, "unassigned: {:?}", out.unassigned.len());
        let s = &out.strings[0];
        assert_eq!(s.kind, StringKind::SecondKind);
        assert_eq!(s.residue_pattern, ResiduePattern::Alternating);
        assert_eq!(s.len(), 8);
    }

    #[test]
    fn ambiguous_candidates_are_reported() {
        let mut poles = synthetic_first_kind(25.0, 3, -1);
        // plant a second candidate beside the true successor of pole 0
        let target = poles[0].p + successor_step(poles[0].p, StringKind::FirstKind);
        poles.push(PoleRecord::synthetic(
            target + c(0.0, 0.01),
            -1,
            c(0.0, 0.0),
            poles[0].alpha,
        ));
        assert!(matches!(
            link_strings(&poles, 0.3),
            Err(Error::AmbiguousLink { .. })
        ));
    }

    #[test]
    fn counting_on_synthetic_string() {
        let poles = synthetic_first_kind(4.0, 120, -1);
        let out = link_strings(&poles, 0.5).unwrap();
        assert_eq!(out.strings.len(), 1);
        let r_max = poles.last().unwrap().p.norm();
        let grid: Vec<f64> = (1..=12).map(|i| r_max * i as f64 / 12.0).collect();
        let data = counting(&poles, &out.strings, &grid);
        assert_eq!(data.ell_minus, 1);
        assert_eq!(data.ell_plus, 0);
        assert_eq!(data.delta, -1);
        assert!(
            (data.fit_exponent - 1.5).abs() < 0.08,
            "exponent {}",
            data.fit_exponent
        );
        // counts are monotone
        for w in data.n.windows(2) {
            assert!(w[1] >= w[0]);
        }
        assert_eq!(*data.n.last().unwrap(), 120);
        assert_eq!(*data.n_minus.last().unwrap(), 120);
    }

    #[test]
    fn counting_empty_is_zero() {
        let data = counting(&[], &[], &[10.0, 20.0]);
        assert_eq!(data.n, vec![0, 0]);
        assert_eq!(data.delta, 0);
    }

    #[test]
    fn separation_single_string_not_applicable() {
        let poles = synthetic_first_kind(25.0, 5, -1);
        let out = link_strings(&poles, 0.3).unwrap();
        let rep = separation_check(&out.strings);
        assert!(!rep.applicable);
    }

    #[test]
    fn separation_flags_parallel_strings() {
        // two first-kind lattices at constant scaled offset
        let a = synthetic_first_kind(25.0, 12, -1);
        let offset = 2.0; // scaled units
        let b: Vec<PoleRecord> = a
            .iter()
            .map(|r| {
                let d = offset * r.p.norm().powf(-0.5);
                PoleRecord::synthetic(r.p + c(0.0, d), r.eta, r.h, r.alpha)
            })
            .collect();
        let mut poles = a;
        poles.extend(b);
        let out = link_strings(&poles, 0.3).unwrap();
        assert_eq!(out.strings.len(), 2);
        let rep = separation_check(&out.strings);
        assert!(rep.applicable);
        assert!(rep.min_overall < 3.0);
        assert!(!rep.increasing, "constant offset must not read as separating");
    }

    #[test]
    fn ledger_recurrences() {
        let mk = |ell_plus: usize, ell_minus: usize| CountingData {
            r_grid: vec![],
            n: vec![],
            n_plus: vec![],
            n_minus: vec![],
            fit_exponent: f64::NAN,
            fit_coefficient: f64::NAN,
            coefficient_at_rmax: f64::NAN,
            ell_plus,
            ell_minus,
            delta: ell_plus as i64 - ell_minus as i64,
        };
        // distinguished solution: (0, 1) -> image (1, 2)
        let rep = ledger(&mk(0, 1), &mk(1, 2));
        assert!(rep.consistent, "{:?}", rep.checks);
        // generic Riccati: (0, 3) -> image (3, 6)
        let rep = ledger(&mk(0, 3), &mk(3, 6));
        assert!(rep.consistent);
        // delta = 0 violates the first-kind constraint
        let rep = ledger(&mk(2, 2), &mk(2, 2));
        assert!(!rep.consistent);
    }

    #[test]
    fn zero_string_rejects_second_kind() {
        let poles = synthetic_second_kind(c(-25.0, 0.0), 4);
        let out = link_strings(&poles, 0.3).unwrap();
        let field = Field::from_spec(&crate::solution::SolutionSpec::w1()).unwrap();
        let cfg = IntegratorConfig::default();
        assert!(zero_string(&field, &out.strings[0], &cfg).is_err());
    }
}
