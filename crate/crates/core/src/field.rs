//! Stable pointwise evaluation of solutions along paths.
//!
//! Trajectories of the Painlevé flow separate exponentially (the
//! variational equation grows like exp((2/3)|z|^{3/2})), so a naive
//! far-field integration of a *specific* solution drifts off it long
//! before desk-scale radii. Each solution class therefore carries the
//! strongest evaluation backend available:
//!
//! * `Direct` — the (w, w') flow itself, continued through movable
//!   poles by Laurent re-expansion; right at any radius reachable
//!   before drift matters, and the only fully general backend.
//! * `Linearized` — Riccati-class solutions w = ∓u'/u ride the linear
//!   equation u'' = -(z/2)u, which has no movable poles and keeps the
//!   solution on its three-string Airy manifold at any radius. The
//!   homogeneous carrier (u, u') is renormalised in magnitude along the
//!   way; w is a ratio, so the rescaling is exact.
//! * `Rational` — the closed form w = -1/z.
//!
//! A Bäcklund chain on top of any backend evaluates pointwise algebra
//! on the carrier states, so images of Airy solutions inherit the
//! stable carrier.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::integrator::{
    drive, Flow, Halt, IntegratorConfig, LinearSeed, PainleveTwo, PathSpec,
};
use crate::laurent::{self, PoleRecord};
use crate::solution::{OdeState, Origin, Recipe, ResolvedSeed, SolutionSpec};
use crate::transforms::{self, BtKind};

type C = Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Backend {
    Direct,
    Linearized { sign: f64 },
    Rational,
}

/// A solution with its evaluation strategy and an optional pointwise
/// Bäcklund chain applied on top.
#[derive(Debug, Clone)]
pub struct Field {
    base_alpha: C,
    backend: Backend,
    seed: OdeState,
    /// carrier seed for the linearized backend: (z0, u0, u0')
    u_seed: Option<(C, C, C)>,
    chain: Vec<BtKind>,
}

impl Field {
    /// Choose the strongest backend the spec allows.
    pub fn from_spec(spec: &SolutionSpec) -> Result<Field> {
        let seed = transforms::resolve_spec(spec)?;
        match spec.origin {
            Origin::Recipe(Recipe::Rational) => Ok(Field {
                base_alpha: seed.alpha,
                backend: Backend::Rational,
                seed: seed.state,
                u_seed: None,
                chain: Vec::new(),
            }),
            Origin::Recipe(Recipe::W1 | Recipe::W2 | Recipe::W3 | Recipe::RiccatiPlus { .. }) => {
                Ok(Self::linearized(1.0, seed))
            }
            Origin::Recipe(Recipe::RiccatiMinus { .. }) => Ok(Self::linearized(-1.0, seed)),
            Origin::InitialData { .. } => Ok(Field {
                base_alpha: seed.alpha,
                backend: Backend::Direct,
                seed: seed.state,
                u_seed: None,
                chain: Vec::new(),
            }),
        }
    }

    fn linearized(sign: f64, seed: ResolvedSeed) -> Field {
        // w = -sign·u'/u with u(z0) = 1
        let z0 = seed.state.z;
        let u0 = C::new(1.0, 0.0);
        let up0 = -seed.state.w * sign;
        Field {
            base_alpha: seed.alpha,
            backend: Backend::Linearized { sign },
            seed: seed.state,
            u_seed: Some((z0, u0, up0)),
            chain: Vec::new(),
        }
    }

    /// Wrap the field in one more up/down/reflect step.
    pub fn with_step(mut self, step: BtKind) -> Field {
        self.chain.push(step);
        self
    }

    /// Parameter of the top-level solution (after the chain).
    pub fn alpha(&self) -> C {
        let mut alpha = self.base_alpha;
        for step in &self.chain {
            alpha = match step {
                BtKind::Up => alpha + 1.0,
                BtKind::Down => alpha - 1.0,
                BtKind::Reflect => -alpha,
                _ => alpha,
            };
        }
        alpha
    }

    pub fn base_alpha(&self) -> C {
        self.base_alpha
    }

    pub fn seed_z(&self) -> C {
        self.seed.z
    }

    /// Apply the chain to a base state.
    pub fn apply_chain(&self, state: &OdeState) -> Result<OdeState> {
        let mut s = *state;
        let mut alpha = self.base_alpha;
        for step in &self.chain {
            let (next, next_alpha) = match step {
                BtKind::Up => transforms::bt_up(&s, alpha)?,
                BtKind::Down => transforms::bt_down(&s, alpha)?,
                BtKind::Reflect => transforms::bt_reflect(&s, alpha),
                other => {
                    return Err(Error::InvalidInput(format!(
                        "chain step {other:?} is not pointwise"
                    )))
                }
            };
            s = next;
            alpha = next_alpha;
        }
        Ok(s)
    }

    pub fn cursor(&self, cfg: &IntegratorConfig) -> Cursor<'_> {
        let carrier = match self.backend {
            Backend::Direct => Carrier::P2 {
                w: self.seed.w,
                wp: self.seed.wp,
            },
            Backend::Linearized { .. } => {
                let (_, u0, up0) = self.u_seed.unwrap();
                Carrier::U { u: u0, up: up0 }
            }
            Backend::Rational => Carrier::Rational,
        };
        Cursor {
            field: self,
            cfg: *cfg,
            z: self.seed.z,
            carrier,
            base_tail: Vec::new(),
            crossed: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Carrier {
    P2 { w: C, wp: C },
    U { u: C, up: C },
    Rational,
}

/// How an `advance` ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdvanceEnd {
    Reached,
    /// The observer asked to stop.
    Stopped,
    /// The direct carrier hit a pole approach (|w| past threshold).
    Blowup,
}

/// A movable position on a solution, advanced along straight segments.
pub struct Cursor<'f> {
    field: &'f Field,
    cfg: IntegratorConfig,
    z: C,
    carrier: Carrier,
    /// ring of recent base states for pole fitting (direct carrier)
    base_tail: Vec<OdeState>,
    /// poles crossed (fitted) by `goto` on the direct carrier
    crossed: Vec<PoleRecord>,
}

impl<'f> Cursor<'f> {
    pub fn z(&self) -> C {
        self.z
    }

    /// Base-level state (before the chain) at the current position.
    pub fn base_state(&self) -> OdeState {
        match self.carrier {
            Carrier::P2 { w, wp } => OdeState::new(self.z, w, wp),
            Carrier::U { u, up } => {
                let sign = match self.field.backend {
                    Backend::Linearized { sign } => sign,
                    _ => unreachable!(),
                };
                let w = -up / u * sign;
                let wp = (self.z * 0.5 + w * w) * sign;
                OdeState::new(self.z, w, wp)
            }
            Carrier::Rational => {
                let w = -C::new(1.0, 0.0) / self.z;
                OdeState::new(self.z, w, 1.0 / (self.z * self.z))
            }
        }
    }

    /// Top-level state (after the chain).
    pub fn state(&self) -> Result<OdeState> {
        self.field.apply_chain(&self.base_state())
    }

    /// Poles fitted while `goto` continued through them.
    pub fn take_crossed_poles(&mut self) -> Vec<PoleRecord> {
        std::mem::take(&mut self.crossed)
    }

    fn push_tail(&mut self, s: OdeState) {
        if self.base_tail.len() >= 256 {
            self.base_tail.drain(..128);
        }
        self.base_tail.push(s);
    }

    /// Advance in a straight line to `target`, streaming top-level
    /// states. The direct carrier halts at its own pole approaches.
    pub fn advance<F>(&mut self, target: C, mut obs: F) -> Result<AdvanceEnd>
    where
        F: FnMut(&OdeState) -> Flow,
    {
        if (target - self.z).norm() < 1e-14 * (1.0 + self.z.norm()) {
            return Ok(AdvanceEnd::Reached);
        }
        match self.carrier {
            Carrier::P2 { w, wp } => {
                let sys = PainleveTwo { alpha: self.field.base_alpha };
                let path = PathSpec::line(self.z, target);
                let field = self.field;
                let mut tail_buf: Vec<OdeState> = Vec::new();
                let out = drive(&sys, [w, wp], &path, &self.cfg, |rec| {
                    let base = OdeState::new(rec.z1, rec.y1[0], rec.y1[1]);
                    tail_buf.push(base);
                    match field.apply_chain(&base) {
                        Ok(top) => obs(&top),
                        // chain poles (V = 0) pass by harmlessly
                        Err(_) => Flow::Continue,
                    }
                })?;
                for s in tail_buf {
                    self.push_tail(s);
                }
                self.z = out.z;
                self.carrier = Carrier::P2 { w: out.y[0], wp: out.y[1] };
                Ok(match out.halt {
                    Halt::Completed => AdvanceEnd::Reached,
                    Halt::Stopped => AdvanceEnd::Stopped,
                    Halt::Blowup => AdvanceEnd::Blowup,
                })
            }
            Carrier::U { mut u, mut up } => {
                // march in renormalised chunks so |u| stays in range
                let field = self.field;
                let mut z = self.z;
                loop {
                    let remaining = (target - z).norm();
                    if remaining < 1e-14 * (1.0 + z.norm()) {
                        break;
                    }
                    let chunk = (60.0 / (1.0 + z.norm()).sqrt()).min(remaining);
                    let dir = (target - z) / remaining;
                    let chunk_target = z + dir * chunk;
                    let path = PathSpec::line(z, chunk_target);
                    let sign = match field.backend {
                        Backend::Linearized { sign } => sign,
                        _ => unreachable!(),
                    };
                    let out = drive(&LinearSeed, [u, up], &path, &self.cfg, |rec| {
                        let uu = rec.y1[0];
                        let uup = rec.y1[1];
                        if uu.norm() == 0.0 {
                            return Flow::Continue;
                        }
                        let w = -uup / uu * sign;
                        let wp = (rec.z1 * 0.5 + w * w) * sign;
                        let base = OdeState::new(rec.z1, w, wp);
                        match field.apply_chain(&base) {
                            Ok(top) => obs(&top),
                            Err(_) => Flow::Continue,
                        }
                    })?;
                    z = out.z;
                    u = out.y[0];
                    up = out.y[1];
                    let mag = u.norm().max(up.norm());
                    if mag > 1e120 || (mag < 1e-120 && mag > 0.0) {
                        let s = 1.0 / mag;
                        u *= s;
                        up *= s;
                    }
                    if out.halt == Halt::Stopped {
                        self.z = z;
                        self.carrier = Carrier::U { u, up };
                        return Ok(AdvanceEnd::Stopped);
                    }
                }
                self.z = z;
                self.carrier = Carrier::U { u, up };
                Ok(AdvanceEnd::Reached)
            }
            Carrier::Rational => {
                // closed form; emit geometrically refined samples so pole
                // proximity is visible to observers
                let field = self.field;
                let mut z = self.z;
                let mut guard = 0usize;
                loop {
                    guard += 1;
                    let remaining = (target - z).norm();
                    if remaining < 1e-14 * (1.0 + z.norm()) || guard > 100_000 {
                        break;
                    }
                    let step = (0.05 * z.norm().max(0.02)).min(remaining);
                    let dir = (target - z) / remaining;
                    z += dir * step;
                    let w = -C::new(1.0, 0.0) / z;
                    let base = OdeState::new(z, w, 1.0 / (z * z));
                    self.z = z;
                    self.push_tail(base);
                    if w.norm() > self.cfg.blowup_threshold {
                        return Ok(AdvanceEnd::Blowup);
                    }
                    if let Ok(top) = field.apply_chain(&base) {
                        if obs(&top) == Flow::Stop {
                            return Ok(AdvanceEnd::Stopped);
                        }
                    }
                }
                Ok(AdvanceEnd::Reached)
            }
        }
    }

    /// Recent base states with large |w| (a pole-approach tail).
    pub fn pole_tail(&self) -> Vec<OdeState> {
        self.base_tail.clone()
    }

    /// Fit the pole the direct carrier just ran into.
    pub fn fit_blowup_pole(&self) -> Result<PoleRecord> {
        laurent::fit_pole_with(
            &self.base_tail,
            self.field.base_alpha,
            self.cfg.blowup_threshold,
        )
    }

    /// Continue past a pole of the *base* carrier: the direct carrier
    /// re-seeds from the Laurent series; stable carriers simply walk
    /// through to the far side.
    pub fn hop(&mut self, record: &PoleRecord, direction: C) -> Result<()> {
        let distance = 0.1 * record.local_scale();
        match self.carrier {
            Carrier::P2 { .. } => {
                let state = laurent::jump_pole_at(record, direction, distance)?;
                self.z = state.z;
                self.carrier = Carrier::P2 { w: state.w, wp: state.wp };
                self.base_tail.clear();
                Ok(())
            }
            Carrier::U { .. } => {
                let target = record.p + direction * distance;
                match self.advance(target, |_| Flow::Continue)? {
                    AdvanceEnd::Reached => Ok(()),
                    _ => Err(Error::FitDiverged(
                        "carrier failed to pass the pole".into(),
                    )),
                }
            }
            Carrier::Rational => {
                // closed form: reposition directly
                self.z = record.p + direction * distance;
                self.base_tail.clear();
                Ok(())
            }
        }
    }

    /// Advance to `target` while accumulating the line integral
    /// ∫ w dz of the top-level solution along the way, with the
    /// integral carried as an extra component of the adaptive system so
    /// its error is controlled like the state's. The path must stay
    /// away from poles of the top-level solution.
    pub fn advance_quad(&mut self, target: C) -> Result<C> {
        if (target - self.z).norm() < 1e-14 * (1.0 + self.z.norm()) {
            return Ok(C::new(0.0, 0.0));
        }
        match self.carrier {
            Carrier::P2 { w, wp } => {
                let sys = QuadP2Chain { field: self.field };
                let path = PathSpec::line(self.z, target);
                let out = drive(&sys, [w, wp, C::new(0.0, 0.0)], &path, &self.cfg, |_| {
                    Flow::Continue
                })?;
                if out.halt != Halt::Completed {
                    return Err(Error::PoleOnContour(out.z));
                }
                self.z = out.z;
                self.carrier = Carrier::P2 { w: out.y[0], wp: out.y[1] };
                Ok(out.y[2])
            }
            Carrier::U { mut u, mut up } => {
                let sign = match self.field.backend {
                    Backend::Linearized { sign } => sign,
                    _ => unreachable!(),
                };
                let sys = QuadLinearizedChain { field: self.field, sign };
                let mut z = self.z;
                let mut integral = C::new(0.0, 0.0);
                loop {
                    let remaining = (target - z).norm();
                    if remaining < 1e-14 * (1.0 + z.norm()) {
                        break;
                    }
                    let chunk = (60.0 / (1.0 + z.norm()).sqrt()).min(remaining);
                    let dir = (target - z) / remaining;
                    let path = PathSpec::line(z, z + dir * chunk);
                    let out = drive(&sys, [u, up, C::new(0.0, 0.0)], &path, &self.cfg, |_| {
                        Flow::Continue
                    })?;
                    z = out.z;
                    u = out.y[0];
                    up = out.y[1];
                    integral += out.y[2];
                    let mag = u.norm().max(up.norm());
                    if mag > 1e120 || (mag < 1e-120 && mag > 0.0) {
                        let s = 1.0 / mag;
                        u *= s;
                        up *= s;
                    }
                }
                self.z = z;
                self.carrier = Carrier::U { u, up };
                Ok(integral)
            }
            Carrier::Rational => {
                // short chords never wrap the branch cut of the logarithm
                if self.field.chain.is_empty() {
                    let dv = -(target / self.z).ln();
                    self.z = target;
                    Ok(dv)
                } else {
                    Err(Error::InvalidInput(
                        "quadrature over chained rational fields is unsupported".into(),
                    ))
                }
            }
        }
    }

    /// Reach `target`, continuing through any movable poles on the way.
    /// Poles crossed by the direct carrier are fitted and recorded.
    pub fn goto(&mut self, target: C) -> Result<OdeState> {
        let mut hops = 0usize;
        loop {
            match self.advance(target, |_| Flow::Continue)? {
                AdvanceEnd::Reached => return self.state(),
                AdvanceEnd::Stopped => unreachable!("observer never stops"),
                AdvanceEnd::Blowup => {
                    hops += 1;
                    if hops > 10_000 {
                        return Err(Error::MaxStepsExceeded(hops));
                    }
                    let record = self.fit_blowup_pole()?;
                    let remaining = target - record.p;
                    let dir = if remaining.norm() > 1e-12 {
                        remaining / remaining.norm()
                    } else {
                        C::new(1.0, 0.0)
                    };
                    self.hop(&record, dir)?;
                    self.crossed.push(record);
                }
            }
        }
    }
}

/// (w, w', ∫w dz) flow on the direct carrier with the integrand taken
/// after the chain.
struct QuadP2Chain<'f> {
    field: &'f Field,
}

impl<'f> crate::integrator::OdeSystem<3> for QuadP2Chain<'f> {
    fn rhs(&self, z: C, y: &[C; 3]) -> [C; 3] {
        let w = y[0];
        let alpha = self.field.base_alpha;
        let base = OdeState::new(z, w, y[1]);
        let top = self
            .field
            .apply_chain(&base)
            .map(|s| s.w)
            .unwrap_or(C::new(0.0, 0.0));
        [y[1], alpha + z * w + 2.0 * w * w * w, top]
    }

    fn blowup_component(&self) -> Option<usize> {
        Some(0)
    }
}

/// (u, u', ∫w dz) flow on the linearized carrier.
struct QuadLinearizedChain<'f> {
    field: &'f Field,
    sign: f64,
}

impl<'f> crate::integrator::OdeSystem<3> for QuadLinearizedChain<'f> {
    fn rhs(&self, z: C, y: &[C; 3]) -> [C; 3] {
        let (u, up) = (y[0], y[1]);
        let w = -up / u * self.sign;
        let wp = (z * 0.5 + w * w) * self.sign;
        let top = self
            .field
            .apply_chain(&OdeState::new(z, w, wp))
            .map(|s| s.w)
            .unwrap_or(C::new(0.0, 0.0));
        [up, -0.5 * z * u, top]
    }
}

/// Compare a pointwise-transformed trajectory against integrating the
/// image equation: map base states along a segment, then integrate the
/// image flow from the first mapped state and report the largest
/// deviation at matched points. The universal correctness check for a
/// transformation.
pub fn transform_consistency(
    base: &Field,
    step: BtKind,
    from: C,
    to: C,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let mapped = base.clone().with_step(step);
    let image_alpha = mapped.alpha();

    let mut cursor = mapped.cursor(cfg);
    cursor.goto(from)?;
    let mut samples: Vec<OdeState> = vec![cursor.state()?];
    cursor.advance(to, |s| {
        samples.push(*s);
        Flow::Continue
    })?;

    // integrate the image equation from the first mapped state
    let sys = PainleveTwo { alpha: image_alpha };
    let first = samples[0];
    let path = PathSpec::line(from, to);
    let mut worst = 0.0f64;
    let mut idx = 1usize;
    let out = drive(&sys, [first.w, first.wp], &path, cfg, |rec| {
        // compare at the sample nearest to each accepted step
        while idx < samples.len() {
            let t = (samples[idx].z - from).norm();
            let t_step = (rec.z1 - from).norm();
            if t > t_step {
                break;
            }
            let theta = if rec.h > 0.0 {
                ((samples[idx].z - rec.z0).norm() / rec.h).clamp(0.0, 1.0)
            } else {
                1.0
            };
            let y = rec.dense(theta);
            let dev = (y[0] - samples[idx].w).norm() / (1.0 + samples[idx].w.norm());
            if dev > worst {
                worst = dev;
            }
            idx += 1;
        }
        Flow::Continue
    })?;
    let _ = out;
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn linearized_w1_matches_direct_integration_near_origin() {
        let field = Field::from_spec(&SolutionSpec::w1()).unwrap();
        let cfg = IntegratorConfig::default();
        let mut cur = field.cursor(&cfg);
        let s = cur.goto(c(1.0, 0.0)).unwrap();

        // direct P2 run over the same pole-free stretch
        let seed = transforms::resolve_spec(&SolutionSpec::w1()).unwrap();
        let traj = crate::integrator::integrate_p2(
            seed.alpha,
            seed.state,
            &PathSpec::line(c(0.0, 0.0), c(1.0, 0.0)),
            &cfg,
        )
        .unwrap();
        let direct = traj.last();
        assert!((s.w - direct.w).norm() < 1e-8, "w: {} vs {}", s.w, direct.w);
        assert!((s.wp - direct.wp).norm() < 1e-7);
    }

    #[test]
    fn linearized_walks_straight_through_poles() {
        // crossing the first two poles of the distinguished solution
        let field = Field::from_spec(&SolutionSpec::w1()).unwrap();
        let cfg = IntegratorConfig::default();
        let mut cur = field.cursor(&cfg);
        let s = cur.goto(c(4.0, 0.0)).unwrap();
        // the value is finite and real on the real axis
        assert!(s.w.is_finite());
        assert!(s.w.im.abs() < 1e-12);
    }

    #[test]
    fn direct_goto_crosses_pole_and_records_it() {
        // ride the distinguished solution with the *direct* carrier
        // through its first pole
        let seed = transforms::resolve_spec(&SolutionSpec::w1()).unwrap();
        let spec = SolutionSpec::from_data(
            seed.alpha,
            seed.state.z,
            seed.state.w,
            seed.state.wp,
        );
        let field = Field::from_spec(&spec).unwrap();
        let cfg = IntegratorConfig::default();
        let mut cur = field.cursor(&cfg);
        let s = cur.goto(c(3.6, 0.0)).unwrap();
        assert!(s.w.is_finite());
        let crossed = cur.take_crossed_poles();
        assert_eq!(crossed.len(), 1, "crossed {:?}", crossed);
        let p = crossed[0];
        assert!((p.p.re - 2.94583).abs() < 1e-4, "pole at {}", p.p);
        assert_eq!(p.eta, -1);
        // linearized evaluation on the far side agrees
        let lin = Field::from_spec(&SolutionSpec::w1()).unwrap();
        let mut lc = lin.cursor(&cfg);
        let sl = lc.goto(c(3.6, 0.0)).unwrap();
        assert!(
            (s.w - sl.w).norm() < 1e-4 * (1.0 + sl.w.norm()),
            "direct {} vs linearized {}",
            s.w,
            sl.w
        );
    }

    #[test]
    fn rational_field_is_exact() {
        let field = Field::from_spec(&SolutionSpec::rational()).unwrap();
        let cfg = IntegratorConfig::default();
        let mut cur = field.cursor(&cfg);
        let s = cur.goto(c(5.0, 3.0)).unwrap();
        assert!((s.w + 1.0 / c(5.0, 3.0)).norm() < 1e-14);
    }

    #[test]
    fn chained_field_shifts_alpha() {
        let field = Field::from_spec(&SolutionSpec::w1())
            .unwrap()
            .with_step(BtKind::Up);
        assert!((field.alpha() - c(1.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn up_image_of_w1_satisfies_its_equation() {
        let base = Field::from_spec(&SolutionSpec::w1()).unwrap();
        let cfg = IntegratorConfig::with_tol(1e-11);
        let dev = transform_consistency(&base, BtKind::Up, c(0.2, 0.0), c(1.6, 0.0), &cfg).unwrap();
        assert!(dev < 1e-6, "deviation {dev:.3e}");
    }

    #[test]
    fn reflect_image_consistency() {
        let spec = SolutionSpec::from_data(c(0.3, 0.0), c(0.0, 0.0), c(0.4, 0.0), c(0.1, 0.0));
        let base = Field::from_spec(&spec).unwrap();
        let cfg = IntegratorConfig::with_tol(1e-11);
        let dev =
            transform_consistency(&base, BtKind::Reflect, c(0.0, 0.0), c(1.2, 0.0), &cfg).unwrap();
        assert!(dev < 1e-7, "deviation {dev:.3e}");
    }
}
