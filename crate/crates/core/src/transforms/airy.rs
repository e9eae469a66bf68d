//! The linear seed equation u'' = -(z/2)u and its distinguished
//! decaying solution.
//!
//! Solutions of w' = z/2 + w² are exactly w = -u'/u for solutions u of
//! the linear equation, so poles of w are zeros of u. The distinguished
//! solution whose poles are real and positive corresponds to the
//! solution u that decays as z → -∞; its value and slope at the origin
//! are the classical constants
//!
//!   u(0)  = 0.3550280538878172
//!   u'(0) = 0.2588194037928068 · 2^{-1/3}
//!
//! (u(z) = Ai(-2^{-1/3} z); the chain rule flips the sign of the slope
//! constant). Both are cross-checked in the test suite against a
//! backward integration seeded with the decaying asymptotics, so the
//! crate needs no special-function library.
//!
//! Evaluation marches a re-centred Taylor series: the recursion at
//! centre a is (k+2)(k+1)·c_{k+2} = -(a·c_k + c_{k-1})/2, and steps are
//! kept short against the local oscillation scale (z/2)^{1/2} so the
//! partial sums never cancel catastrophically. This keeps the zero
//! oracle independent of the adaptive Runge-Kutta integrator.

type C = num_complex::Complex64;

/// u(0) for the decaying solution.
pub const U0: f64 = 0.3550280538878172;

/// u'(0) for the decaying solution: 0.2588194037928068 · 2^{-1/3}.
pub const UP0: f64 = 0.2588194037928068 * 0.793_700_525_984_099_7;

const ORDER: usize = 30;

/// Logarithmic slope -u'(0)/u(0): the value of the distinguished
/// solution at the origin.
pub fn w1_value_at_origin() -> C {
    C::new(-UP0 / U0, 0.0)
}

/// Local Taylor coefficients of the solution with data (u, u') at
/// centre `a`.
fn local_coefficients(a: f64, u: f64, up: f64) -> [f64; ORDER + 1] {
    let mut c = [0.0f64; ORDER + 1];
    c[0] = u;
    c[1] = up;
    for k in 0..=ORDER - 2 {
        let prev = if k == 0 { 0.0 } else { c[k - 1] };
        c[k + 2] = -(a * c[k] + prev) / (2.0 * ((k + 2) * (k + 1)) as f64);
    }
    c
}

fn eval_local(c: &[f64; ORDER + 1], t: f64) -> (f64, f64) {
    let mut u = 0.0f64;
    let mut up = 0.0f64;
    for k in (1..=ORDER).rev() {
        u = u * t + c[k];
        up = up * t + c[k] * k as f64;
    }
    u = u * t + c[0];
    (u, up)
}

fn step_size(a: f64) -> f64 {
    // a few points per local oscillation (z/2)^{1/2}
    (3.0 / (1.0 + a.abs() / 2.0).sqrt()).min(1.0)
}

/// Evaluate (u, u') at real x by marching re-centred series from 0.
pub fn eval_u(u0: f64, up0: f64, x: f64) -> (f64, f64) {
    let dir = if x >= 0.0 { 1.0 } else { -1.0 };
    let mut a = 0.0f64;
    let mut u = u0;
    let mut up = up0;
    while (x - a).abs() > 0.0 {
        let h = step_size(a).min((x - a).abs()) * dir;
        let c = local_coefficients(a, u, up);
        let (nu, nup) = eval_local(&c, h);
        u = nu;
        up = nup;
        a += h;
        if (x - a).abs() < 1e-15 * (1.0 + x.abs()) {
            break;
        }
    }
    (u, up)
}

/// First `count` positive zeros of the solution with data (u0, up0) at
/// the origin: a sign scan over marched series values refined by
/// bisection on the local polynomial.
pub fn u_zeros(u0: f64, up0: f64, count: usize) -> Vec<f64> {
    let mut zeros = Vec::with_capacity(count);
    let mut a = 0.0f64;
    let mut u = u0;
    let mut up = up0;
    let mut guard = 0usize;
    while zeros.len() < count && guard < 100_000 {
        guard += 1;
        let h = step_size(a);
        let c = local_coefficients(a, u, up);
        // scan the local interval for sign changes
        let samples = 24usize;
        let mut t_prev = 0.0f64;
        let mut v_prev = c[0];
        for i in 1..=samples {
            let t = h * i as f64 / samples as f64;
            let (v, _) = eval_local(&c, t);
            if v_prev != 0.0 && v_prev.signum() != v.signum() {
                let mut lo = t_prev;
                let mut hi = t;
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    let (vm, _) = eval_local(&c, mid);
                    if vm.signum() == v_prev.signum() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                zeros.push(a + 0.5 * (lo + hi));
                if zeros.len() == count {
                    return zeros;
                }
            }
            t_prev = t;
            v_prev = v;
        }
        let (nu, nup) = eval_local(&c, h);
        u = nu;
        up = nup;
        a += h;
    }
    zeros
}

/// First `count` poles of the distinguished solution: the zeros of the
/// decaying seed.
pub fn w1_pole_oracle(count: usize) -> Vec<f64> {
    u_zeros(U0, UP0, count)
}
