//! Right-hand sides of the flows the laboratory integrates.

use num_complex::Complex64;

type C = Complex64;

/// A first-order complex ODE system y' = f(z, y) of fixed dimension.
pub trait OdeSystem<const N: usize> {
    fn rhs(&self, z: C, y: &[C; N]) -> [C; N];

    /// Component watched for blow-up (movable-pole approach), if any.
    fn blowup_component(&self) -> Option<usize> {
        None
    }
}

/// w'' = α + z·w + 2w³, as the system (w, w')' = (w', α + zw + 2w³).
#[derive(Debug, Clone, Copy)]
pub struct PainleveTwo {
    pub alpha: C,
}

impl OdeSystem<2> for PainleveTwo {
    fn rhs(&self, z: C, y: &[C; 2]) -> [C; 2] {
        let w = y[0];
        [y[1], self.alpha + z * w + 2.0 * w * w * w]
    }

    fn blowup_component(&self) -> Option<usize> {
        Some(0)
    }
}

/// w' = sign·(z/2 + w²).
#[derive(Debug, Clone, Copy)]
pub struct Riccati {
    pub sign: f64,
}

impl OdeSystem<1> for Riccati {
    fn rhs(&self, z: C, y: &[C; 1]) -> [C; 1] {
        let w = y[0];
        [(z * 0.5 + w * w) * self.sign]
    }

    fn blowup_component(&self) -> Option<usize> {
        Some(0)
    }
}

/// u'' = -(z/2)·u, the linearisation of the Riccati flow via w = -u'/u.
/// Entire solutions; no blow-up monitoring.
#[derive(Debug, Clone, Copy)]
pub struct LinearSeed;

impl OdeSystem<2> for LinearSeed {
    fn rhs(&self, z: C, y: &[C; 2]) -> [C; 2] {
        [y[1], -0.5 * z * y[0]]
    }
}

/// Painlevé II augmented with the line integral I' = w, used by the
/// contour residue count.
#[derive(Debug, Clone, Copy)]
pub struct PainleveTwoQuadrature {
    pub alpha: C,
}

impl OdeSystem<3> for PainleveTwoQuadrature {
    fn rhs(&self, z: C, y: &[C; 3]) -> [C; 3] {
        let w = y[0];
        [y[1], self.alpha + z * w + 2.0 * w * w * w, w]
    }

    fn blowup_component(&self) -> Option<usize> {
        Some(0)
    }
}
