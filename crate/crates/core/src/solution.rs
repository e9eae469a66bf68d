//! Domain types identifying a solution and points on it.

use num_complex::Complex64;

/// A point (z, w, w') on a trajectory. The integrator's unit of truth.
///
/// For first-order flows (the Riccati equations) `wp` carries the value
/// the right-hand side forces; for the linear seed equation the fields
/// hold (z, u, u').
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeState {
    pub z: Complex64,
    pub w: Complex64,
    pub wp: Complex64,
}

impl OdeState {
    pub fn new(z: Complex64, w: Complex64, wp: Complex64) -> Self {
        Self { z, w, wp }
    }

    pub fn is_finite(&self) -> bool {
        let f = |c: Complex64| c.re.is_finite() && c.im.is_finite();
        f(self.z) && f(self.w) && f(self.wp)
    }
}

/// Named constructors for distinguished solutions.
///
/// `W1` is the solution of w' = z/2 + w² whose poles are real and
/// positive, realised as w = -u'/u with u the decaying solution of
/// u'' = -(z/2)u. `W2` and `W3` are its rotations by the cube roots of
/// unity. `RiccatiPlus`/`RiccatiMinus` seed a generic solution of
/// w' = ±(z/2 + w²) from a value at a base point. `Rational` is
/// w = -1/z, the rational solution for α = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Recipe {
    W1,
    W2,
    W3,
    RiccatiPlus { z0: Complex64, w0: Complex64 },
    RiccatiMinus { z0: Complex64, w0: Complex64 },
    Rational,
}

/// How a solution is identified: explicit initial data or a recipe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Origin {
    InitialData {
        z0: Complex64,
        w0: Complex64,
        wp0: Complex64,
    },
    Recipe(Recipe),
}

/// Parameter α plus the origin of one solution of w'' = α + zw + 2w³.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolutionSpec {
    pub alpha: Complex64,
    pub origin: Origin,
}

impl SolutionSpec {
    pub fn from_data(alpha: Complex64, z0: Complex64, w0: Complex64, wp0: Complex64) -> Self {
        Self {
            alpha,
            origin: Origin::InitialData { z0, w0, wp0 },
        }
    }

    pub fn from_recipe(recipe: Recipe) -> Self {
        let alpha = match recipe {
            Recipe::W1 | Recipe::W2 | Recipe::W3 | Recipe::RiccatiPlus { .. } => {
                Complex64::new(0.5, 0.0)
            }
            Recipe::RiccatiMinus { .. } => Complex64::new(-0.5, 0.0),
            Recipe::Rational => Complex64::new(1.0, 0.0),
        };
        Self {
            alpha,
            origin: Origin::Recipe(recipe),
        }
    }

    pub fn w1() -> Self {
        Self::from_recipe(Recipe::W1)
    }

    pub fn rational() -> Self {
        Self::from_recipe(Recipe::Rational)
    }

    /// Generic solution of w' = z/2 + w² with w(z0) = w0.
    pub fn riccati_plus(z0: Complex64, w0: Complex64) -> Self {
        Self::from_recipe(Recipe::RiccatiPlus { z0, w0 })
    }
}

/// A spec resolved to concrete initial data; what the integrator consumes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedSeed {
    pub alpha: Complex64,
    pub state: OdeState,
}

impl ResolvedSeed {
    pub fn new(alpha: Complex64, state: OdeState) -> Self {
        Self { alpha, state }
    }
}
