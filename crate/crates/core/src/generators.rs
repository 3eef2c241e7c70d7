//! Driver and constraint families.
//!
//! Every family is Lipschitz with a known constant, and every constraint
//! vanishes at `z = 0`. All drivers except `LinearYZ` with `a != 0` also
//! vanish at `z = 0`; those are the coherent ones usable in games.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GeneratorSpec {
    Zero,
    /// `g = b z`
    LinearZ { b: f64 },
    /// `g = -kappa |z|`, the kappa-ignorance driver.
    KappaAbs { kappa: f64 },
    /// `g = a y + b z`
    #[serde(rename = "linear_yz")]
    LinearYZ { a: f64, b: f64 },
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = |name: &'static str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite, got {v}"),
                })
            }
        };
        match *self {
            GeneratorSpec::Zero => Ok(()),
            GeneratorSpec::LinearZ { b } => finite("generator.b", b),
            GeneratorSpec::KappaAbs { kappa } => {
                finite("generator.kappa", kappa)?;
                if kappa < 0.0 {
                    return Err(Error::InvalidParameter {
                        name: "generator.kappa",
                        reason: format!("must be >= 0, got {kappa}"),
                    });
                }
                Ok(())
            }
            GeneratorSpec::LinearYZ { a, b } => {
                finite("generator.a", a)?;
                finite("generator.b", b)
            }
        }
    }

    pub fn eval(&self, _t: f64, y: f64, z: f64) -> f64 {
        match *self {
            GeneratorSpec::Zero => 0.0,
            GeneratorSpec::LinearZ { b } => b * z,
            GeneratorSpec::KappaAbs { kappa } => -kappa * z.abs(),
            GeneratorSpec::LinearYZ { a, b } => a * y + b * z,
        }
    }

    /// Constant `M` in `|g(y1,z1) - g(y2,z2)| <= M (|y1-y2| + |z1-z2|)`.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            GeneratorSpec::Zero => 0.0,
            GeneratorSpec::LinearZ { b } => b.abs(),
            GeneratorSpec::KappaAbs { kappa } => kappa,
            GeneratorSpec::LinearYZ { a, b } => a.abs().max(b.abs()),
        }
    }

    pub fn lipschitz_z(&self) -> f64 {
        match *self {
            GeneratorSpec::Zero => 0.0,
            GeneratorSpec::LinearZ { b } | GeneratorSpec::LinearYZ { b, .. } => b.abs(),
            GeneratorSpec::KappaAbs { kappa } => kappa,
        }
    }

    /// `g(t, y, 0) = 0` for all `t, y`.
    pub fn is_coherent(&self) -> bool {
        match *self {
            GeneratorSpec::LinearYZ { a, .. } => a == 0.0,
            _ => true,
        }
    }

    /// Whether `g` ignores `y`; then the implicit step is solved in one pass.
    pub fn is_y_free(&self) -> bool {
        self.is_coherent()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ConstraintSpec {
    #[default]
    None,
    /// `phi = lambda |z|`
    AbsZ { lambda: f64 },
    /// `phi = lambda z^-`
    NegZ { lambda: f64 },
    /// `phi = lambda (z - c)^+`
    ZAboveC { c: f64, lambda: f64 },
}

impl ConstraintSpec {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &'static str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite and >= 0, got {v}"),
                })
            }
        };
        match *self {
            ConstraintSpec::None => Ok(()),
            ConstraintSpec::AbsZ { lambda } | ConstraintSpec::NegZ { lambda } => {
                nonneg("constraint.lambda", lambda)
            }
            ConstraintSpec::ZAboveC { c, lambda } => {
                nonneg("constraint.c", c)?;
                nonneg("constraint.lambda", lambda)
            }
        }
    }

    pub fn eval(&self, _t: f64, _y: f64, z: f64) -> f64 {
        match *self {
            ConstraintSpec::None => 0.0,
            ConstraintSpec::AbsZ { lambda } => lambda * z.abs(),
            ConstraintSpec::NegZ { lambda } => lambda * (-z).max(0.0),
            ConstraintSpec::ZAboveC { c, lambda } => lambda * (z - c).max(0.0),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match *self {
            ConstraintSpec::None => 0.0,
            ConstraintSpec::AbsZ { lambda }
            | ConstraintSpec::NegZ { lambda }
            | ConstraintSpec::ZAboveC { lambda, .. } => lambda,
        }
    }

    pub fn is_none(&self) -> bool {
        self.lipschitz() == 0.0
    }
}

/// A driver as seen by the solvers: base generator plus `weight * phi`.
///
/// `weight = 0` recovers the base driver; the penalization ladder uses
/// `weight = m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Driver {
    pub generator: GeneratorSpec,
    pub constraint: ConstraintSpec,
    pub weight: f64,
}

impl Driver {
    pub fn plain(generator: GeneratorSpec) -> Self {
        Self {
            generator,
            constraint: ConstraintSpec::None,
            weight: 0.0,
        }
    }

    pub fn penalized(generator: GeneratorSpec, constraint: ConstraintSpec, weight: f64) -> Self {
        Self {
            generator,
            constraint,
            weight,
        }
    }

    pub fn eval(&self, t: f64, y: f64, z: f64) -> f64 {
        let base = self.generator.eval(t, y, z);
        if self.weight == 0.0 {
            base
        } else {
            base + self.weight * self.constraint.eval(t, y, z)
        }
    }

    pub fn lipschitz(&self) -> f64 {
        self.generator.lipschitz() + self.weight * self.constraint.lipschitz()
    }

    pub fn lipschitz_z(&self) -> f64 {
        self.generator.lipschitz_z() + self.weight * self.constraint.lipschitz()
    }

    pub fn is_coherent(&self) -> bool {
        self.generator.is_coherent()
    }

    pub fn is_y_free(&self) -> bool {
        self.generator.is_y_free()
    }
}

impl From<GeneratorSpec> for Driver {
    fn from(generator: GeneratorSpec) -> Self {
        Driver::plain(generator)
    }
}

/// Checks the contraction condition `dt * lipschitz <= 0.5` of the implicit
/// step. On failure reports the smallest step count that satisfies it for
/// the given horizon.
pub fn validate_step(lipschitz: f64, dt: f64, horizon: f64) -> Result<()> {
    let product = dt * lipschitz;
    if product <= 0.5 {
        return Ok(());
    }
    let required_steps = (2.0 * lipschitz * horizon).ceil() as usize;
    Err(Error::StepTooCoarse {
        product,
        required_steps,
    })
}

/// Whether the one-step operator is monotone in the children values,
/// `sqrt(dt) * M_z <= 1`. Comparison results on the lattice rely on it.
pub fn is_monotone_step(lipschitz_z: f64, dt: f64) -> bool {
    dt.sqrt() * lipschitz_z <= 1.0
}
