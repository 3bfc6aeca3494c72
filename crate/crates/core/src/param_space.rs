//! Search-space definition shared by all optimizers and models.
//!
//! Fit parameters live in internal "scaled" coordinates: linear parameters
//! are passed through unchanged, log10 parameters are searched as exponents.
//! All optimizers operate on scaled vectors; physical values only appear at
//! the model boundary and in reports.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Coordinate mapping between physical and scaled space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Linear,
    Log10,
}

/// Whether a parameter is searched or held at a known value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Fit,
    Fixed { value: f64 },
}

/// One named parameter with physical bounds.
///
/// Bounds are in physical units. For `Scale::Log10` the scaled interval is
/// `[log10(lower), log10(upper)]`, which requires `lower > 0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamDef {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub scale: Scale,
    pub role: Role,
}

impl ParamDef {
    pub fn fit(name: impl Into<String>, lower: f64, upper: f64, scale: Scale) -> Self {
        ParamDef {
            name: name.into(),
            lower,
            upper,
            scale,
            role: Role::Fit,
        }
    }

    pub fn fixed(name: impl Into<String>, value: f64) -> Self {
        ParamDef {
            name: name.into(),
            lower: value,
            upper: value,
            scale: Scale::Linear,
            role: Role::Fixed { value },
        }
    }

    /// Bounds in scaled coordinates.
    pub fn scaled_bounds(&self) -> (f64, f64) {
        match self.scale {
            Scale::Linear => (self.lower, self.upper),
            Scale::Log10 => (self.lower.log10(), self.upper.log10()),
        }
    }

    pub fn to_physical(&self, scaled: f64) -> f64 {
        match self.scale {
            Scale::Linear => scaled,
            Scale::Log10 => 10f64.powf(scaled),
        }
    }

    pub fn from_physical(&self, physical: f64) -> f64 {
        match self.scale {
            Scale::Linear => physical,
            Scale::Log10 => physical.log10(),
        }
    }
}

/// Vector in internal (scaled) coordinates, laid out in fit-parameter order.
pub type SearchVector = Vec<f64>;

/// Boundary handling for scaled vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintMode {
    /// Fold overshoot back across the violated bound, repeatedly if needed.
    Reflect,
    /// Saturate at the violated bound.
    Clamp,
}

/// Ordered parameter definitions; the fit subset defines the optimizer
/// vector layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParameterSpace {
    defs: Vec<ParamDef>,
}

impl ParameterSpace {
    pub fn new(defs: Vec<ParamDef>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for def in &defs {
            if !seen.insert(def.name.clone()) {
                return Err(CoreError::InvalidParam(format!(
                    "duplicate parameter name {:?}",
                    def.name
                )));
            }
            if let Role::Fit = def.role {
                if !(def.lower < def.upper) {
                    return Err(CoreError::InvalidParam(format!(
                        "{}: lower {} must be < upper {}",
                        def.name, def.lower, def.upper
                    )));
                }
            }
            if def.scale == Scale::Log10 && def.lower <= 0.0 {
                return Err(CoreError::InvalidParam(format!(
                    "{}: log10 scale requires lower > 0, got {}",
                    def.name, def.lower
                )));
            }
            if let Role::Fixed { value } = def.role {
                if !value.is_finite() {
                    return Err(CoreError::InvalidParam(format!(
                        "{}: fixed value must be finite",
                        def.name
                    )));
                }
            }
        }
        Ok(ParameterSpace { defs })
    }

    pub fn defs(&self) -> &[ParamDef] {
        &self.defs
    }

    /// Number of fit parameters = optimizer vector dimension.
    pub fn dim(&self) -> usize {
        self.fit_defs().count()
    }

    pub fn fit_defs(&self) -> impl Iterator<Item = &ParamDef> {
        self.defs.iter().filter(|d| matches!(d.role, Role::Fit))
    }

    pub fn def(&self, name: &str) -> Option<&ParamDef> {
        self.defs.iter().find(|d| d.name == name)
    }

    /// Scaled bounds of the fit parameters, in vector order.
    pub fn scaled_bounds(&self) -> Vec<(f64, f64)> {
        self.fit_defs().map(|d| d.scaled_bounds()).collect()
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(CoreError::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        Ok(())
    }

    /// Map a scaled vector to physical units (fit parameters only).
    pub fn to_physical(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(v)?;
        Ok(self
            .fit_defs()
            .zip(v)
            .map(|(d, &s)| d.to_physical(s))
            .collect())
    }

    /// Inverse of [`ParameterSpace::to_physical`].
    pub fn from_physical(&self, physical: &[f64]) -> Result<SearchVector> {
        self.check_dim(physical)?;
        Ok(self
            .fit_defs()
            .zip(physical)
            .map(|(d, &p)| d.from_physical(p))
            .collect())
    }

    /// Decode one flat bitstring (`dim * bits_per_param` bits, big-endian per
    /// parameter) to a scaled vector: integer n maps to
    /// `lo + n/(2^L - 1) * (hi - lo)`.
    pub fn decode_bits(&self, bits: &[bool], bits_per_param: usize) -> Result<SearchVector> {
        assert!(
            bits_per_param >= 1 && bits_per_param <= 63,
            "bits_per_param out of range"
        );
        let expected = self.dim() * bits_per_param;
        if bits.len() != expected {
            return Err(CoreError::DimensionMismatch {
                expected,
                got: bits.len(),
            });
        }
        let denom = ((1u64 << bits_per_param) - 1) as f64;
        Ok(self
            .fit_defs()
            .enumerate()
            .map(|(i, d)| {
                let chunk = &bits[i * bits_per_param..(i + 1) * bits_per_param];
                let n = chunk.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64);
                let (lo, hi) = d.scaled_bounds();
                lo + n as f64 / denom * (hi - lo)
            })
            .collect())
    }

    /// Bring every component inside scaled bounds.
    pub fn constrain(&self, v: &[f64], mode: ConstraintMode) -> SearchVector {
        debug_assert_eq!(v.len(), self.dim());
        self.fit_defs()
            .zip(v)
            .map(|(d, &x)| {
                let (lo, hi) = d.scaled_bounds();
                constrain_component(x, lo, hi, mode)
            })
            .collect()
    }

    /// Uniform random point in the scaled box.
    pub fn sample_uniform<R: rand::Rng>(&self, rng: &mut R) -> SearchVector {
        self.fit_defs()
            .map(|d| {
                let (lo, hi) = d.scaled_bounds();
                lo + rng.random::<f64>() * (hi - lo)
            })
            .collect()
    }
}

/// Triangle-wave reflection: folds any overshoot back into `[lo, hi]` in
/// closed form, equivalent to repeated mirroring across the violated bound.
fn constrain_component(x: f64, lo: f64, hi: f64, mode: ConstraintMode) -> f64 {
    if x >= lo && x <= hi {
        return x;
    }
    match mode {
        ConstraintMode::Clamp => x.clamp(lo, hi),
        ConstraintMode::Reflect => {
            let w = hi - lo;
            if w == 0.0 {
                return lo;
            }
            let period = 2.0 * w;
            let mut t = (x - lo) % period;
            if t < 0.0 {
                t += period;
            }
            if t > w {
                t = period - t;
            }
            lo + t
        }
    }
}
