//! Frequency-domain surface thermal response of a layered half-space under
//! modulated Gaussian-spot heating.
//!
//! The response is a Hankel-space integral over radial spatial frequency
//! lambda: H(f) = integral of Z(lambda, omega) * exp(-lambda^2 (rp^2 + rr^2)/8)
//! * lambda dlambda, where Z is the surface impedance of the stack computed by
//! a bottom-up recursion. The recursion uses the tanh form so large |q·h|
//! never overflows. Constant prefactors are dropped throughout: the fitted
//! signal is the phase, which is scale-invariant.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::sample_model::{BottomBoundary, Element, SampleStack};

/// Pump and probe 1/e^2 intensity radii in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpotConfig {
    pub r_pump: f64,
    pub r_probe: f64,
}

impl SpotConfig {
    /// Coaligned pump and probe of equal radius.
    pub fn symmetric(r0: f64) -> Self {
        SpotConfig {
            r_pump: r0,
            r_probe: r0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.r_pump > 0.0 && self.r_probe > 0.0 {
            Ok(())
        } else {
            Err(CoreError::InvalidConfig(format!(
                "spot radii must be positive, got ({}, {})",
                self.r_pump, self.r_probe
            )))
        }
    }
}

/// Strictly increasing modulation frequencies in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    freqs: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(freqs: Vec<f64>) -> Result<Self> {
        if freqs.is_empty() {
            return Err(CoreError::InvalidConfig("frequency grid is empty".into()));
        }
        for pair in freqs.windows(2) {
            if !(pair[0] < pair[1]) {
                return Err(CoreError::InvalidConfig(
                    "frequencies must be strictly increasing".into(),
                ));
            }
        }
        if freqs[0] <= 0.0 || !freqs.iter().all(|f| f.is_finite()) {
            return Err(CoreError::InvalidConfig(
                "frequencies must be positive and finite".into(),
            ));
        }
        Ok(FrequencyGrid { freqs })
    }

    /// `n` log-spaced frequencies from `f_min` to `f_max` inclusive.
    pub fn log_spaced(f_min: f64, f_max: f64, n: usize) -> Result<Self> {
        if !(f_min > 0.0 && f_max > f_min && n >= 2) {
            return Err(CoreError::InvalidConfig(format!(
                "invalid log grid: [{f_min}, {f_max}] with {n} points"
            )));
        }
        let (l0, l1) = (f_min.ln(), f_max.ln());
        let freqs = (0..n)
            .map(|i| (l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp())
            .collect();
        Self::new(freqs)
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }
}

/// Gauss-Legendre quadrature settings for the Hankel integral.
///
/// The integration interval [0, lambda_max_factor / min(r_pump, r_probe)] is
/// split into [`PANEL_COUNT`] equal panels; `node_count` is the total across
/// panels (rounded up to a multiple of the panel count).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub node_count: usize,
    pub lambda_max_factor: f64,
}

/// Number of equal quadrature panels; fixed rather than configurable.
pub const PANEL_COUNT: usize = 4;

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            node_count: 200,
            lambda_max_factor: 10.0,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.node_count < 16 {
            return Err(CoreError::InvalidConfig(format!(
                "quadrature node_count must be >= 16, got {}",
                self.node_count
            )));
        }
        if !(self.lambda_max_factor >= 6.0) {
            return Err(CoreError::InvalidConfig(format!(
                "lambda_max_factor must be >= 6, got {}",
                self.lambda_max_factor
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Complex helpers. num-complex division guards against overflow with scaling;
// the magnitudes here are bounded far from both overflow and underflow, so the
// plain algebraic forms are used in the hot loop.

#[inline(always)]
fn cinv(z: Complex64) -> Complex64 {
    let d = z.re * z.re + z.im * z.im;
    Complex64::new(z.re / d, -z.im / d)
}

#[inline(always)]
fn cdiv(a: Complex64, b: Complex64) -> Complex64 {
    let d = b.re * b.re + b.im * b.im;
    Complex64::new(
        (a.re * b.re + a.im * b.im) / d,
        (a.im * b.re - a.re * b.im) / d,
    )
}

/// Principal square root for inputs in the closed right half-plane with
/// y >= 0 (here x >= 0, y > 0 always), returning Re > 0.
#[inline(always)]
fn csqrt_q(x: f64, y: f64) -> Complex64 {
    let m = (x * x + y * y).sqrt();
    let t = ((m + x) * 0.5).sqrt();
    Complex64::new(t, y / (2.0 * t))
}

/// tanh(z) for Re z >= 0 via exp(-2z); saturates to 1 when Re z is large.
#[inline(always)]
fn ctanh_halfplane(z: Complex64) -> Complex64 {
    let a = -2.0 * z.re;
    if a < -40.0 {
        return Complex64::new(1.0, 0.0);
    }
    let (s, c) = (-2.0 * z.im).sin_cos();
    let ea = a.exp();
    let e = Complex64::new(ea * c, ea * s);
    cdiv(
        Complex64::new(1.0 - e.re, -e.im),
        Complex64::new(1.0 + e.re, e.im),
    )
}

// ---------------------------------------------------------------------------
// Stack compilation: flatten the element list into bottom-up fold steps with
// per-layer constants precomputed.

#[derive(Debug, Clone, Copy)]
enum Step {
    /// Semi-infinite bottom layer: Z = 1/(kz q).
    Terminal { kr_kz: f64, c_kz: f64, kz: f64 },
    /// Insulated bottom layer: Z = 1/(kz q tanh(q h)).
    AdiabaticBottom { kr_kz: f64, c_kz: f64, kz: f64, h: f64 },
    /// Finite layer on top of Z: Z -> (Z + t/(kz q)) / (1 + Z kz q t).
    Layer { kr_kz: f64, c_kz: f64, kz: f64, h: f64 },
    /// Interface on top of Z: Z -> Z + 1/G.
    Interface { inv_g: f64 },
}

/// Bottom-up fold program for one stack; independent of frequency and lambda.
#[derive(Debug, Clone)]
pub struct CompiledStack {
    steps: Vec<Step>,
}

impl CompiledStack {
    pub fn compile(stack: &SampleStack) -> Self {
        let adiabatic = stack.bottom_boundary() == BottomBoundary::Adiabatic;
        let n = stack.elements().len();
        let steps = stack
            .elements()
            .iter()
            .enumerate()
            .rev()
            .map(|(i, el)| match el {
                Element::Interface(f) => Step::Interface { inv_g: 1.0 / f.g },
                Element::Layer(l) => {
                    let (kr_kz, c_kz) = (l.kr / l.kz, l.c / l.kz);
                    if i == n - 1 {
                        if adiabatic {
                            Step::AdiabaticBottom {
                                kr_kz,
                                c_kz,
                                kz: l.kz,
                                h: l.h,
                            }
                        } else {
                            Step::Terminal {
                                kr_kz,
                                c_kz,
                                kz: l.kz,
                            }
                        }
                    } else {
                        Step::Layer {
                            kr_kz,
                            c_kz,
                            kz: l.kz,
                            h: l.h,
                        }
                    }
                }
            })
            .collect();
        CompiledStack { steps }
    }

    /// Surface impedance at spatial frequency `lambda` and angular frequency
    /// `omega`.
    #[inline]
    pub fn fold(&self, lambda: f64, omega: f64) -> Complex64 {
        let l2 = lambda * lambda;
        let mut z = Complex64::new(0.0, 0.0);
        for step in &self.steps {
            match *step {
                Step::Terminal { kr_kz, c_kz, kz } => {
                    let q = csqrt_q(kr_kz * l2, omega * c_kz);
                    z = cinv(kz * q);
                }
                Step::AdiabaticBottom { kr_kz, c_kz, kz, h } => {
                    let q = csqrt_q(kr_kz * l2, omega * c_kz);
                    let t = ctanh_halfplane(q * h);
                    z = cinv(kz * (q * t));
                }
                Step::Layer { kr_kz, c_kz, kz, h } => {
                    let q = csqrt_q(kr_kz * l2, omega * c_kz);
                    let t = ctanh_halfplane(q * h);
                    let kzq = kz * q;
                    z = cdiv(z + cdiv(t, kzq), Complex64::new(1.0, 0.0) + z * kzq * t);
                }
                Step::Interface { inv_g } => z.re += inv_g,
            }
        }
        z
    }
}

/// Surface impedance of `stack` at `(lambda, omega)`, computed bottom-up.
///
/// Principal-root convention (Re q > 0) makes the result dissipative:
/// Re Z > 0, Im Z < 0.
pub fn fold_impedance(stack: &SampleStack, lambda: f64, omega: f64) -> Complex64 {
    CompiledStack::compile(stack).fold(lambda, omega)
}

// ---------------------------------------------------------------------------
// Gauss-Legendre rule on [-1, 1], computed by Newton iteration on the
// Legendre polynomial.

fn legendre_and_deriv(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let pk = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = pk;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_deriv(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                let (p2, d2) = legendre_and_deriv(n, x);
                dp = d2;
                x -= p2 / d2;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // Roots come out in descending order; store ascending.
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
        nodes[i] = -x;
        weights[i] = w;
    }
    if n % 2 == 1 {
        // Middle node of an odd rule is exactly zero.
        let (_, d) = legendre_and_deriv(n, 0.0);
        nodes[n / 2] = 0.0;
        weights[n / 2] = 2.0 / (d * d);
    }
    (nodes, weights)
}

/// Precomputed quadrature nodes with the Gaussian spot kernel folded into the
/// weights; everything here is independent of the stack's thermal values.
#[derive(Debug, Clone)]
pub struct ResponsePlan {
    lambdas: Vec<f64>,
    weights: Vec<f64>,
}

impl ResponsePlan {
    pub fn new(spot: SpotConfig, quad: QuadratureSpec) -> Result<Self> {
        spot.validate()?;
        quad.validate()?;
        let lambda_max = quad.lambda_max_factor / spot.r_pump.min(spot.r_probe);
        let per_panel = quad.node_count.div_ceil(PANEL_COUNT);
        let (xs, ws) = gauss_legendre(per_panel);
        let kernel_a = (spot.r_pump * spot.r_pump + spot.r_probe * spot.r_probe) / 8.0;
        let panel_w = lambda_max / PANEL_COUNT as f64;
        let mut lambdas = Vec::with_capacity(per_panel * PANEL_COUNT);
        let mut weights = Vec::with_capacity(per_panel * PANEL_COUNT);
        for p in 0..PANEL_COUNT {
            let lo = panel_w * p as f64;
            for (&x, &w) in xs.iter().zip(&ws) {
                let lam = lo + panel_w * 0.5 * (x + 1.0);
                lambdas.push(lam);
                weights.push(panel_w * 0.5 * w * lam * (-kernel_a * lam * lam).exp());
            }
        }
        Ok(ResponsePlan { lambdas, weights })
    }

    /// Weighted Hankel integral of the stack impedance at angular frequency
    /// `omega`.
    pub fn response(&self, stack: &CompiledStack, omega: f64) -> Complex64 {
        let mut h = Complex64::new(0.0, 0.0);
        for (&lam, &w) in self.lambdas.iter().zip(&self.weights) {
            let z = stack.fold(lam, omega);
            h.re += w * z.re;
            h.im += w * z.im;
        }
        h
    }
}

/// Complex surface response H(f); constant prefactors dropped.
pub fn surface_response(
    stack: &SampleStack,
    spot: SpotConfig,
    f: f64,
    quad: QuadratureSpec,
) -> Result<Complex64> {
    if !(f > 0.0) {
        return Err(CoreError::InvalidConfig(format!(
            "frequency must be positive, got {f}"
        )));
    }
    let plan = ResponsePlan::new(spot, quad)?;
    let compiled = CompiledStack::compile(stack);
    let h = plan.response(&compiled, 2.0 * std::f64::consts::PI * f);
    if !h.re.is_finite() || !h.im.is_finite() {
        return Err(CoreError::Forward(format!(
            "non-finite response at f = {f} Hz"
        )));
    }
    Ok(h)
}

/// Phase of the surface response in degrees at each grid frequency.
///
/// For physically valid stacks the phase lies in (-90, 0) degrees, so the
/// atan2 branch is already continuous.
pub fn phase_signal(
    stack: &SampleStack,
    spot: SpotConfig,
    grid: &FrequencyGrid,
    quad: QuadratureSpec,
) -> Result<Vec<f64>> {
    let plan = ResponsePlan::new(spot, quad)?;
    let compiled = CompiledStack::compile(stack);
    grid.freqs()
        .iter()
        .map(|&f| {
            let h = plan.response(&compiled, 2.0 * std::f64::consts::PI * f);
            if !h.re.is_finite() || !h.im.is_finite() {
                return Err(CoreError::Forward(format!(
                    "non-finite response at f = {f} Hz"
                )));
            }
            Ok(h.im.atan2(h.re).to_degrees())
        })
        .collect()
}
