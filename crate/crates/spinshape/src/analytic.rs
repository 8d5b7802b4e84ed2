//! Closed-form results for the tanh-family model: bound-state count and
//! energies, the continuum threshold, the harmonic oracle of the linear
//! family, and hypergeometric closed forms for small-|z| cross-checks.

use crate::error::{Error, Result};
use crate::C64;

fn check_gamma(gamma: f64) -> Result<()> {
    if !gamma.is_finite() || !(gamma > 0.0) {
        return Err(Error::InvalidParams(format!(
            "gamma = {gamma} must be finite and positive"
        )));
    }
    Ok(())
}

/// Strict admissibility of level n: γₙ > |βₙ|/2 with γₙ = γ−n and
/// βₙ = γβ/γₙ, equivalently (γ−n)² > γ|β|/2 with γ−n > 0. This is the
/// square-integrability condition of the level-n zero mode; ties are
/// excluded.
pub fn level_is_admissible(gamma: f64, beta: f64, n: usize) -> bool {
    let gamma_n = gamma - n as f64;
    gamma_n > 0.0 && gamma_n * gamma_n > gamma * beta.abs() / 2.0
}

/// Bound-state energy Eₙ = γ² − (γ−n)² + (β²/4)(1 − γ²/(γ−n)²).
///
/// Equals the telescoped sum of the factorization energies of the flow;
/// inadmissible n is an error, not a number.
pub fn energy_level(gamma: f64, beta: f64, n: usize) -> Result<f64> {
    check_gamma(gamma)?;
    if !level_is_admissible(gamma, beta, n) {
        return Err(Error::NotABoundState { gamma, beta, n });
    }
    let gamma_n = gamma - n as f64;
    Ok(gamma * gamma - gamma_n * gamma_n
        + (beta * beta / 4.0) * (1.0 - gamma * gamma / (gamma_n * gamma_n)))
}

/// Number of admissible levels. Zero signals broken supersymmetry: no
/// normalizable zero mode exists at all.
pub fn bound_state_count(gamma: f64, beta: f64) -> Result<usize> {
    check_gamma(gamma)?;
    let mut n = 0;
    while level_is_admissible(gamma, beta, n) {
        n += 1;
    }
    Ok(n)
}

/// Lowest asymptotic channel energy (γ − |β|/2)². As |z| → ∞ the scalar
/// potential tends to γ² + β²/4 and the Zeeman term to ±γβ·σ_b, so the two
/// channel edges are (γ ± |β|/2)². Every bound level lies strictly below
/// the lower edge.
pub fn continuum_threshold(gamma: f64, beta: f64) -> Result<f64> {
    check_gamma(gamma)?;
    let edge = gamma - beta.abs() / 2.0;
    Ok(edge * edge)
}

/// One row of the analytic level table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Level {
    pub n: usize,
    pub energy: f64,
    pub degeneracy: usize,
}

/// All admissible levels plus the continuum edge. Energies are strictly
/// increasing and strictly below the threshold; each level carries the
/// twofold degeneracy of the minus sector.
#[derive(Debug, Clone)]
pub struct LevelTable {
    pub levels: Vec<Level>,
    pub threshold: f64,
}

impl LevelTable {
    pub fn build(gamma: f64, beta: f64) -> Result<Self> {
        let count = bound_state_count(gamma, beta)?;
        let mut levels = Vec::with_capacity(count);
        for n in 0..count {
            levels.push(Level {
                n,
                energy: energy_level(gamma, beta, n)?,
                degeneracy: 2,
            });
        }
        Ok(Self {
            levels,
            threshold: continuum_threshold(gamma, beta)?,
        })
    }

    pub fn is_broken_susy(&self) -> bool {
        self.levels.is_empty()
    }
}

/// Spectrum of the linear-superpotential model, Eₖ = 2γk. With W = γz and a
/// constant transverse field the spin matrix commutes with H and both spin
/// branches complete the square to the same shifted oscillator, so the
/// value is independent of the field amplitudes and every level is doubly
/// degenerate.
pub fn case1_spectrum(gamma: f64, k: usize) -> f64 {
    2.0 * gamma * k as f64
}

const HYP_MAX_TERMS: usize = 5000;
const HYP_TAIL_REL: f64 = 1e-14;
/// Series arguments with |ξ| above this would need more than a few thousand
/// terms; the ODE integrator is the tool past that point.
const HYP_MODULUS_LIMIT: f64 = 0.99;

/// Gauss hypergeometric series ₂F₁(a, b; c; ξ) = Σ (a)ₖ(b)ₖ/(c)ₖ · ξᵏ/k!,
/// summed until the geometric tail bound drops below 1e−14 of the sum.
/// Restricted to |ξ| < 0.99; c at a nonpositive integer is a pole.
pub fn hyp2f1(a: C64, b: C64, c: C64, xi: C64) -> Result<C64> {
    let modulus = xi.norm();
    if !modulus.is_finite() || modulus >= HYP_MODULUS_LIMIT {
        return Err(Error::SeriesDomain { modulus });
    }
    if c.im == 0.0 && c.re <= 0.0 && (c.re - c.re.round()).abs() < 1e-14 {
        return Err(Error::SeriesPole { c });
    }
    let mut sum = C64::new(1.0, 0.0);
    let mut term = C64::new(1.0, 0.0);
    for k in 0..HYP_MAX_TERMS {
        let kf = k as f64;
        let ratio = (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0));
        term *= ratio * xi;
        sum += term;
        if term.norm() == 0.0 {
            return Ok(sum); // terminating (polynomial) case
        }
        // conservative geometric tail estimate once the ratio has settled
        if k >= 4 {
            let tail = term.norm() * modulus / (1.0 - modulus);
            if tail < HYP_TAIL_REL * sum.norm() {
                return Ok(sum);
            }
        }
    }
    Err(Error::SeriesNoConvergence {
        max_terms: HYP_MAX_TERMS,
    })
}

/// Which of the two linearly independent solutions of the reduced
/// second-order equation to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phi1Branch {
    First,
    Second,
}

fn phi1_series_parameters(beta_n: f64, lambda: f64) -> (C64, C64, C64) {
    (
        C64::new(beta_n / 2.0, 0.0),
        C64::new(-beta_n / 2.0, 0.0),
        C64::new(0.5, -lambda / 2.0),
    )
}

/// Closed form of the first component of the reduced spinor φ:
/// φ₁ = f(ξ)·exp(−(λ/2)·arctan(sinh z)) with ξ = (1 − i·sinh z)/2 and
/// f either F(a,b;c;ξ) or ξ^{1−c}(1−ξ)^{c−a−b}F(1−a,1−b;2−c;ξ),
/// a = βₙ/2, b = −βₙ/2, c = 1/2 − iλ/2. Valid for |sinh z| < √3, which
/// keeps ξ inside the series disc.
pub fn phi1_closed_form(z: f64, beta_n: f64, lambda: f64, branch: Phi1Branch) -> Result<C64> {
    let x = z.sinh();
    let xi = C64::new(0.5, -x / 2.0);
    let (a, b, c) = phi1_series_parameters(beta_n, lambda);
    let f = match branch {
        Phi1Branch::First => hyp2f1(a, b, c, xi)?,
        Phi1Branch::Second => {
            let one = C64::new(1.0, 0.0);
            let pre = xi.powc(one - c) * (one - xi).powc(c - a - b);
            pre * hyp2f1(one - a, one - b, C64::new(2.0, 0.0) - c, xi)?
        }
    };
    let prefactor = (-lambda / 2.0 * x.atan()).exp();
    Ok(f * prefactor)
}

/// Both components of the reduced spinor for the first branch, from the
/// analytic derivative of the series: the first-order system gives
/// φ₂ = −(2/βₙ)(φ₁′ + (g/2)φ₁) = (i/βₙ)·cosh(z)·e^{−(λ/2)arctan(sinh z)}·f′(ξ).
/// Used to seed ODE integrations with a pure branch-one solution.
pub fn phi_pair_closed_form(z: f64, beta_n: f64, lambda: f64) -> Result<[C64; 2]> {
    if beta_n == 0.0 {
        return Err(Error::InvalidParams(
            "phi pair needs beta_n != 0 (components decouple otherwise)".into(),
        ));
    }
    let x = z.sinh();
    let xi = C64::new(0.5, -x / 2.0);
    let (a, b, c) = phi1_series_parameters(beta_n, lambda);
    let f = hyp2f1(a, b, c, xi)?;
    // d/dξ F(a,b;c;ξ) = (ab/c)·F(a+1,b+1;c+1;ξ)
    let one = C64::new(1.0, 0.0);
    let fp = (a * b / c) * hyp2f1(a + one, b + one, c + one, xi)?;
    let prefactor = (-lambda / 2.0 * x.atan()).exp();
    let phi1 = f * prefactor;
    let phi2 = C64::new(0.0, 1.0 / beta_n) * z.cosh() * prefactor * fp;
    Ok([phi1, phi2])
}
