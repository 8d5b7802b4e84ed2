//! Superpotential families, the vector-field ansatz V = g(z)a + βb, the
//! partner potentials/magnetic fields of H∓, and the shape-invariance
//! parameter flow γₙ = γ−n, βₙ = γβ/γₙ with factorization energies εₙ.

use crate::error::{Error, Result};
use crate::numerics::Grid;
use crate::C64;

/// A shape-invariant superpotential family W(z;γ) = γ·f(z) together with the
/// parameter-free transverse profile g(z) and the one-step parameter map
/// γ → γ₁. New families supply these five pieces; everything else (flow,
/// partner fields, discretization) is generic.
pub trait SuperpotentialFamily {
    fn w(&self, z: f64, gamma: f64) -> f64;
    fn w_prime(&self, z: f64, gamma: f64) -> f64;
    /// Profile of the a-component of V; independent of γ and β by
    /// construction (g = λ·exp ∫(W(γ₁)−W(γ)) collapses to a fixed shape).
    fn g(&self, z: f64, lambda: f64) -> f64;
    fn g_prime(&self, z: f64, lambda: f64) -> f64;
    /// One step of the shape-invariance flow, γ → γ₁.
    fn gamma_step(&self, gamma: f64) -> f64;

    /// W(z→+∞;γ) when finite; `None` for confining (unbounded) families.
    /// Used to seed zero-mode integrations from the asymptotic channel
    /// eigenvectors, which only exist when W saturates.
    fn asymptotic_w(&self, gamma: f64) -> Option<f64>;

    /// Factorization energy ε₁ of one flow step. The scalar shape-invariance
    /// condition makes W²(γ)+W′(γ) − W²(γ₁)+W′(γ₁) independent of z, so the
    /// default evaluates it at z = 0 and adds the (β²−β₁²)/4 piece.
    fn epsilon_step(&self, gamma: f64, beta: f64) -> f64 {
        let gamma1 = self.gamma_step(gamma);
        let beta1 = gamma * beta / gamma1;
        let scal = self.w(0.0, gamma).powi(2) + self.w_prime(0.0, gamma)
            - self.w(0.0, gamma1).powi(2)
            + self.w_prime(0.0, gamma1);
        scal + (beta * beta - beta1 * beta1) / 4.0
    }
}

/// W = γ·tanh(z−z₀), g = λ/cosh(z−z₀), flow γ₁ = γ−1.
///
/// `shift` = z₀ defaults to 0. A nonzero shift keeps the family shape
/// invariant but destroys the oddness of W, which is exactly the negative
/// control wanted by the symmetry checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TanhSuperpotential {
    pub shift: f64,
}

impl TanhSuperpotential {
    pub fn new() -> Self {
        Self { shift: 0.0 }
    }

    pub fn shifted(shift: f64) -> Self {
        Self { shift }
    }
}

impl Default for TanhSuperpotential {
    fn default() -> Self {
        Self::new()
    }
}

impl SuperpotentialFamily for TanhSuperpotential {
    fn w(&self, z: f64, gamma: f64) -> f64 {
        gamma * (z - self.shift).tanh()
    }

    fn w_prime(&self, z: f64, gamma: f64) -> f64 {
        let c = (z - self.shift).cosh();
        gamma / (c * c)
    }

    fn g(&self, z: f64, lambda: f64) -> f64 {
        lambda / (z - self.shift).cosh()
    }

    fn g_prime(&self, z: f64, lambda: f64) -> f64 {
        let u = z - self.shift;
        -lambda * u.tanh() / u.cosh()
    }

    fn gamma_step(&self, gamma: f64) -> f64 {
        gamma - 1.0
    }

    fn asymptotic_w(&self, gamma: f64) -> Option<f64> {
        Some(gamma)
    }
}

/// W = γ·z with constant transverse field (g ≡ λ). The flow is trivial,
/// γ₁ = γ, and every level spacing is ε = 2γ: both spin branches reduce to
/// shifted harmonic oscillators, giving Eₖ = 2γk doubly degenerate.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LinearSuperpotential;

impl SuperpotentialFamily for LinearSuperpotential {
    fn w(&self, z: f64, gamma: f64) -> f64 {
        gamma * z
    }

    fn w_prime(&self, _z: f64, gamma: f64) -> f64 {
        gamma
    }

    fn g(&self, _z: f64, lambda: f64) -> f64 {
        lambda
    }

    fn g_prime(&self, _z: f64, _lambda: f64) -> f64 {
        0.0
    }

    fn gamma_step(&self, gamma: f64) -> f64 {
        gamma
    }

    fn asymptotic_w(&self, _gamma: f64) -> Option<f64> {
        None
    }
}

/// W = γ·tanh(z), γ > 0. Rejects non-finite z.
pub fn superpotential_case2(z: f64, gamma: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::InvalidParams(format!("non-finite z = {z}")));
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidParams(format!(
            "superpotential strength gamma = {gamma} must be positive"
        )));
    }
    Ok(gamma * z.tanh())
}

/// dW/dz for W = γ·tanh(z): γ/cosh²(z).
pub fn superpotential_case2_prime(z: f64, gamma: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::InvalidParams(format!("non-finite z = {z}")));
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidParams(format!(
            "superpotential strength gamma = {gamma} must be positive"
        )));
    }
    let c = z.cosh();
    Ok(gamma / (c * c))
}

/// Transverse-field profile g(z) = λ/cosh(z). Takes no γ or β: the profile
/// is the same for every member of the flow.
pub fn g_profile(z: f64, lambda: f64) -> f64 {
    lambda / z.cosh()
}

/// Base parameters (γ, β, λ) of the model plus the flow level n at which
/// operators are evaluated. γ > 0 is required; the flowed pair always
/// satisfies γₖβₖ = γβ exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub gamma: f64,
    pub beta: f64,
    pub lambda: f64,
    pub level: usize,
}

impl ModelParams {
    pub fn new(gamma: f64, beta: f64, lambda: f64) -> Result<Self> {
        if !gamma.is_finite() || !(gamma > 0.0) {
            return Err(Error::InvalidParams(format!(
                "gamma = {gamma} must be finite and positive"
            )));
        }
        if !beta.is_finite() || !lambda.is_finite() {
            return Err(Error::InvalidParams(format!(
                "beta = {beta} and lambda = {lambda} must be finite"
            )));
        }
        Ok(Self {
            gamma,
            beta,
            lambda,
            level: 0,
        })
    }

    /// Same base parameters, operators taken at flow level n.
    pub fn at_level(&self, n: usize) -> Self {
        Self { level: n, ..*self }
    }
}

/// One step of the parameter flow: the flowed pair (γₖ, βₖ) and the
/// factorization energy εₖ consumed to reach it (ε₀ = 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowStep {
    pub gamma: f64,
    pub beta: f64,
    pub epsilon: f64,
}

/// Iterates the shape-invariance flow k = 0..=n. Fails if any flowed γₖ
/// leaves the admissible region γₖ > 0 (the wave functions would stop being
/// square integrable there and βₖ = γβ/γₖ blows up).
pub fn parameter_flow(
    family: &dyn SuperpotentialFamily,
    params: &ModelParams,
    n: usize,
) -> Result<Vec<FlowStep>> {
    let mut steps = Vec::with_capacity(n + 1);
    steps.push(FlowStep {
        gamma: params.gamma,
        beta: params.beta,
        epsilon: 0.0,
    });
    for k in 1..=n {
        let prev = steps[k - 1];
        let gamma_k = family.gamma_step(prev.gamma);
        if !(gamma_k > 0.0) {
            return Err(Error::FlowOutOfRange { step: k, gamma_k });
        }
        let beta_k = params.gamma * params.beta / gamma_k;
        let epsilon_k = family.epsilon_step(prev.gamma, prev.beta);
        steps.push(FlowStep {
            gamma: gamma_k,
            beta: beta_k,
            epsilon: epsilon_k,
        });
    }
    Ok(steps)
}

/// Orthonormal pair (a, b) fixing the directions of the two components of
/// V(z) = g(z)a + βb. Default: a along z, b along x, which keeps every spin
/// matrix real.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameVectors {
    pub a: [f64; 3],
    pub b: [f64; 3],
}

fn dot3(u: [f64; 3], v: [f64; 3]) -> f64 {
    u[0] * v[0] + u[1] * v[1] + u[2] * v[2]
}

impl FrameVectors {
    pub fn new(a: [f64; 3], b: [f64; 3]) -> Result<Self> {
        let tol = 1e-12;
        if (dot3(a, a) - 1.0).abs() > tol || (dot3(b, b) - 1.0).abs() > tol {
            return Err(Error::InvalidFrame(
                "frame vectors must be unit length".into(),
            ));
        }
        if dot3(a, b).abs() > tol {
            return Err(Error::InvalidFrame(
                "frame vectors must be perpendicular".into(),
            ));
        }
        Ok(Self { a, b })
    }

    /// a ∥ z, b ∥ x.
    pub fn default_zx() -> Self {
        Self {
            a: [0.0, 0.0, 1.0],
            b: [1.0, 0.0, 0.0],
        }
    }

    /// True when both vectors lie in the x–z plane, so a·σ and b·σ are real
    /// symmetric and all discretized operators stay real.
    pub fn is_real(&self) -> bool {
        self.a[1] == 0.0 && self.b[1] == 0.0
    }
}

impl Default for FrameVectors {
    fn default() -> Self {
        Self::default_zx()
    }
}

/// The 2×2 matrix superpotential M(z) = W(z)·1 + g(z)(a·σ)/2 + β(b·σ)/2
/// evaluated at the flowed parameters of `params.level`, together with its
/// derivative M′(z). This is the coefficient of the first-order operators
/// A± = ∓d/dz + M and the single object the discretizations consume.
pub struct MatrixSuperpotential<'f> {
    family: &'f dyn SuperpotentialFamily,
    params: ModelParams,
    frame: FrameVectors,
    eff_gamma: f64,
    eff_beta: f64,
}

impl<'f> MatrixSuperpotential<'f> {
    pub fn new(
        family: &'f dyn SuperpotentialFamily,
        params: ModelParams,
        frame: FrameVectors,
    ) -> Result<Self> {
        let flow = parameter_flow(family, &params, params.level)?;
        let last = flow[params.level];
        Ok(Self {
            family,
            params,
            frame,
            eff_gamma: last.gamma,
            eff_beta: last.beta,
        })
    }

    /// Convenience constructor in the default a∥z, b∥x frame.
    pub fn in_default_frame(
        family: &'f dyn SuperpotentialFamily,
        params: ModelParams,
    ) -> Result<Self> {
        Self::new(family, params, FrameVectors::default_zx())
    }

    pub fn family(&self) -> &'f dyn SuperpotentialFamily {
        self.family
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn frame(&self) -> &FrameVectors {
        &self.frame
    }

    /// Flowed superpotential strength γₙ at this level.
    pub fn gamma_n(&self) -> f64 {
        self.eff_gamma
    }

    /// Flowed transverse strength βₙ at this level.
    pub fn beta_n(&self) -> f64 {
        self.eff_beta
    }

    pub fn lambda(&self) -> f64 {
        self.params.lambda
    }

    pub fn w(&self, z: f64) -> f64 {
        self.family.w(z, self.eff_gamma)
    }

    pub fn w_prime(&self, z: f64) -> f64 {
        self.family.w_prime(z, self.eff_gamma)
    }

    pub fn g(&self, z: f64) -> f64 {
        self.family.g(z, self.params.lambda)
    }

    pub fn g_prime(&self, z: f64) -> f64 {
        self.family.g_prime(z, self.params.lambda)
    }

    pub fn is_real(&self) -> bool {
        self.frame.is_real()
    }

    /// M(z) as a real symmetric matrix. Valid only in x–z-plane frames;
    /// callers gate on [`Self::is_real`].
    pub fn m_real(&self, z: f64) -> [[f64; 2]; 2] {
        debug_assert!(self.is_real());
        let w = self.w(z);
        let half_vz = (self.g(z) * self.frame.a[2] + self.eff_beta * self.frame.b[2]) / 2.0;
        let half_vx = (self.g(z) * self.frame.a[0] + self.eff_beta * self.frame.b[0]) / 2.0;
        [[w + half_vz, half_vx], [half_vx, w - half_vz]]
    }

    /// M′(z), real frames only.
    pub fn m_prime_real(&self, z: f64) -> [[f64; 2]; 2] {
        debug_assert!(self.is_real());
        let wp = self.w_prime(z);
        let half_vz = self.g_prime(z) * self.frame.a[2] / 2.0;
        let half_vx = self.g_prime(z) * self.frame.a[0] / 2.0;
        [[wp + half_vz, half_vx], [half_vx, wp - half_vz]]
    }

    /// M(z) as a complex Hermitian matrix, valid in any frame.
    pub fn m_complex(&self, z: f64) -> [[C64; 2]; 2] {
        let w = self.w(z);
        let v = [
            self.g(z) * self.frame.a[0] + self.eff_beta * self.frame.b[0],
            self.g(z) * self.frame.a[1] + self.eff_beta * self.frame.b[1],
            self.g(z) * self.frame.a[2] + self.eff_beta * self.frame.b[2],
        ];
        // u·σ = [[uz, ux−i·uy], [ux+i·uy, −uz]], halved for spin-1/2.
        [
            [
                C64::new(w + v[2] / 2.0, 0.0),
                C64::new(v[0] / 2.0, -v[1] / 2.0),
            ],
            [
                C64::new(v[0] / 2.0, v[1] / 2.0),
                C64::new(w - v[2] / 2.0, 0.0),
            ],
        ]
    }

    /// Scalar potential and magnetic field of the two partner Hamiltonians.
    pub fn partner_fields(&self) -> PartnerFields<'_, 'f> {
        PartnerFields { msup: self }
    }
}

/// Which partner Hamiltonian a discretization or field refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sector {
    Minus,
    Plus,
}

/// V±(z) = W² ± W′ + (g² + β²)/4 and B±(z) = 2W·V ± V′, built strictly from
/// the defining factorization. B± stays in the plane spanned by a and b.
pub struct PartnerFields<'m, 'f> {
    msup: &'m MatrixSuperpotential<'f>,
}

impl PartnerFields<'_, '_> {
    pub fn scalar_potential(&self, z: f64, sector: Sector) -> f64 {
        let m = self.msup;
        let sign = match sector {
            Sector::Minus => -1.0,
            Sector::Plus => 1.0,
        };
        let g = m.g(z);
        m.w(z).powi(2) + sign * m.w_prime(z) + (g * g + m.beta_n() * m.beta_n()) / 4.0
    }

    /// Components of B± along the frame vectors (a, b).
    pub fn magnetic_components(&self, z: f64, sector: Sector) -> (f64, f64) {
        let m = self.msup;
        let sign = match sector {
            Sector::Minus => -1.0,
            Sector::Plus => 1.0,
        };
        let comp_a = 2.0 * m.w(z) * m.g(z) + sign * m.g_prime(z);
        let comp_b = 2.0 * m.w(z) * m.beta_n();
        (comp_a, comp_b)
    }

    /// B± as a Cartesian 3-vector.
    pub fn magnetic_field(&self, z: f64, sector: Sector) -> [f64; 3] {
        let (ca, cb) = self.magnetic_components(z, sector);
        let fr = self.msup.frame();
        [
            ca * fr.a[0] + cb * fr.b[0],
            ca * fr.a[1] + cb * fr.b[1],
            ca * fr.a[2] + cb * fr.b[2],
        ]
    }
}

/// Sup-norms over the grid of the three shape-invariance defects:
/// the scalar condition, the a-component condition 2Wg + g′ = 2W(γ₁)g − g′,
/// and the b-component condition W(γ)β = W(γ₁)β₁. All vanish identically
/// for a shape-invariant family; a wrong flow shows up as an O(1) residual.
#[derive(Debug, Clone, Copy)]
pub struct ShapeInvarianceResiduals {
    pub scalar: f64,
    pub vector_a: f64,
    pub vector_b: f64,
}

impl ShapeInvarianceResiduals {
    pub fn max(&self) -> f64 {
        self.scalar.max(self.vector_a).max(self.vector_b)
    }
}

/// Residuals with the flow taken from the family itself.
pub fn shape_invariance_residuals(
    family: &dyn SuperpotentialFamily,
    params: &ModelParams,
    grid: &Grid,
) -> Result<ShapeInvarianceResiduals> {
    let gamma1 = family.gamma_step(params.gamma);
    if !(gamma1 > 0.0) {
        return Err(Error::FlowOutOfRange {
            step: 1,
            gamma_k: gamma1,
        });
    }
    let beta1 = params.gamma * params.beta / gamma1;
    let epsilon1 = family.epsilon_step(params.gamma, params.beta);
    Ok(shape_invariance_residuals_with_flow(
        family, params, gamma1, beta1, epsilon1, grid,
    ))
}

/// Residuals against an explicit flowed triple; negative controls feed a
/// deliberately wrong (γ₁, β₁, ε₁) here.
pub fn shape_invariance_residuals_with_flow(
    family: &dyn SuperpotentialFamily,
    params: &ModelParams,
    gamma1: f64,
    beta1: f64,
    epsilon1: f64,
    grid: &Grid,
) -> ShapeInvarianceResiduals {
    let (g0, b0, l) = (params.gamma, params.beta, params.lambda);
    let mut scalar = 0.0_f64;
    let mut vector_a = 0.0_f64;
    let mut vector_b = 0.0_f64;
    for i in 0..grid.points() {
        let z = grid.node_z(i);
        let g = family.g(z, l);
        let gp = family.g_prime(z, l);
        let lhs_scal = family.w(z, g0).powi(2) + family.w_prime(z, g0) + (g * g + b0 * b0) / 4.0;
        let rhs_scal = family.w(z, gamma1).powi(2) - family.w_prime(z, gamma1)
            + (g * g + beta1 * beta1) / 4.0
            + epsilon1;
        scalar = scalar.max((lhs_scal - rhs_scal).abs());

        let lhs_a = 2.0 * family.w(z, g0) * g + gp;
        let rhs_a = 2.0 * family.w(z, gamma1) * g - gp;
        vector_a = vector_a.max((lhs_a - rhs_a).abs());

        let lhs_b = family.w(z, g0) * b0;
        let rhs_b = family.w(z, gamma1) * beta1;
        vector_b = vector_b.max((lhs_b - rhs_b).abs());
    }
    ShapeInvarianceResiduals {
        scalar,
        vector_a,
        vector_b,
    }
}
