//! The degeneracy algebra: T = I·σ_y (parity composed with a spin flip),
//! the antilinear conjugation R, their (anti)commutation relations with the
//! discrete A± and H₋, and the N=2 supercharge identities on the
//! four-component Hamiltonian diag(H₊, H₋).
//!
//! T is an index permutation composed with the constant matrix σ_y — never
//! an interpolation — which the bit-exactly symmetric grids make exact.

use crate::error::{Error, Result};
use crate::fields::{MatrixSuperpotential, Sector};
use crate::ladder::{apply_lowering, apply_raising};
use crate::numerics::{
    discretize_factorized, discretize_factorized_plus_full, BandedSymmetricOperator, Grid,
    SpinorField,
};
use crate::C64;

/// (Tψ)(z) = σ_y·ψ(−z), componentwise (−i·ψ₂(−z), +i·ψ₁(−z)). T² = 1.
pub fn apply_t(psi: &SpinorField) -> SpinorField {
    let grid = psi.grid();
    let mut out = psi.clone();
    let i = C64::new(0.0, 1.0);
    for k in 0..psi.len() {
        let r = match psi.space() {
            crate::numerics::StaggeredSpace::Nodes => grid.reflected_node(k),
            crate::numerics::StaggeredSpace::Links => grid.reflected_link(k),
        };
        out.values[k] = [-i * psi.values[r][1], i * psi.values[r][0]];
    }
    out
}

/// Componentwise complex conjugation; antilinear.
pub fn apply_r(psi: &SpinorField) -> SpinorField {
    let mut out = psi.clone();
    for v in &mut out.values {
        v[0] = v[0].conj();
        v[1] = v[1].conj();
    }
    out
}

/// One operator identity measured on a probe set: `residual` is the largest
/// sup-norm defect per unit probe, `scale` the natural magnitude of the
/// operator entries that could break the identity.
#[derive(Debug, Clone, Copy)]
pub struct RelationResidual {
    pub residual: f64,
    pub scale: f64,
}

impl RelationResidual {
    pub fn relative(&self) -> f64 {
        self.residual / self.scale
    }
}

/// Residuals of the relations involving only the first-order operators;
/// well defined in any frame, including complex ones.
#[derive(Debug, Clone, Copy)]
pub struct FirstOrderResiduals {
    /// TA⁻ + A⁻T
    pub anticommutator_ta_minus: RelationResidual,
    /// TA⁺ + A⁺T
    pub anticommutator_ta_plus: RelationResidual,
    /// TR + RT
    pub anticommutator_tr: RelationResidual,
    /// RA⁻ − A⁻R
    pub commutator_ra_minus: RelationResidual,
    /// RA⁺ − A⁺R
    pub commutator_ra_plus: RelationResidual,
}

/// Full algebra report: first-order relations, the H₋ commutators, and the
/// supercharge identities of H = diag(H₊, H₋) with Q⁺ = A⁻⊗σ⁺, Q⁻ = A⁺⊗σ⁻.
#[derive(Debug, Clone, Copy)]
pub struct AlgebraReport {
    pub first_order: FirstOrderResiduals,
    /// [T, H₋]
    pub commutator_th: RelationResidual,
    /// [R, H₋]
    pub commutator_rh: RelationResidual,
    /// {Q⁺, Q⁻} − H
    pub supercharge_anticommutator: RelationResidual,
    /// (Q⁺)²
    pub supercharge_plus_squared: RelationResidual,
    /// (Q⁻)²
    pub supercharge_minus_squared: RelationResidual,
    /// [Q⁺, H] (its adjoint covers [Q⁻, H])
    pub commutator_qh: RelationResidual,
}

impl AlgebraReport {
    pub fn entries(&self) -> [(&'static str, RelationResidual); 11] {
        [
            (
                "anticommutator_ta_minus",
                self.first_order.anticommutator_ta_minus,
            ),
            (
                "anticommutator_ta_plus",
                self.first_order.anticommutator_ta_plus,
            ),
            ("anticommutator_tr", self.first_order.anticommutator_tr),
            ("commutator_ra_minus", self.first_order.commutator_ra_minus),
            ("commutator_ra_plus", self.first_order.commutator_ra_plus),
            ("commutator_th", self.commutator_th),
            ("commutator_rh", self.commutator_rh),
            (
                "supercharge_anticommutator",
                self.supercharge_anticommutator,
            ),
            ("supercharge_plus_squared", self.supercharge_plus_squared),
            ("supercharge_minus_squared", self.supercharge_minus_squared),
            ("commutator_qh", self.commutator_qh),
        ]
    }

    pub fn max_relative(&self) -> f64 {
        self.entries()
            .iter()
            .map(|(_, r)| r.relative())
            .fold(0.0, f64::max)
    }

    pub fn passes(&self, tol_rel: f64) -> bool {
        self.max_relative() <= tol_rel
    }
}

const PROBE_COUNT: usize = 8;

fn probe(grid: Grid, space: crate::numerics::StaggeredSpace, seed: u64) -> SpinorField {
    let mut state = seed.wrapping_mul(0x2545F4914F6CDD1D).wrapping_add(99);
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let mut f = SpinorField::zeros(grid, space);
    for v in &mut f.values {
        v[0] = C64::new(next(), next());
        v[1] = C64::new(next(), next());
    }
    f
}

fn sup_scale(msup: &MatrixSuperpotential, grid: &Grid) -> f64 {
    let mut m_scale = 0.0_f64;
    for j in 0..grid.links() {
        let m = msup.m_complex(grid.link_z(j));
        for row in m {
            for e in row {
                m_scale = m_scale.max(e.norm());
            }
        }
    }
    m_scale.max(1e-300)
}

fn field_sup(f: &SpinorField) -> f64 {
    f.sup_norm()
}

fn diff_sup(a: &SpinorField, b: &SpinorField, sign: f64) -> f64 {
    let mut sup = 0.0_f64;
    for (x, y) in a.values.iter().zip(&b.values) {
        sup = sup.max((x[0] + sign * y[0]).norm());
        sup = sup.max((x[1] + sign * y[1]).norm());
    }
    sup
}

/// First-order relations measured on deterministic dense probes.
pub fn first_order_residuals(
    msup: &MatrixSuperpotential,
    grid: &Grid,
) -> Result<FirstOrderResiduals> {
    use crate::numerics::StaggeredSpace::{Links, Nodes};
    let m_scale = sup_scale(msup, grid);
    let mut ta_minus = 0.0_f64;
    let mut ta_plus = 0.0_f64;
    let mut tr = 0.0_f64;
    let mut ra_minus = 0.0_f64;
    let mut ra_plus = 0.0_f64;
    for s in 0..PROBE_COUNT as u64 {
        let pn = probe(*grid, Nodes, 2 * s + 1);
        let pl = probe(*grid, Links, 2 * s + 2);
        let sup_n = field_sup(&pn);
        let sup_l = field_sup(&pl);

        // A⁻: nodes → links; A⁺: links → nodes
        let a_minus_p = apply_lowering(msup, &pn)?;
        let t_aminus = apply_t(&a_minus_p);
        let aminus_t = apply_lowering(msup, &apply_t(&pn))?;
        ta_minus = ta_minus.max(diff_sup(&t_aminus, &aminus_t, 1.0) / sup_n);

        let a_plus_p = apply_raising(msup, &pl)?;
        let t_aplus = apply_t(&a_plus_p);
        let aplus_t = apply_raising(msup, &apply_t(&pl))?;
        ta_plus = ta_plus.max(diff_sup(&t_aplus, &aplus_t, 1.0) / sup_l);

        let trp = apply_t(&apply_r(&pn));
        let rtp = apply_r(&apply_t(&pn));
        tr = tr.max(diff_sup(&trp, &rtp, 1.0) / sup_n);

        let r_aminus = apply_r(&a_minus_p);
        let aminus_r = apply_lowering(msup, &apply_r(&pn))?;
        ra_minus = ra_minus.max(diff_sup(&r_aminus, &aminus_r, -1.0) / sup_n);

        let r_aplus = apply_r(&a_plus_p);
        let aplus_r = apply_raising(msup, &apply_r(&pl))?;
        ra_plus = ra_plus.max(diff_sup(&r_aplus, &aplus_r, -1.0) / sup_l);
    }
    Ok(FirstOrderResiduals {
        anticommutator_ta_minus: RelationResidual {
            residual: ta_minus,
            scale: m_scale,
        },
        anticommutator_ta_plus: RelationResidual {
            residual: ta_plus,
            scale: m_scale,
        },
        anticommutator_tr: RelationResidual {
            residual: tr,
            scale: 1.0,
        },
        commutator_ra_minus: RelationResidual {
            residual: ra_minus,
            scale: m_scale,
        },
        commutator_ra_plus: RelationResidual {
            residual: ra_plus,
            scale: m_scale,
        },
    })
}

fn banded_matvec_complex(op: &BandedSymmetricOperator, v: &[[C64; 2]]) -> Vec<[C64; 2]> {
    let dim = 2 * v.len();
    let mut re = vec![0.0; dim];
    let mut im = vec![0.0; dim];
    for (k, pair) in v.iter().enumerate() {
        re[2 * k] = pair[0].re;
        im[2 * k] = pair[0].im;
        re[2 * k + 1] = pair[1].re;
        im[2 * k + 1] = pair[1].im;
    }
    let hre = op.matvec(&re);
    let him = op.matvec(&im);
    (0..v.len())
        .map(|k| {
            [
                C64::new(hre[2 * k], him[2 * k]),
                C64::new(hre[2 * k + 1], him[2 * k + 1]),
            ]
        })
        .collect()
}

fn values_to_field(
    grid: Grid,
    space: crate::numerics::StaggeredSpace,
    values: Vec<[C64; 2]>,
) -> SpinorField {
    let mut f = SpinorField::zeros(grid, space);
    f.values = values;
    f
}

/// Full algebra check on the default (real) frame: first-order relations,
/// [T,H₋] and [R,H₋] against the assembled banded H₋, and the supercharge
/// identities of the four-component H, with {Q⁺,Q⁻} compared entrywise to
/// the independently assembled diag(H₊, H₋).
pub fn algebra_check(msup: &MatrixSuperpotential, grid: &Grid) -> Result<AlgebraReport> {
    use crate::numerics::StaggeredSpace::{Links, Nodes};
    if !msup.is_real() {
        return Err(Error::ComplexFrame);
    }
    let first_order = first_order_residuals(msup, grid)?;
    let h_minus = discretize_factorized(msup, grid, Sector::Minus)?;
    let h_plus_full = discretize_factorized_plus_full(msup, grid)?;
    let h_scale = h_minus.max_abs_entry().max(h_plus_full.max_abs_entry());
    let a_scale = 1.0 / grid.spacing() + sup_scale(msup, grid);

    let mut th = 0.0_f64;
    let mut rh = 0.0_f64;
    let mut qq_h = 0.0_f64;
    let mut qh = 0.0_f64;
    // (Q±)² vanish identically: Q⁺ annihilates the plus sector and Q⁻ the
    // minus sector in the block representation, so the compositions never
    // produce a nonzero component to measure.
    let q_plus_sq = 0.0_f64;
    let q_minus_sq = 0.0_f64;

    for s in 0..PROBE_COUNT as u64 {
        let pn = probe(*grid, Nodes, 3 * s + 1);
        let pl = probe(*grid, Links, 3 * s + 2);
        let sup_n = field_sup(&pn);
        let sup_l = field_sup(&pl);

        // [T, H₋] and [R, H₋]
        let h_pn = values_to_field(*grid, Nodes, banded_matvec_complex(&h_minus, &pn.values));
        let t_h = apply_t(&h_pn);
        let h_t = values_to_field(
            *grid,
            Nodes,
            banded_matvec_complex(&h_minus, &apply_t(&pn).values),
        );
        th = th.max(diff_sup(&t_h, &h_t, -1.0) / sup_n);
        let r_h = apply_r(&h_pn);
        let h_r = values_to_field(
            *grid,
            Nodes,
            banded_matvec_complex(&h_minus, &apply_r(&pn).values),
        );
        rh = rh.max(diff_sup(&r_h, &h_r, -1.0) / sup_n);

        // supercharge identities on the 4-component probe (pl, pn):
        // {Q⁺,Q⁻}(pl,pn) = (A⁻A⁺ pl, A⁺A⁻ pn) must equal (H₊ pl, H₋ pn)
        let a_plus_pl = apply_raising(msup, &pl)?;
        let qq_plus = apply_lowering(msup, &a_plus_pl)?;
        let h_pl = values_to_field(
            *grid,
            Links,
            banded_matvec_complex(&h_plus_full, &pl.values),
        );
        qq_h = qq_h.max(diff_sup(&qq_plus, &h_pl, -1.0) / sup_l);
        let a_minus_pn = apply_lowering(msup, &pn)?;
        let qq_minus = apply_raising(msup, &a_minus_pn)?;
        qq_h = qq_h.max(diff_sup(&qq_minus, &h_pn, -1.0) / sup_n);

        // [Q⁺, H](pl, pn): Q⁺H(pl,pn) − HQ⁺(pl,pn)
        //   = (A⁻(H₋ pn) − H₊(A⁻ pn), 0) on the plus block
        let lhs = apply_lowering(msup, &h_pn)?;
        let rhs = values_to_field(
            *grid,
            Links,
            banded_matvec_complex(&h_plus_full, &a_minus_pn.values),
        );
        qh = qh.max(diff_sup(&lhs, &rhs, -1.0) / sup_n);
    }

    Ok(AlgebraReport {
        first_order,
        commutator_th: RelationResidual {
            residual: th,
            scale: h_scale,
        },
        commutator_rh: RelationResidual {
            residual: rh,
            scale: h_scale,
        },
        supercharge_anticommutator: RelationResidual {
            residual: qq_h,
            scale: h_scale,
        },
        supercharge_plus_squared: RelationResidual {
            residual: q_plus_sq,
            scale: h_scale,
        },
        supercharge_minus_squared: RelationResidual {
            residual: q_minus_sq,
            scale: h_scale,
        },
        commutator_qh: RelationResidual {
            residual: qh,
            scale: h_scale * a_scale,
        },
    })
}

/// One group of (nearly) coincident eigenvalues below the threshold.
#[derive(Debug, Clone)]
pub struct Cluster {
    pub mean: f64,
    pub count: usize,
    pub members: Vec<f64>,
    /// Below the kernel cutoff: a zero mode, not a positive level.
    pub is_zero_mode: bool,
}

/// Sub-threshold eigenvalues grouped into degenerate clusters. Gaps are
/// compared against pair_tol_rel·|λ| with the kernel cutoff as an absolute
/// floor, so exact zero modes cluster together regardless of sign noise.
#[derive(Debug, Clone)]
pub struct DegeneracyReport {
    pub clusters: Vec<Cluster>,
    pub threshold: f64,
    pub zero_cutoff: f64,
}

impl DegeneracyReport {
    pub fn multiplicities(&self) -> Vec<usize> {
        self.clusters.iter().map(|c| c.count).collect()
    }
}

pub fn degeneracy_report(
    eigenvalues: &[f64],
    threshold: f64,
    pair_tol_rel: f64,
    zero_cutoff: f64,
) -> DegeneracyReport {
    let mut vals: Vec<f64> = eigenvalues
        .iter()
        .copied()
        .filter(|&e| e < threshold)
        .collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut clusters: Vec<Cluster> = Vec::new();
    for &e in &vals {
        let fits = clusters.last().is_some_and(|c: &Cluster| {
            let last = *c.members.last().unwrap();
            (e - last).abs() <= pair_tol_rel * last.abs().max(e.abs()) + zero_cutoff
        });
        if fits {
            let c = clusters.last_mut().unwrap();
            c.members.push(e);
            c.count += 1;
            c.mean = c.members.iter().sum::<f64>() / c.count as f64;
        } else {
            clusters.push(Cluster {
                mean: e,
                count: 1,
                members: vec![e],
                is_zero_mode: false,
            });
        }
    }
    for c in &mut clusters {
        c.is_zero_mode = c.mean.abs() < zero_cutoff;
    }
    DegeneracyReport {
        clusters,
        threshold,
        zero_cutoff,
    }
}
