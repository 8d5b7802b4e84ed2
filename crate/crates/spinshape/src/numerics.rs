//! Grid infrastructure, two discretizations of the partner Hamiltonians, and
//! a banded symmetric eigensolver built on Sturm-sequence bisection with
//! inverse iteration.
//!
//! The factorized scheme discretizes the first-order operator A⁻ as a map
//! from node spinors to link spinors,
//!
//! ```text
//! (A⁻ψ)_{j} = (ψ_j − ψ_{j−1})/h + M(z_j)·(ψ_j + ψ_{j−1})/2
//! ```
//!
//! with Dirichlet walls folded into the first and last link rows. A⁺ is the
//! exact transpose, so H₋ = A⁺A⁻ is a Gram matrix: symmetric, positive
//! semidefinite, and isospectral to A⁻A⁺ on the link side up to structural
//! zeros. H₊ is assembled over the interior links only, which removes the
//! two wall-localized null vectors the rectangular factor would otherwise
//! contribute and leaves the physical H₊ spectrum intact to far below any
//! tolerance used here.

use crate::error::{Error, Result};
use crate::fields::{MatrixSuperpotential, Sector};
use crate::C64;

/// Uniform grid on (−L, L): N interior nodes z_i and N+1 links z_{j−1/2},
/// spacing h = 2L/(N+1). Coordinates are built as exact multiples of h so
/// the node and link sets are bit-exactly symmetric under z → −z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    half_width: f64,
    points: usize,
    spacing: f64,
}

impl Grid {
    pub fn new(half_width: f64, points: usize) -> Result<Self> {
        if !half_width.is_finite() || !(half_width > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half-width {half_width} must be finite and positive"
            )));
        }
        if points < 16 {
            return Err(Error::InvalidGrid(format!(
                "points = {points}, need at least 16"
            )));
        }
        let spacing = 2.0 * half_width / (points as f64 + 1.0);
        Ok(Self {
            half_width,
            points,
            spacing,
        })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Number of interior nodes N.
    pub fn points(&self) -> usize {
        self.points
    }

    /// Number of links, N+1 (walls included as half-cells).
    pub fn links(&self) -> usize {
        self.points + 1
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    fn center(&self) -> f64 {
        (self.points as f64 + 1.0) / 2.0
    }

    /// Node coordinate, i = 0..N−1.
    pub fn node_z(&self, i: usize) -> f64 {
        (i as f64 + 1.0 - self.center()) * self.spacing
    }

    /// Link coordinate, j = 0..N. Link j sits between node j−1 and node j;
    /// links 0 and N touch the Dirichlet walls.
    pub fn link_z(&self, j: usize) -> f64 {
        (j as f64 + 0.5 - self.center()) * self.spacing
    }

    pub fn reflected_node(&self, i: usize) -> usize {
        self.points - 1 - i
    }

    pub fn reflected_link(&self, j: usize) -> usize {
        self.points - j
    }
}

/// Whether a field lives on the nodes or on the links of the staggered grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StaggeredSpace {
    Nodes,
    Links,
}

/// Two-component complex field sampled on nodes or links, with the
/// h-weighted inner product ⟨φ,ψ⟩ = h·Σᵢ(φ̄ᵢ₁ψᵢ₁ + φ̄ᵢ₂ψᵢ₂).
#[derive(Debug, Clone)]
pub struct SpinorField {
    grid: Grid,
    space: StaggeredSpace,
    pub values: Vec<[C64; 2]>,
    /// ln of an overall scale factored out during construction; 0 once the
    /// field has been normalized.
    pub log_scale: f64,
}

impl SpinorField {
    pub fn zeros(grid: Grid, space: StaggeredSpace) -> Self {
        let n = match space {
            StaggeredSpace::Nodes => grid.points(),
            StaggeredSpace::Links => grid.links(),
        };
        Self {
            grid,
            space,
            values: vec![[C64::new(0.0, 0.0); 2]; n],
            log_scale: 0.0,
        }
    }

    pub fn from_fn(grid: Grid, space: StaggeredSpace, f: impl Fn(f64) -> [C64; 2]) -> Self {
        let mut out = Self::zeros(grid, space);
        for k in 0..out.values.len() {
            out.values[k] = f(out.coord(k));
        }
        out
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn space(&self) -> StaggeredSpace {
        self.space
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Coordinate of sample k in this field's space.
    pub fn coord(&self, k: usize) -> f64 {
        match self.space {
            StaggeredSpace::Nodes => self.grid.node_z(k),
            StaggeredSpace::Links => self.grid.link_z(k),
        }
    }

    fn compatible(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid || self.space != other.space {
            return Err(Error::GridMismatch(
                "inner product needs matching grid and staggering".into(),
            ));
        }
        Ok(())
    }

    pub fn inner(&self, other: &Self) -> Result<C64> {
        self.compatible(other)?;
        let mut acc = C64::new(0.0, 0.0);
        for (a, b) in self.values.iter().zip(&other.values) {
            acc += a[0].conj() * b[0] + a[1].conj() * b[1];
        }
        Ok(acc * self.grid.spacing())
    }

    pub fn norm(&self) -> f64 {
        let mut acc = 0.0;
        for v in &self.values {
            acc += v[0].norm_sqr() + v[1].norm_sqr();
        }
        (acc * self.grid.spacing()).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values
            .iter()
            .map(|v| v[0].norm().max(v[1].norm()))
            .fold(0.0, f64::max)
    }

    pub fn scale(&mut self, c: C64) {
        for v in &mut self.values {
            v[0] *= c;
            v[1] *= c;
        }
    }

    /// Normalizes to unit grid norm and clears the log-scale bookkeeping.
    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            self.scale(C64::new(1.0 / n, 0.0));
        }
        self.log_scale = 0.0;
    }

    /// self += c·other.
    pub fn axpy(&mut self, c: C64, other: &Self) -> Result<()> {
        self.compatible(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            a[0] += c * b[0];
            a[1] += c * b[1];
        }
        Ok(())
    }

    /// Wraps an eigenvector coefficient vector (unit 2-norm) as a grid field
    /// with unit grid norm. Plus-sector vectors live on the interior links
    /// and are padded with zeros on the two wall links.
    pub fn from_eigenvector(grid: Grid, sector: Sector, coeffs: &[f64]) -> Result<Self> {
        let (space, expected, offset) = match sector {
            Sector::Minus => (StaggeredSpace::Nodes, 2 * grid.points(), 0usize),
            Sector::Plus => (StaggeredSpace::Links, 2 * (grid.points() - 1), 1usize),
        };
        if coeffs.len() != expected {
            return Err(Error::GridMismatch(format!(
                "eigenvector length {} does not match sector dimension {}",
                coeffs.len(),
                expected
            )));
        }
        let mut field = Self::zeros(grid, space);
        let scale = 1.0 / grid.spacing().sqrt();
        for k in 0..expected / 2 {
            field.values[k + offset] = [
                C64::new(coeffs[2 * k] * scale, 0.0),
                C64::new(coeffs[2 * k + 1] * scale, 0.0),
            ];
        }
        Ok(field)
    }
}

/// h-weighted sesquilinear inner product.
pub fn inner_product(phi: &SpinorField, psi: &SpinorField) -> Result<C64> {
    phi.inner(psi)
}

pub(crate) type Mat2 = [[f64; 2]; 2];

fn mat2_mul(a: Mat2, b: Mat2) -> Mat2 {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

fn mat2_transpose(a: Mat2) -> Mat2 {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

fn mat2_add(a: Mat2, b: Mat2) -> Mat2 {
    [
        [a[0][0] + b[0][0], a[0][1] + b[0][1]],
        [a[1][0] + b[1][0], a[1][1] + b[1][1]],
    ]
}

/// Left/right 2×2 blocks of one A⁻ link row: (A⁻ψ)_j = BL·ψ_{j−1} + BR·ψ_j
/// with BL = −1/h + M(z_j)/2 and BR = +1/h + M(z_j)/2.
pub(crate) fn link_blocks(msup: &MatrixSuperpotential, grid: &Grid, j: usize) -> (Mat2, Mat2) {
    let inv_h = 1.0 / grid.spacing();
    let m = msup.m_real(grid.link_z(j));
    let bl = [
        [-inv_h + m[0][0] / 2.0, m[0][1] / 2.0],
        [m[1][0] / 2.0, -inv_h + m[1][1] / 2.0],
    ];
    let br = [
        [inv_h + m[0][0] / 2.0, m[0][1] / 2.0],
        [m[1][0] / 2.0, inv_h + m[1][1] / 2.0],
    ];
    (bl, br)
}

/// Real symmetric banded matrix, upper bands stored: `bands[b][i] = A[i][i+b]`.
/// Symmetry is structural, not checked.
#[derive(Debug, Clone)]
pub struct BandedSymmetricOperator {
    dim: usize,
    half_bandwidth: usize,
    bands: Vec<Vec<f64>>,
}

/// One eigenpair from [`BandedSymmetricOperator::eigen_lowest`]. `converged`
/// reports whether inverse iteration met its residual target.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub converged: bool,
}

struct BandedLdlt {
    dim: usize,
    hbw: usize,
    d: Vec<f64>,
    /// l[c−1][j] = L[j+c][j]
    l: Vec<Vec<f64>>,
    guarded: bool,
}

impl BandedLdlt {
    fn negatives(&self) -> usize {
        self.d.iter().filter(|&&x| x < 0.0).count()
    }

    fn solve_in_place(&self, x: &mut [f64]) {
        let (n, b) = (self.dim, self.hbw);
        for j in 0..n {
            let lo = j.saturating_sub(b);
            let mut s = x[j];
            for k in lo..j {
                s -= self.l[j - k - 1][k] * x[k];
            }
            x[j] = s;
        }
        for j in 0..n {
            x[j] /= self.d[j];
        }
        for j in (0..n).rev() {
            let hi = (j + b).min(n - 1);
            let mut s = x[j];
            for i in j + 1..=hi {
                s -= self.l[i - j - 1][j] * x[i];
            }
            x[j] = s;
        }
    }
}

impl BandedSymmetricOperator {
    pub fn new(dim: usize, half_bandwidth: usize) -> Self {
        let bands = (0..=half_bandwidth)
            .map(|b| vec![0.0; dim.saturating_sub(b)])
            .collect();
        Self {
            dim,
            half_bandwidth,
            bands,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_bandwidth(&self) -> usize {
        self.half_bandwidth
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        let b = hi - lo;
        if b > self.half_bandwidth {
            0.0
        } else {
            self.bands[b][lo]
        }
    }

    /// Adds v at (i, j) and mirrors it; i ≤ j required and within band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i <= j && j - i <= self.half_bandwidth);
        self.bands[j - i][i] += v;
    }

    pub fn shift_diagonal(&mut self, c: f64) {
        for x in &mut self.bands[0] {
            *x += c;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim);
        let mut y = vec![0.0; self.dim];
        for i in 0..self.dim {
            let mut s = self.bands[0][i] * x[i];
            for b in 1..=self.half_bandwidth {
                if i + b < self.dim {
                    s += self.bands[b][i] * x[i + b];
                }
                if i >= b {
                    s += self.bands[b][i - b] * x[i - b];
                }
            }
            y[i] = s;
        }
        y
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.bands
            .iter()
            .flat_map(|band| band.iter())
            .fold(0.0_f64, |m, &x| m.max(x.abs()))
    }

    /// Interval certain to contain the whole spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.dim {
            let mut radius = 0.0;
            for b in 1..=self.half_bandwidth {
                if i + b < self.dim {
                    radius += self.bands[b][i].abs();
                }
                if i >= b {
                    radius += self.bands[b][i - b].abs();
                }
            }
            lo = lo.min(self.bands[0][i] - radius);
            hi = hi.max(self.bands[0][i] + radius);
        }
        (lo, hi)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.dim]; self.dim];
        for i in 0..self.dim {
            for j in 0..self.dim {
                a[i][j] = self.get(i, j);
            }
        }
        a
    }

    /// Two banded operators stacked block-diagonally (used by the optional
    /// direct diagonalization of the four-component supersymmetric H).
    pub fn block_diag(a: &Self, b: &Self) -> Self {
        let hbw = a.half_bandwidth.max(b.half_bandwidth);
        let mut out = Self::new(a.dim + b.dim, hbw);
        for i in 0..a.dim {
            for bb in 0..=a.half_bandwidth {
                if i + bb < a.dim {
                    out.add(i, i + bb, a.bands[bb][i]);
                }
            }
        }
        for i in 0..b.dim {
            for bb in 0..=b.half_bandwidth {
                if i + bb < b.dim {
                    out.add(a.dim + i, a.dim + i + bb, b.bands[bb][i]);
                }
            }
        }
        out
    }

    /// LDLᵀ of (A − shift·I) without pivoting. Pivots smaller than the guard
    /// are clamped (sign kept) so the inertia count stays defined even when a
    /// bisection shift lands exactly on a diagonal entry; the `guarded` flag
    /// tells the solve path to retry at a perturbed shift. Products are
    /// grouped as (L·d)·L and pivot magnitudes capped so a guarded pivot
    /// cascades through finite overflow-free arithmetic.
    fn factor(&self, shift: f64) -> BandedLdlt {
        let (n, b) = (self.dim, self.half_bandwidth);
        let scale = (self.max_abs_entry() + shift.abs()).max(1.0);
        let guard = scale * scale * 1e-300;
        const PIVOT_CAP: f64 = 1e306;
        let mut d = vec![0.0; n];
        let mut l: Vec<Vec<f64>> = (1..=b).map(|c| vec![0.0; n.saturating_sub(c)]).collect();
        let mut guarded = false;
        for j in 0..n {
            let lo = j.saturating_sub(b);
            let mut dj = self.bands[0][j] - shift;
            for k in lo..j {
                let ljk = l[j - k - 1][k];
                dj -= (ljk * d[k]) * ljk;
            }
            if dj.abs() < guard {
                guarded = true;
                dj = if dj >= 0.0 { guard } else { -guard };
            } else if dj.abs() > PIVOT_CAP {
                dj = if dj >= 0.0 { PIVOT_CAP } else { -PIVOT_CAP };
            }
            d[j] = dj;
            let hi = (j + b).min(n - 1);
            for i in j + 1..=hi {
                let mut s = self.get(i, j);
                let lo_i = i.saturating_sub(b);
                for k in lo_i..j {
                    s -= (l[j - k - 1][k] * d[k]) * l[i - k - 1][k];
                }
                l[i - j - 1][j] = s / dj;
            }
        }
        BandedLdlt {
            dim: n,
            hbw: b,
            d,
            l,
            guarded,
        }
    }

    fn factor_for_solve(&self, shift: f64, scale: f64) -> Result<BandedLdlt> {
        const MAX_RETRIES: usize = 40;
        for m in 0..MAX_RETRIES {
            let jitter = m as f64 * 8.0 * f64::EPSILON * scale;
            let f = self.factor(shift + jitter);
            if !f.guarded {
                return Ok(f);
            }
        }
        Err(Error::FactorizationBreakdown {
            retries: MAX_RETRIES,
        })
    }

    /// Number of eigenvalues strictly below `x` (Sturm count via LDLᵀ
    /// inertia).
    pub fn count_below(&self, x: f64) -> usize {
        self.factor(x).negatives()
    }

    /// Dimension of the numerical kernel: eigenvalues below
    /// `cutoff_rel · max|H|`.
    pub fn kernel_dimension(&self, cutoff_rel: f64) -> usize {
        self.count_below(cutoff_rel * self.max_abs_entry())
    }

    /// The `index`-th smallest eigenvalue (0-based) by Sturm bisection alone,
    /// to absolute accuracy ~`tol`·(spectral scale). No eigenvector.
    pub fn eigenvalue_by_index(&self, index: usize, tol: f64) -> f64 {
        let (glo, ghi) = self.gershgorin();
        let scale = glo.abs().max(ghi.abs()).max(f64::MIN_POSITIVE);
        let width_target = (tol * scale).max(4.0 * f64::EPSILON * scale);
        let mut a = glo;
        let mut b = ghi;
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if b - a <= width_target || mid <= a || mid >= b {
                break;
            }
            if self.count_below(mid) <= index {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }

    fn rayleigh(&self, x: &[f64]) -> f64 {
        let hx = self.matvec(x);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..self.dim {
            num += x[i] * hx[i];
            den += x[i] * x[i];
        }
        num / den
    }

    /// The k smallest eigenvalues with eigenvectors. Bisection isolates each
    /// eigenvalue to `tol`·(spectral scale); inverse iteration with the
    /// banded factorization recovers vectors, orthogonalizing jointly inside
    /// near-degenerate clusters. `workers` > 1 distributes the independent
    /// bisections over threads; the result is identical to the serial one.
    pub fn eigen_lowest(&self, k: usize, tol: f64, workers: usize) -> Result<Vec<EigenPair>> {
        if k == 0 || k > self.dim {
            return Err(Error::Eigensolver(format!(
                "k = {k} out of range for dimension {}",
                self.dim
            )));
        }
        if !(tol > 0.0) {
            return Err(Error::Eigensolver(format!("tolerance {tol} must be > 0")));
        }
        let (glo, ghi) = self.gershgorin();
        let scale = glo.abs().max(ghi.abs()).max(f64::MIN_POSITIVE);
        let width_target = (tol * scale).max(4.0 * f64::EPSILON * scale);

        let bisect_one = |j: usize| -> f64 {
            let mut a = glo;
            let mut b = ghi;
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if b - a <= width_target || mid <= a || mid >= b {
                    break;
                }
                if self.count_below(mid) <= j {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            0.5 * (a + b)
        };

        let mut raw = vec![0.0; k];
        let workers = workers.max(1).min(k);
        if workers == 1 {
            for (j, slot) in raw.iter_mut().enumerate() {
                *slot = bisect_one(j);
            }
        } else {
            let chunks: Vec<Vec<usize>> = (0..workers)
                .map(|w| (w..k).step_by(workers).collect())
                .collect();
            let results: Vec<Vec<(usize, f64)>> = std::thread::scope(|s| {
                let handles: Vec<_> = chunks
                    .iter()
                    .map(|chunk| {
                        s.spawn(|| {
                            chunk
                                .iter()
                                .map(|&j| (j, bisect_one(j)))
                                .collect::<Vec<_>>()
                        })
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().unwrap()).collect()
            });
            for part in results {
                for (j, v) in part {
                    raw[j] = v;
                }
            }
        }

        // Cluster nearly coincident eigenvalues so their vectors are built
        // and orthogonalized together.
        let cluster_gap = 10.0 * width_target;
        let mut clusters: Vec<(usize, usize)> = Vec::new();
        let mut start = 0;
        for j in 1..=k {
            if j == k || raw[j] - raw[j - 1] > cluster_gap {
                clusters.push((start, j));
                start = j;
            }
        }

        let h_scale = self.max_abs_entry();
        let conv_resid = 500.0 * f64::EPSILON * h_scale;
        let mut pairs: Vec<EigenPair> = Vec::with_capacity(k);
        for &(c0, c1) in &clusters {
            let sigma = raw[c0..c1].iter().sum::<f64>() / (c1 - c0) as f64;
            let fac = self.factor_for_solve(sigma, scale)?;
            let cluster_base = pairs.len();
            for member in 0..(c1 - c0) {
                let mut x = pseudo_random_vector(self.dim, (c0 + member) as u64);
                let mut converged = false;
                let mut rho = raw[c0 + member];
                for _ in 0..60 {
                    // project out the cluster vectors found so far
                    for prev in &pairs[cluster_base..] {
                        let dot: f64 = prev.vector.iter().zip(&x).map(|(a, b)| a * b).sum();
                        for (xi, pi) in x.iter_mut().zip(&prev.vector) {
                            *xi -= dot * pi;
                        }
                    }
                    normalize(&mut x);
                    fac.solve_in_place(&mut x);
                    for prev in &pairs[cluster_base..] {
                        let dot: f64 = prev.vector.iter().zip(&x).map(|(a, b)| a * b).sum();
                        for (xi, pi) in x.iter_mut().zip(&prev.vector) {
                            *xi -= dot * pi;
                        }
                    }
                    normalize(&mut x);
                    rho = self.rayleigh(&x);
                    let hx = self.matvec(&x);
                    let resid = hx
                        .iter()
                        .zip(&x)
                        .map(|(h, xi)| (h - rho * xi).abs())
                        .fold(0.0_f64, f64::max);
                    if resid <= conv_resid {
                        converged = true;
                        break;
                    }
                }
                pairs.push(EigenPair {
                    value: rho,
                    vector: x,
                    converged,
                });
            }
            // joint re-orthonormalization of the cluster (twice for round-off)
            for _pass in 0..2 {
                for m in cluster_base..pairs.len() {
                    let (head, tail) = pairs.split_at_mut(m);
                    let v = &mut tail[0].vector;
                    for prev in &head[cluster_base..] {
                        let dot: f64 = prev.vector.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                        for (xi, pi) in v.iter_mut().zip(&prev.vector) {
                            *xi -= dot * pi;
                        }
                    }
                    normalize(v);
                }
            }
        }
        pairs.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap());
        Ok(pairs)
    }
}

// two-pass normalization: pre-scaling by the max keeps the sum of squares
// representable even when a near-singular solve returns huge entries
fn normalize(x: &mut [f64]) {
    let m = x.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if m == 0.0 || !m.is_finite() {
        return;
    }
    for v in x.iter_mut() {
        *v /= m;
    }
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        for v in x.iter_mut() {
            *v /= n;
        }
    }
}

/// Deterministic start vector for inverse iteration (splitmix64 driven).
fn pseudo_random_vector(dim: usize, seed: u64) -> Vec<f64> {
    let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
    let mut next = move || {
        state = state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    };
    let mut x: Vec<f64> = (0..dim)
        .map(|_| (next() >> 11) as f64 / (1u64 << 53) as f64 - 0.5)
        .collect();
    normalize(&mut x);
    x
}

// Adds a 2×2 block at node-block (bi, bj), bi ≤ bj. Diagonal blocks must be
// symmetric; only upper entries are stored.
fn add_block(h: &mut BandedSymmetricOperator, bi: usize, bj: usize, block: Mat2) {
    debug_assert!(bi <= bj);
    for s in 0..2 {
        for t in 0..2 {
            let (i, j) = (2 * bi + s, 2 * bj + t);
            if i <= j {
                h.add(i, j, block[s][t]);
            }
        }
    }
}

/// Adjoint-exact factorized Hamiltonian.
///
/// `Minus` builds H₋ = A⁺A⁻ on the node space (dimension 2N); `Plus` builds
/// H₊ = A⁻A⁺ on the interior-link space (dimension 2(N−1)). Both are Gram
/// matrices of the same first-order factor, so their positive bound spectra
/// coincide to round-off while the kernel bookkeeping stays physical: H₋
/// keeps its zero modes, H₊ has none.
pub fn discretize_factorized(
    msup: &MatrixSuperpotential,
    grid: &Grid,
    sector: Sector,
) -> Result<BandedSymmetricOperator> {
    if !msup.is_real() {
        return Err(Error::ComplexFrame);
    }
    let n = grid.points();
    match sector {
        Sector::Minus => {
            let mut h = BandedSymmetricOperator::new(2 * n, 3);
            for j in 0..=n {
                let (bl, br) = link_blocks(msup, grid, j);
                if j == 0 {
                    add_block(&mut h, 0, 0, mat2_mul(mat2_transpose(br), br));
                } else if j == n {
                    add_block(&mut h, n - 1, n - 1, mat2_mul(mat2_transpose(bl), bl));
                } else {
                    add_block(&mut h, j - 1, j - 1, mat2_mul(mat2_transpose(bl), bl));
                    add_block(&mut h, j, j, mat2_mul(mat2_transpose(br), br));
                    add_block(&mut h, j - 1, j, mat2_mul(mat2_transpose(bl), br));
                }
            }
            Ok(h)
        }
        Sector::Plus => {
            let mut h = BandedSymmetricOperator::new(2 * (n - 1), 3);
            for j in 1..=n - 1 {
                let l = j - 1;
                let (bl, br) = link_blocks(msup, grid, j);
                let diag = mat2_add(
                    mat2_mul(bl, mat2_transpose(bl)),
                    mat2_mul(br, mat2_transpose(br)),
                );
                add_block(&mut h, l, l, diag);
                if j < n - 1 {
                    let (bl_next, _) = link_blocks(msup, grid, j + 1);
                    // links j and j+1 share node j: block = BRⱼ·BLⱼ₊₁ᵀ
                    add_block(&mut h, l, l + 1, mat2_mul(br, mat2_transpose(bl_next)));
                }
            }
            Ok(h)
        }
    }
}

/// H₊ = A⁻A⁺ over the full link set, wall half-cells included. The two
/// extra dimensions carry wall-localized exact null vectors (the images of
/// the non-normalizable A⁺ zero modes in the finite box), so this variant is
/// for operator-identity checks, not for spectrum or kernel counting —
/// [`discretize_factorized`] with [`Sector::Plus`] is the spectral one.
pub fn discretize_factorized_plus_full(
    msup: &MatrixSuperpotential,
    grid: &Grid,
) -> Result<BandedSymmetricOperator> {
    if !msup.is_real() {
        return Err(Error::ComplexFrame);
    }
    let n = grid.points();
    let mut h = BandedSymmetricOperator::new(2 * (n + 1), 3);
    for j in 0..=n {
        let (bl, br) = link_blocks(msup, grid, j);
        let diag = if j == 0 {
            mat2_mul(br, mat2_transpose(br))
        } else if j == n {
            mat2_mul(bl, mat2_transpose(bl))
        } else {
            mat2_add(
                mat2_mul(bl, mat2_transpose(bl)),
                mat2_mul(br, mat2_transpose(br)),
            )
        };
        add_block(&mut h, j, j, diag);
        if j < n {
            let (bl_next, _) = link_blocks(msup, grid, j + 1);
            add_block(&mut h, j, j + 1, mat2_mul(br, mat2_transpose(bl_next)));
        }
    }
    Ok(h)
}

/// Direct second-order discretization: 3-point Laplacian plus the pointwise
/// scalar potential and Zeeman term of the requested sector. Independent of
/// the factorized scheme; used as a cross-check.
pub fn discretize_direct(
    msup: &MatrixSuperpotential,
    grid: &Grid,
    sector: Sector,
) -> Result<BandedSymmetricOperator> {
    if !msup.is_real() {
        return Err(Error::ComplexFrame);
    }
    let n = grid.points();
    let h2 = grid.spacing() * grid.spacing();
    let fields = msup.partner_fields();
    let frame = msup.frame();
    let mut h = BandedSymmetricOperator::new(2 * n, 3);
    for i in 0..n {
        let z = grid.node_z(i);
        let v = fields.scalar_potential(z, sector);
        let b = fields.magnetic_field(z, sector);
        debug_assert_eq!(frame.a[1], 0.0);
        // V·1 + B·S with B·S = (Bx·σx + Bz·σz)/2 in a real frame
        let block = [
            [v + 2.0 / h2 + b[2] / 2.0, b[0] / 2.0],
            [b[0] / 2.0, v + 2.0 / h2 - b[2] / 2.0],
        ];
        add_block(&mut h, i, i, block);
        if i + 1 < n {
            add_block(&mut h, i, i + 1, [[-1.0 / h2, 0.0], [0.0, -1.0 / h2]]);
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{
        LinearSuperpotential, ModelParams, SuperpotentialFamily, TanhSuperpotential,
    };
    use std::f64::consts::PI;

    /// M ≡ 0 family: exposes the bare staggered Laplacian.
    struct FreeFamily;

    impl SuperpotentialFamily for FreeFamily {
        fn w(&self, _z: f64, _gamma: f64) -> f64 {
            0.0
        }
        fn w_prime(&self, _z: f64, _gamma: f64) -> f64 {
            0.0
        }
        fn g(&self, _z: f64, _lambda: f64) -> f64 {
            0.0
        }
        fn g_prime(&self, _z: f64, _lambda: f64) -> f64 {
            0.0
        }
        fn gamma_step(&self, gamma: f64) -> f64 {
            gamma
        }
        fn asymptotic_w(&self, _gamma: f64) -> Option<f64> {
            Some(0.0)
        }
    }

    fn default_model() -> (TanhSuperpotential, ModelParams) {
        (
            TanhSuperpotential::new(),
            ModelParams::new(2.5, 1.0, 1.0).unwrap(),
        )
    }

    #[test]
    fn grid_is_bit_exactly_symmetric() {
        for &n in &[17usize, 100, 999, 2000] {
            let g = Grid::new(20.0, n).unwrap();
            assert!((g.spacing() - 40.0 / (n as f64 + 1.0)).abs() < 1e-18);
            for i in 0..n {
                assert_eq!(g.node_z(g.reflected_node(i)), -g.node_z(i));
            }
            for j in 0..=n {
                assert_eq!(g.link_z(g.reflected_link(j)), -g.link_z(j));
            }
        }
        // odd N puts a node exactly at the origin
        let g = Grid::new(10.0, 99).unwrap();
        assert_eq!(g.node_z(49), 0.0);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(Grid::new(20.0, 8).is_err());
        assert!(Grid::new(0.0, 100).is_err());
        assert!(Grid::new(-3.0, 100).is_err());
        assert!(Grid::new(f64::NAN, 100).is_err());
    }

    #[test]
    fn inner_product_weighting_and_mismatch() {
        let g = Grid::new(5.0, 49).unwrap();
        let one = SpinorField::from_fn(g, StaggeredSpace::Nodes, |_| {
            [C64::new(1.0, 0.0), C64::new(0.0, 0.0)]
        });
        let ip = inner_product(&one, &one).unwrap();
        assert!((ip.re - g.spacing() * 49.0).abs() < 1e-12);
        assert_eq!(ip.im, 0.0);
        let links = SpinorField::zeros(g, StaggeredSpace::Links);
        assert!(inner_product(&one, &links).is_err());
        let other_grid = SpinorField::zeros(Grid::new(5.0, 51).unwrap(), StaggeredSpace::Nodes);
        assert!(inner_product(&one, &other_grid).is_err());
    }

    #[test]
    fn banded_2x2_eigenvalues() {
        let mut op = BandedSymmetricOperator::new(2, 1);
        op.add(0, 0, 2.0);
        op.add(1, 1, 2.0);
        op.add(0, 1, 1.0);
        let pairs = op.eigen_lowest(2, 1e-14, 1).unwrap();
        assert!((pairs[0].value - 1.0).abs() < 1e-12);
        assert!((pairs[1].value - 3.0).abs() < 1e-12);
        assert!(pairs.iter().all(|p| p.converged));
    }

    #[test]
    fn sturm_count_monotone_on_small_matrix() {
        let mut op = BandedSymmetricOperator::new(2, 1);
        op.add(0, 0, 1.0);
        op.add(1, 1, 3.0);
        op.add(0, 1, -1.0);
        // eigenvalues ≈ 0.382, 3.618
        assert_eq!(op.count_below(0.0), 0);
        assert_eq!(op.count_below(1.0), 1);
        assert_eq!(op.count_below(4.0), 2);
    }

    #[test]
    fn bisected_eigenvalues_match_full_solve() {
        let (fam, params) = default_model();
        let grid = Grid::new(20.0, 399).unwrap();
        let msup = MatrixSuperpotential::in_default_frame(&fam, params).unwrap();
        let h = discretize_factorized(&msup, &grid, Sector::Minus).unwrap();
        let pairs = h.eigen_lowest(4, 1e-12, 1).unwrap();
        for (j, p) in pairs.iter().enumerate() {
            let lone = h.eigenvalue_by_index(j, 1e-12);
            assert!(
                (lone - p.value).abs() <= 1e-10 * h.max_abs_entry(),
                "index {j}: bisected {lone} vs refined {}",
                p.value
            );
        }
    }

    /// A bisection midpoint can land exactly on a diagonal entry; the
    /// guarded factorization has to absorb the singular pivot and keep the
    /// inertia count usable.
    #[test]
    fn sturm_count_survives_shift_on_diagonal_entry() {
        let n = 8;
        let mut op = BandedSymmetricOperator::new(n, 3);
        for i in 0..n {
            op.add(i, i, 5000.0);
        }
        for i in 0..n - 2 {
            op.add(i, i + 2, -2500.0);
        }
        // two decoupled 4-chains: eigenvalues 5000 − 5000·cos(mπ/5)
        let evals: Vec<f64> = (1..=4)
            .map(|m| 5000.0 - 5000.0 * (m as f64 * PI / 5.0).cos())
            .collect();
        let expected = |x: f64| 2 * evals.iter().filter(|&&e| e < x).count();
        for &shift in &[5000.0, 100.0, 3000.0, 7000.0, 9900.0] {
            assert_eq!(op.count_below(shift), expected(shift), "shift {shift}");
        }
    }

    #[test]
    fn free_laplacian_matches_exact_discrete_spectrum() {
        let fam = FreeFamily;
        let params = ModelParams::new(1.0, 0.0, 0.0).unwrap();
        let grid = Grid::new(10.0, 999).unwrap();
        let msup = MatrixSuperpotential::in_default_frame(&fam, params).unwrap();
        let h = discretize_factorized(&msup, &grid, Sector::Minus).unwrap();
        let pairs = h.eigen_lowest(6, 1e-13, 1).unwrap();
        let hgrid = grid.spacing();
        let scale = h.max_abs_entry();
        // spin doubling: levels come in exact pairs
        for m in 1..=3 {
            let exact = (2.0 / (hgrid * hgrid))
                * (1.0 - (m as f64 * PI * hgrid / (2.0 * grid.half_width())).cos());
            for k in 0..2 {
                let got = pairs[2 * (m - 1) + k].value;
                assert!(
                    (got - exact).abs() < 1e-12 * scale,
                    "m={m}: got {got}, exact discrete {exact}"
                );
            }
        }
        // h² extrapolation against the continuum box levels
        let grid2 = Grid::new(10.0, 1999).unwrap();
        let h2op = discretize_factorized(&msup, &grid2, Sector::Minus).unwrap();
        let pairs2 = h2op.eigen_lowest(6, 1e-13, 1).unwrap();
        for m in 1..=3 {
            let continuum = (m as f64 * PI / 20.0).powi(2);
            let coarse = pairs[2 * (m - 1)].value;
            let fine = pairs2[2 * (m - 1)].value;
            let extrapolated = (4.0 * fine - coarse) / 3.0;
            assert!(
                ((extrapolated - continuum) / continuum).abs() < 1e-6,
                "m={m}: extrapolated {extrapolated} vs {continuum}"
            );
        }
    }

    #[test]
    fn factorized_operator_is_symmetric_and_psd() {
        let (fam, params) = default_model();
        let grid = Grid::new(20.0, 199).unwrap();
        let msup = MatrixSuperpotential::in_default_frame(&fam, params).unwrap();
        for sector in [Sector::Minus, Sector::Plus] {
            let h = discretize_factorized(&msup, &grid, sector).unwrap();
            let dense = h.to_dense();
            for i in 0..h.dim() {
                for j in 0..h.dim() {
                    assert_eq!(dense[i][j], dense[j][i], "asymmetry at ({i},{j})");
                }
            }
            assert_eq!(
                h.count_below(-1e-12 * h.max_abs_entry()),
                0,
                "factorized operator must be PSD"
            );
        }
    }

    #[test]
    fn workers_do_not_change_results() {
        let (fam, params) = default_model();
        let grid = Grid::new(20.0, 399).unwrap();
        let msup = MatrixSuperpotential::in_default_frame(&fam, params).unwrap();
        let h = discretize_factorized(&msup, &grid, Sector::Minus).unwrap();
        let serial = h.eigen_lowest(4, 1e-12, 1).unwrap();
        let parallel = h.eigen_lowest(4, 1e-12, 4).unwrap();
        for (a, b) in serial.iter().zip(&parallel) {
            assert_eq!(a.value.to_bits(), b.value.to_bits());
        }
    }

    #[test]
    fn case1_oracle_spectrum() {
        let fam = LinearSuperpotential;
        let params = ModelParams::new(1.0, 1.0, 1.0).unwrap();
        let grid = Grid::new(12.0, 1200).unwrap();
        let msup = MatrixSuperpotential::in_default_frame(&fam, params).unwrap();
        let h = discretize_factorized(&msup, &grid, Sector::Minus).unwrap();
        let pairs = h.eigen_lowest(6, 1e-12, 1).unwrap();
        let expected = [0.0_f64, 0.0, 2.0, 2.0, 4.0, 4.0];
        for (p, e) in pairs.iter().zip(expected) {
            let tol = 1e-3 * e.max(1.0);
            assert!(
                (p.value - e).abs() < tol,
                "case 1 level: got {}, expected {e}",
                p.value
            );
        }
    }

    #[test]
    fn scalar_reflectionless_well() {
        // β = λ = 0, γ = 2: two decoupled −6/cosh² channels, levels {0, 3}
        let fam = TanhSuperpotential::new();
        let params = ModelParams::new(2.0, 0.0, 0.0).unwrap();
        let grid = Grid::new(20.0, 1999).unwrap();
        let msup = MatrixSuperpotential::in_default_frame(&fam, params).unwrap();
        let h = discretize_factorized(&msup, &grid, Sector::Minus).unwrap();
        let pairs = h.eigen_lowest(4, 1e-12, 1).unwrap();
        assert!(pairs[0].value.abs() < 1e-8);
        assert!(pairs[1].value.abs() < 1e-8);
        assert!(
            (pairs[2].value - 3.0).abs() < 2e-3,
            "E1 = {}",
            pairs[2].value
        );
        assert!((pairs[3].value - 3.0).abs() < 2e-3);

        let hd = discretize_direct(&msup, &grid, Sector::Minus).unwrap();
        let pairs_d = hd.eigen_lowest(4, 1e-12, 1).unwrap();
        assert!(pairs_d[0].value.abs() < 2e-3);
        assert!((pairs_d[2].value - 3.0).abs() < 2e-3);
    }

    #[test]
    fn factorized_and_direct_schemes_converge_together() {
        let (fam, params) = default_model();
        let msup = MatrixSuperpotential::in_default_frame(&fam, params).unwrap();
        let e1 = 32.0 / 9.0;
        let mut errs_fac = Vec::new();
        let mut errs_dir = Vec::new();
        for &n in &[999usize, 1999] {
            let grid = Grid::new(20.0, n).unwrap();
            let hf = discretize_factorized(&msup, &grid, Sector::Minus).unwrap();
            let hd = discretize_direct(&msup, &grid, Sector::Minus).unwrap();
            errs_fac.push((hf.eigen_lowest(3, 1e-12, 1).unwrap()[2].value - e1).abs());
            errs_dir.push((hd.eigen_lowest(3, 1e-12, 1).unwrap()[2].value - e1).abs());
        }
        for errs in [&errs_fac, &errs_dir] {
            let ratio = errs[0] / errs[1];
            assert!(
                (2.8..5.6).contains(&ratio),
                "h² convergence broken: errors {errs:?}"
            );
        }
    }

    #[test]
    fn eigenvalue_error_scales_as_h_squared() {
        let (fam, params) = default_model();
        let msup = MatrixSuperpotential::in_default_frame(&fam, params).unwrap();
        let e1 = 32.0 / 9.0;
        let mut errs = Vec::new();
        for &n in &[999usize, 1999, 3999] {
            let grid = Grid::new(20.0, n).unwrap();
            let h = discretize_factorized(&msup, &grid, Sector::Minus).unwrap();
            let pairs = h.eigen_lowest(3, 1e-12, 1).unwrap();
            errs.push((pairs[2].value - e1).abs());
        }
        for w in errs.windows(2) {
            let slope = (w[0] / w[1]).log2();
            assert!(
                (1.8..=2.2).contains(&slope),
                "convergence slope {slope}, errors {errs:?}"
            );
        }
    }

    #[test]
    fn minus_and_plus_sectors_share_positive_bound_spectrum() {
        let (fam, params) = default_model();
        let grid = Grid::new(20.0, 800).unwrap();
        let msup = MatrixSuperpotential::in_default_frame(&fam, params).unwrap();
        let hm = discretize_factorized(&msup, &grid, Sector::Minus).unwrap();
        let hp = discretize_factorized(&msup, &grid, Sector::Plus).unwrap();
        let cutoff = 1e-10;
        assert_eq!(hm.kernel_dimension(cutoff), 2);
        assert_eq!(hp.kernel_dimension(cutoff), 0);
        let em = hm.eigen_lowest(4, 1e-12, 1).unwrap();
        let ep = hp.eigen_lowest(2, 1e-12, 1).unwrap();
        for k in 0..2 {
            let rel = ((em[2 + k].value - ep[k].value) / ep[k].value).abs();
            assert!(
                rel < 1e-10,
                "isospectrality violated: {} vs {} (rel {rel})",
                em[2 + k].value,
                ep[k].value
            );
        }
    }

    #[test]
    fn broken_susy_has_empty_kernel() {
        let fam = TanhSuperpotential::new();
        let params = ModelParams::new(0.5, 2.0, 1.0).unwrap();
        let grid = Grid::new(20.0, 800).unwrap();
        let msup = MatrixSuperpotential::in_default_frame(&fam, params).unwrap();
        let hm = discretize_factorized(&msup, &grid, Sector::Minus).unwrap();
        assert_eq!(hm.kernel_dimension(1e-10), 0);
    }

    #[test]
    fn eigenvectors_satisfy_residual_bound() {
        let (fam, params) = default_model();
        let grid = Grid::new(20.0, 599).unwrap();
        let msup = MatrixSuperpotential::in_default_frame(&fam, params).unwrap();
        let h = discretize_factorized(&msup, &grid, Sector::Minus).unwrap();
        let pairs = h.eigen_lowest(4, 1e-12, 1).unwrap();
        for p in &pairs {
            assert!(p.converged);
            let hx = h.matvec(&p.vector);
            let resid = hx
                .iter()
                .zip(&p.vector)
                .map(|(a, b)| (a - p.value * b).abs())
                .fold(0.0_f64, f64::max);
            assert!(
                resid <= 1e-12 * h.max_abs_entry(),
                "residual {resid} too large for eigenvalue {}",
                p.value
            );
        }
        // within-cluster orthogonality
        let dot: f64 = pairs[0]
            .vector
            .iter()
            .zip(&pairs[1].vector)
            .map(|(a, b)| a * b)
            .sum();
        assert!(dot.abs() < 1e-12);
    }

    #[test]
    fn rejects_complex_frame() {
        let (fam, params) = default_model();
        let grid = Grid::new(20.0, 99).unwrap();
        let frame = crate::fields::FrameVectors::new([0.0, 0.0, 1.0], [0.0, 1.0, 0.0]).unwrap();
        let msup = MatrixSuperpotential::new(&fam, params, frame).unwrap();
        assert!(matches!(
            discretize_factorized(&msup, &grid, Sector::Minus),
            Err(Error::ComplexFrame)
        ));
        assert!(matches!(
            discretize_direct(&msup, &grid, Sector::Minus),
            Err(Error::ComplexFrame)
        ));
    }

    #[test]
    fn block_diag_stacks_spectra() {
        let mut a = BandedSymmetricOperator::new(2, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, 2.0);
        let mut b = BandedSymmetricOperator::new(2, 1);
        b.add(0, 0, 3.0);
        b.add(1, 1, 4.0);
        let c = BandedSymmetricOperator::block_diag(&a, &b);
        let pairs = c.eigen_lowest(4, 1e-14, 1).unwrap();
        let vals: Vec<f64> = pairs.iter().map(|p| p.value).collect();
        for (got, want) in vals.iter().zip([1.0, 2.0, 3.0, 4.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }
}
