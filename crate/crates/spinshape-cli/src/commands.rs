//! Subcommand implementations: analytic level tables, numerical spectra,
//! the verification suite, and wavefunction export.

use crate::config::{OutputFormat, RunConfig, Scheme};
use crate::output::{fmt_full, Table};
use num_complex::Complex64 as C64;
use serde::Serialize;
use spinshape::analytic::{
    bound_state_count, case1_spectrum, continuum_threshold, energy_level, phi1_closed_form,
    phi_pair_closed_form, LevelTable, Phi1Branch,
};
use spinshape::fields::{
    parameter_flow, shape_invariance_residuals, FrameVectors, LinearSuperpotential,
    MatrixSuperpotential, ModelParams, Sector, TanhSuperpotential,
};
use spinshape::ladder::build_excited_state;
use spinshape::numerics::{discretize_direct, discretize_factorized, Grid, StaggeredSpace};
use spinshape::symmetry::{algebra_check, degeneracy_report, first_order_residuals};
use spinshape::zeromode::zero_mode_pair;
use std::path::PathBuf;

const KERNEL_CUTOFF_REL: f64 = 1e-10;
const PAIR_TOL_REL: f64 = 1e-9;

/// Failure classes mapped to process exit codes: config 2, solver 3,
/// verification 4.
#[derive(Debug)]
pub enum CommandError {
    Config(String),
    Solver(String),
    Verification(String),
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Config(_) => 2,
            CommandError::Solver(_) => 3,
            CommandError::Verification(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CommandError::Config(m) | CommandError::Solver(m) | CommandError::Verification(m) => m,
        }
    }
}

fn classify(e: spinshape::Error) -> CommandError {
    use spinshape::Error as E;
    match e {
        E::InvalidParams(_)
        | E::InvalidFrame(_)
        | E::InvalidGrid(_)
        | E::NotABoundState { .. }
        | E::FlowOutOfRange { .. }
        | E::ZeroModeInadmissible { .. }
        | E::UnboundedSuperpotential => CommandError::Config(e.to_string()),
        other => CommandError::Solver(other.to_string()),
    }
}

fn io_err(e: anyhow::Error) -> CommandError {
    CommandError::Solver(format!("{e:#}"))
}

type CmdResult = Result<(), CommandError>;

fn model_params(cfg: &RunConfig) -> Result<ModelParams, CommandError> {
    ModelParams::new(cfg.gamma, cfg.beta, cfg.lambda).map_err(classify)
}

fn ensure_outdir(cfg: &RunConfig) -> Result<PathBuf, CommandError> {
    std::fs::create_dir_all(&cfg.output.directory)
        .map_err(|e| CommandError::Config(format!("cannot create output directory: {e}")))?;
    Ok(cfg.output.directory.clone())
}

fn write_table(cfg: &RunConfig, table: &Table, stem: &str) -> Result<PathBuf, CommandError> {
    let dir = ensure_outdir(cfg)?;
    let path = match cfg.output.format {
        OutputFormat::Csv => {
            let p = dir.join(format!("{stem}.csv"));
            table.write_csv(&p).map_err(io_err)?;
            p
        }
        OutputFormat::Json => {
            let p = dir.join(format!("{stem}.json"));
            table.write_json(&p).map_err(io_err)?;
            p
        }
    };
    Ok(path)
}

/// `spinshape levels`: the closed-form bound spectrum with admissibility
/// flags and the continuum edge.
pub fn cmd_levels(cfg: &RunConfig) -> CmdResult {
    let table = LevelTable::build(cfg.gamma, cfg.beta).map_err(classify)?;
    println!(
        "analytic levels: gamma={}, beta={}, lambda={}",
        cfg.gamma, cfg.beta, cfg.lambda
    );
    println!("continuum threshold: {:.6}", table.threshold);
    if table.is_broken_susy() {
        println!("no bound states: supersymmetry is broken (gamma <= |beta|/2)");
    }
    for l in &table.levels {
        println!(
            "  n={:2}  E = {:>12.6}  degeneracy {}",
            l.n, l.energy, l.degeneracy
        );
    }
    let mut out = Table::new(&["n", "energy", "degeneracy"]);
    out.meta("gamma", cfg.gamma);
    out.meta("beta", cfg.beta);
    out.meta("lambda", cfg.lambda);
    out.meta("threshold", fmt_full(table.threshold));
    out.meta("broken_susy", table.is_broken_susy());
    for l in &table.levels {
        out.row(vec![
            l.n.to_string(),
            fmt_full(l.energy),
            l.degeneracy.to_string(),
        ]);
    }
    let path = write_table(cfg, &out, "levels")?;
    println!("wrote {}", path.display());
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SectorChoice {
    Minus,
    Plus,
    Both,
}

struct SectorSpectrum {
    values: Vec<f64>,
    kernel_dim: usize,
    scale: f64,
}

fn solve_sector(
    cfg: &RunConfig,
    params: ModelParams,
    sector: Sector,
    k: usize,
) -> Result<SectorSpectrum, CommandError> {
    let fam = TanhSuperpotential::new();
    let grid = Grid::new(cfg.grid.half_width, cfg.grid.points).map_err(classify)?;
    let msup = MatrixSuperpotential::in_default_frame(&fam, params).map_err(classify)?;
    let op = match cfg.solver.scheme {
        Scheme::Factorized => discretize_factorized(&msup, &grid, sector).map_err(classify)?,
        Scheme::Direct => discretize_direct(&msup, &grid, sector).map_err(classify)?,
    };
    let k = k.min(op.dim());
    let pairs = op
        .eigen_lowest(k, cfg.solver.tol, RunConfig::workers())
        .map_err(classify)?;
    if let Some(bad) = pairs.iter().position(|p| !p.converged) {
        return Err(CommandError::Solver(format!(
            "inverse iteration did not converge for eigenvalue index {bad}"
        )));
    }
    Ok(SectorSpectrum {
        values: pairs.iter().map(|p| p.value).collect(),
        kernel_dim: op.kernel_dimension(KERNEL_CUTOFF_REL),
        scale: op.max_abs_entry(),
    })
}

/// `spinshape spectrum`: numerical eigenvalues of H₋ (and H₊ on request)
/// with degeneracy clusters and analytic error columns.
pub fn cmd_spectrum(cfg: &RunConfig, sector: SectorChoice) -> CmdResult {
    let params = model_params(cfg)?;
    let count = bound_state_count(cfg.gamma, cfg.beta).map_err(classify)?;
    let threshold = continuum_threshold(cfg.gamma, cfg.beta).map_err(classify)?;
    let k = cfg.solver.k_levels.max(2 * count + 2);

    let sectors: Vec<Sector> = match sector {
        SectorChoice::Minus => vec![Sector::Minus],
        SectorChoice::Plus => vec![Sector::Plus],
        SectorChoice::Both => vec![Sector::Minus, Sector::Plus],
    };

    let mut out = Table::new(&[
        "sector",
        "cluster",
        "n",
        "multiplicity",
        "energy_numeric",
        "energy_analytic",
        "abs_error",
        "rel_error",
        "zero_mode",
    ]);
    out.meta("gamma", cfg.gamma);
    out.meta("beta", cfg.beta);
    out.meta("lambda", cfg.lambda);
    out.meta("half_width", cfg.grid.half_width);
    out.meta("points", cfg.grid.points);
    out.meta(
        "scheme",
        match cfg.solver.scheme {
            Scheme::Factorized => "factorized",
            Scheme::Direct => "direct",
        },
    );
    out.meta("threshold", fmt_full(threshold));
    out.meta("kernel_cutoff_rel", KERNEL_CUTOFF_REL);

    println!(
        "numerical spectrum: gamma={}, beta={}, lambda={} (threshold {:.6})",
        cfg.gamma, cfg.beta, cfg.lambda, threshold
    );
    for s in sectors {
        let solved = solve_sector(cfg, params, s, k)?;
        let name = match s {
            Sector::Minus => "minus",
            Sector::Plus => "plus",
        };
        out.meta(&format!("kernel_dim_{name}"), solved.kernel_dim);
        let report = degeneracy_report(
            &solved.values,
            threshold,
            PAIR_TOL_REL,
            KERNEL_CUTOFF_REL * solved.scale,
        );
        println!("  sector {name}: kernel dimension {}", solved.kernel_dim);
        for (c, cl) in report.clusters.iter().enumerate() {
            // the zero cluster is level 0 of the minus sector; positive
            // clusters のn offset by one in the plus sector
            let n = match s {
                Sector::Minus => c,
                Sector::Plus => c + 1,
            };
            let e_ana = if n < count {
                Some(energy_level(cfg.gamma, cfg.beta, n).map_err(classify)?)
            } else {
                None
            };
            let (abs_err, rel_err) = match e_ana {
                Some(e) => {
                    let abs = (cl.mean - e).abs();
                    (abs, abs / e.abs().max(1.0))
                }
                None => (f64::NAN, f64::NAN),
            };
            println!(
                "    cluster {c}: E = {:>12.8} x{}  (n={n}, analytic {}, abs err {:.2e})",
                cl.mean,
                cl.count,
                e_ana.map_or("-".to_string(), |e| format!("{e:.8}")),
                abs_err
            );
            out.row(vec![
                name.to_string(),
                c.to_string(),
                n.to_string(),
                cl.count.to_string(),
                fmt_full(cl.mean),
                e_ana.map_or(String::from("nan"), fmt_full),
                fmt_full(abs_err),
                fmt_full(rel_err),
                cl.is_zero_mode.to_string(),
            ]);
        }
    }
    let path = write_table(cfg, &out, "spectrum")?;
    println!("wrote {}", path.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct Check {
    name: String,
    passed: bool,
    value: f64,
    threshold: f64,
    detail: String,
}

#[derive(Debug, Serialize)]
struct Verdict {
    passed: bool,
    config: RunConfig,
    checks: Vec<Check>,
}

fn push(
    checks: &mut Vec<Check>,
    name: &str,
    value: f64,
    threshold: f64,
    passed: bool,
    detail: String,
) {
    checks.push(Check {
        name: name.to_string(),
        passed,
        value,
        threshold,
        detail,
    });
}

fn fail_check(checks: &mut Vec<Check>, name: &str, err: impl std::fmt::Display) {
    push(
        checks,
        name,
        f64::NAN,
        f64::NAN,
        false,
        format!("check aborted: {err}"),
    );
}

/// Box large enough for the zero-mode integrations of every flow level up
/// to n, while keeping the configured grid spacing.
fn ladder_grid(cfg: &RunConfig, n: usize) -> Result<Grid, CommandError> {
    let fam = TanhSuperpotential::new();
    let params = model_params(cfg)?;
    let flow = parameter_flow(&fam, &params, n).map_err(classify)?;
    let last = flow[n];
    let rate = last.gamma - last.beta.abs() / 2.0;
    if rate <= 0.0 {
        return Err(CommandError::Config(format!(
            "level {n} is not admissible at gamma={}, beta={}",
            cfg.gamma, cfg.beta
        )));
    }
    let needed = (28.0 / rate).max(cfg.grid.half_width);
    let h = 2.0 * cfg.grid.half_width / (cfg.grid.points as f64 + 1.0);
    let points = ((2.0 * needed / h).ceil() as usize).max(cfg.grid.points) | 1;
    Grid::new(needed, points).map_err(classify)
}

/// `spinshape verify`: the acceptance checks at the configured scale, with
/// a machine-readable verdict. `typo_eq41` injects the documented wrong
/// constant (γ²+β² instead of γ²+β²/4) into the direct scheme as a
/// sabotage control; `skip_sweep` omits the 500-sample level-count
/// property for quick smoke runs.
pub fn cmd_verify(cfg: &RunConfig, typo_eq41: bool, skip_sweep: bool) -> CmdResult {
    let fam = TanhSuperpotential::new();
    let params = model_params(cfg)?;
    let mut checks: Vec<Check> = Vec::new();
    let count = bound_state_count(cfg.gamma, cfg.beta).map_err(classify)?;
    let threshold = continuum_threshold(cfg.gamma, cfg.beta).map_err(classify)?;

    // spectrum against the closed form, plus degeneracy structure
    match solve_sector(cfg, params, Sector::Minus, 2 * count + 2) {
        Ok(solved) => {
            let report = degeneracy_report(
                &solved.values,
                threshold,
                PAIR_TOL_REL,
                KERNEL_CUTOFF_REL * solved.scale,
            );
            let mut worst = 0.0_f64;
            for (c, cl) in report.clusters.iter().enumerate() {
                if c < count {
                    let e = energy_level(cfg.gamma, cfg.beta, c).unwrap();
                    worst = worst.max((cl.mean - e).abs());
                }
            }
            push(
                &mut checks,
                "closed_form_spectrum",
                worst,
                5e-3,
                worst < 5e-3,
                format!(
                    "worst |E_num - E_analytic| over {} clusters",
                    report.clusters.len()
                ),
            );
            let mut split = 0.0_f64;
            for cl in &report.clusters {
                if !cl.is_zero_mode && cl.count >= 2 {
                    let span = cl.members.last().unwrap() - cl.members.first().unwrap();
                    split = split.max(span / cl.mean.abs().max(1e-300));
                }
            }
            push(
                &mut checks,
                "twofold_degeneracy",
                split,
                1e-9,
                split < 1e-9,
                "largest relative split inside a bound cluster".into(),
            );
            let expected_kernel = if count > 0 { 2 } else { 0 };
            push(
                &mut checks,
                "minus_kernel_dimension",
                solved.kernel_dim as f64,
                expected_kernel as f64,
                solved.kernel_dim == expected_kernel,
                "numerical kernel of H- at the 1e-10 cutoff".into(),
            );
        }
        Err(e) => fail_check(&mut checks, "closed_form_spectrum", e.message()),
    }

    // isospectrality and the fourfold degeneracy of the combined spectrum
    match (
        solve_sector(cfg, params, Sector::Minus, 2 * count + 2),
        solve_sector(cfg, params, Sector::Plus, (2 * count).max(2)),
    ) {
        (Ok(minus), Ok(plus)) => {
            let pos_minus: Vec<f64> = minus
                .values
                .iter()
                .copied()
                .filter(|&e| e > KERNEL_CUTOFF_REL * minus.scale && e < threshold)
                .collect();
            let pos_plus: Vec<f64> = plus
                .values
                .iter()
                .copied()
                .filter(|&e| e > KERNEL_CUTOFF_REL * plus.scale && e < threshold)
                .collect();
            let mut rel = 0.0_f64;
            for (a, b) in pos_minus.iter().zip(&pos_plus) {
                rel = rel.max(((a - b) / b).abs());
            }
            push(
                &mut checks,
                "isospectrality",
                rel,
                1e-10,
                rel < 1e-10 && pos_minus.len() == pos_plus.len() && plus.kernel_dim == 0,
                format!(
                    "positive bound spectra of H+/H- ({} levels); H+ kernel {}",
                    pos_minus.len(),
                    plus.kernel_dim
                ),
            );
            let mut combined = minus.values.clone();
            combined.extend_from_slice(&plus.values);
            let rep = degeneracy_report(
                &combined,
                threshold,
                PAIR_TOL_REL,
                KERNEL_CUTOFF_REL * minus.scale,
            );
            let mults = rep.multiplicities();
            let expected: Vec<usize> = if count == 0 {
                Vec::new()
            } else {
                let mut v = vec![2usize];
                v.extend(std::iter::repeat_n(4, count - 1));
                v
            };
            let ok = mults == expected;
            push(
                &mut checks,
                "fourfold_degeneracy",
                mults.len() as f64,
                expected.len() as f64,
                ok,
                format!("combined clusters {mults:?}, expected {expected:?}"),
            );
        }
        (e1, e2) => {
            if let Err(e) = e1 {
                fail_check(&mut checks, "isospectrality", e.message());
            } else if let Err(e) = e2 {
                fail_check(&mut checks, "isospectrality", e.message());
            }
        }
    }

    // shape invariance residuals; the one-step flow needs γ₁ = γ−1 > 0
    if cfg.gamma > 1.0 {
        match Grid::new(cfg.grid.half_width, cfg.grid.points.min(4001))
            .map_err(classify)
            .and_then(|grid| shape_invariance_residuals(&fam, &params, &grid).map_err(classify))
        {
            Ok(r) => push(
                &mut checks,
                "shape_invariance",
                r.max(),
                1e-12,
                r.max() < 1e-12,
                format!(
                    "sup residuals: scalar {:.2e}, a {:.2e}, b {:.2e}",
                    r.scalar, r.vector_a, r.vector_b
                ),
            ),
            Err(e) => fail_check(&mut checks, "shape_invariance", e.message()),
        }
    }

    // symmetry algebra plus its negative controls
    let algebra_grid = Grid::new(cfg.grid.half_width, cfg.grid.points.min(1201));
    match algebra_grid {
        Ok(grid) => {
            match MatrixSuperpotential::in_default_frame(&fam, params)
                .map_err(classify)
                .and_then(|msup| algebra_check(&msup, &grid).map_err(classify))
            {
                Ok(report) => {
                    let worst = report.max_relative();
                    push(
                        &mut checks,
                        "symmetry_algebra",
                        worst,
                        1e-12,
                        worst < 1e-12,
                        "worst relative residual over the (anti)commutation and supercharge identities"
                            .into(),
                    );
                }
                Err(e) => fail_check(&mut checks, "symmetry_algebra", e.message()),
            }
            let shifted = TanhSuperpotential::shifted(0.3);
            let controls = (|| -> Result<f64, CommandError> {
                let m_shift =
                    MatrixSuperpotential::in_default_frame(&shifted, params).map_err(classify)?;
                let rep = algebra_check(&m_shift, &grid).map_err(classify)?;
                let ta = rep.first_order.anticommutator_ta_minus.relative();
                let frame_y =
                    FrameVectors::new([0.0, 0.0, 1.0], [0.0, 1.0, 0.0]).map_err(classify)?;
                let m_rot = MatrixSuperpotential::new(&fam, params, frame_y).map_err(classify)?;
                let fo = first_order_residuals(&m_rot, &grid).map_err(classify)?;
                Ok(ta.min(fo.commutator_ra_minus.relative()))
            })();
            match controls {
                Ok(min_break) => push(
                    &mut checks,
                    "symmetry_negative_controls",
                    min_break,
                    1e-2,
                    min_break >= 1e-2,
                    "shifted W must break T-relations, rotated frame must break R-relations".into(),
                ),
                Err(e) => fail_check(&mut checks, "symmetry_negative_controls", e.message()),
            }
        }
        Err(e) => fail_check(&mut checks, "symmetry_algebra", e),
    }

    // zero modes at the configured scale; for broken supersymmetry the
    // correct behavior is refusal, so that becomes the check
    if count == 0 {
        let refused = Grid::new(cfg.grid.half_width, cfg.grid.points)
            .map_err(classify)
            .and_then(|grid| {
                let msup =
                    MatrixSuperpotential::in_default_frame(&fam, params).map_err(classify)?;
                zero_mode_pair(&msup, &grid, StaggeredSpace::Nodes).map_err(classify)
            })
            .is_err();
        push(
            &mut checks,
            "zero_mode_refusal",
            if refused { 1.0 } else { 0.0 },
            1.0,
            refused,
            "no normalizable zero mode exists; construction must refuse".into(),
        );
    } else {
        match Grid::new(cfg.grid.half_width, cfg.grid.points)
            .map_err(classify)
            .and_then(|grid| {
                let msup =
                    MatrixSuperpotential::in_default_frame(&fam, params).map_err(classify)?;
                zero_mode_pair(&msup, &grid, StaggeredSpace::Nodes).map_err(classify)
            }) {
            Ok(pair) => {
                let mut rate_dev = 0.0_f64;
                for (f, e) in [
                    (
                        pair.fitted_rates.minus_infinity[0],
                        pair.rates.minus_infinity[0],
                    ),
                    (
                        pair.fitted_rates.minus_infinity[1],
                        pair.rates.minus_infinity[1],
                    ),
                    (
                        pair.fitted_rates.plus_infinity[0],
                        pair.rates.plus_infinity[0],
                    ),
                    (
                        pair.fitted_rates.plus_infinity[1],
                        pair.rates.plus_infinity[1],
                    ),
                ] {
                    rate_dev = rate_dev.max(((f - e) / e).abs());
                }
                push(
                    &mut checks,
                    "zero_mode_residual",
                    pair.residual,
                    1e-8,
                    pair.residual < 1e-8,
                    format!("annihilation residual; gram det {:.3}", pair.gram_det),
                );
                push(
                    &mut checks,
                    "zero_mode_tail_rates",
                    rate_dev,
                    0.02,
                    rate_dev < 0.02,
                    "fitted tail decay rates vs asymptotic channel eigenvalues".into(),
                );
            }
            Err(e) => fail_check(&mut checks, "zero_mode_residual", e.message()),
        }
    }

    // ladder chain Rayleigh quotient at the configured spacing
    if count > 1 {
        let ladder = ladder_grid(cfg, 1).and_then(|grid| {
            let state = build_excited_state(&fam, &params, FrameVectors::default_zx(), &grid, 1)
                .map_err(classify)?;
            let msup = MatrixSuperpotential::in_default_frame(&fam, params).map_err(classify)?;
            let hm = discretize_factorized(&msup, &grid, Sector::Minus).map_err(classify)?;
            let e1 = energy_level(cfg.gamma, cfg.beta, 1).map_err(classify)?;
            let sqrt_h = grid.spacing().sqrt();
            let mut worst = 0.0_f64;
            for m in &state.pair {
                let coeffs: Vec<f64> = m
                    .values
                    .iter()
                    .flat_map(|v| [v[0].re * sqrt_h, v[1].re * sqrt_h])
                    .collect();
                let hx = hm.matvec(&coeffs);
                let num: f64 = coeffs.iter().zip(&hx).map(|(a, b)| a * b).sum();
                let den: f64 = coeffs.iter().map(|a| a * a).sum();
                worst = worst.max(((num / den - e1) / e1).abs());
            }
            Ok(worst)
        });
        match ladder {
            Ok(worst) => push(
                &mut checks,
                "ladder_rayleigh",
                worst,
                1e-3,
                worst < 1e-3,
                "H- Rayleigh quotient of the A+ chain at level 1".into(),
            ),
            Err(e) => fail_check(&mut checks, "ladder_rayleigh", e.message()),
        }
    }

    // factorized and direct schemes agree (sabotage hook lives here)
    {
        let h = 2.0 * cfg.grid.half_width / (cfg.grid.points as f64 + 1.0);
        let agreement = (|| -> Result<(f64, f64), CommandError> {
            let grid = Grid::new(cfg.grid.half_width, cfg.grid.points).map_err(classify)?;
            let msup = MatrixSuperpotential::in_default_frame(&fam, params).map_err(classify)?;
            let mut hd = discretize_direct(&msup, &grid, Sector::Minus).map_err(classify)?;
            if typo_eq41 {
                // the often-quoted constant is γ²+β², the factorization gives
                // γ²+β²/4: inject the 3β²/4 difference
                hd.shift_diagonal(0.75 * cfg.beta * cfg.beta);
            }
            let k = 2 * count.max(1);
            let pd = hd
                .eigen_lowest(k.min(hd.dim()), cfg.solver.tol, RunConfig::workers())
                .map_err(classify)?;
            let hf = discretize_factorized(&msup, &grid, Sector::Minus).map_err(classify)?;
            let pf = hf
                .eigen_lowest(k.min(hf.dim()), cfg.solver.tol, RunConfig::workers())
                .map_err(classify)?;
            let mut diff = 0.0_f64;
            for (a, b) in pd.iter().zip(&pf) {
                diff = diff.max((a.value - b.value).abs());
            }
            Ok((diff, h))
        })();
        match agreement {
            Ok((diff, h)) => {
                let tol = (100.0 * h * h).max(1e-6);
                push(
                    &mut checks,
                    "scheme_agreement",
                    diff,
                    tol,
                    diff < tol,
                    if typo_eq41 {
                        format!("sabotaged: direct scheme carries the wrong constant, expect offset 3beta^2/4 = {}", 0.75 * cfg.beta * cfg.beta)
                    } else {
                        "largest eigenvalue difference between factorized and direct schemes".into()
                    },
                );
            }
            Err(e) => fail_check(&mut checks, "scheme_agreement", e.message()),
        }
    }

    // h² convergence against the closed form
    if count > 1 {
        let conv = (|| -> Result<f64, CommandError> {
            let coarse_points = cfg.grid.points / 2;
            let e1 = energy_level(cfg.gamma, cfg.beta, 1).map_err(classify)?;
            let err_at = |points: usize| -> Result<f64, CommandError> {
                let grid = Grid::new(cfg.grid.half_width, points).map_err(classify)?;
                let msup =
                    MatrixSuperpotential::in_default_frame(&fam, params).map_err(classify)?;
                let hm = discretize_factorized(&msup, &grid, Sector::Minus).map_err(classify)?;
                let vals = hm
                    .eigen_lowest(3, cfg.solver.tol, RunConfig::workers())
                    .map_err(classify)?;
                Ok((vals[2].value - e1).abs())
            };
            Ok(err_at(coarse_points)? / err_at(cfg.grid.points)?)
        })();
        match conv {
            Ok(ratio) => push(
                &mut checks,
                "convergence_order",
                ratio,
                4.0,
                (2.5..6.0).contains(&ratio),
                "E1 error ratio between grid.points/2 and grid.points; expect ~4 (h^2). \
                 Failing here usually means the grid is too coarse: increase --grid.points"
                    .into(),
            ),
            Err(e) => fail_check(&mut checks, "convergence_order", e.message()),
        }
    }

    // the linear-superpotential oracle
    {
        let oracle = (|| -> Result<f64, CommandError> {
            let lin = LinearSuperpotential;
            let p = ModelParams::new(1.0, 1.0, 1.0).map_err(classify)?;
            let msup = MatrixSuperpotential::in_default_frame(&lin, p).map_err(classify)?;
            let grid = Grid::new(12.0, 1200).map_err(classify)?;
            let hm = discretize_factorized(&msup, &grid, Sector::Minus).map_err(classify)?;
            let vals = hm
                .eigen_lowest(6, cfg.solver.tol, RunConfig::workers())
                .map_err(classify)?;
            let mut worst = 0.0_f64;
            for (i, p) in vals.iter().enumerate() {
                let e = case1_spectrum(1.0, i / 2);
                worst = worst.max((p.value - e).abs() / e.max(1.0));
            }
            Ok(worst)
        })();
        match oracle {
            Ok(worst) => push(
                &mut checks,
                "harmonic_oracle",
                worst,
                1e-3,
                worst < 1e-3,
                "linear superpotential with constant field vs 2*gamma*k ladder".into(),
            ),
            Err(e) => fail_check(&mut checks, "harmonic_oracle", e.message()),
        }
    }

    // hypergeometric closed form vs ODE integration
    {
        let dev = hypergeometric_deviation(1.0, cfg.lambda.max(0.5));
        match dev {
            Ok(rel) => push(
                &mut checks,
                "hypergeometric_crosscheck",
                rel,
                1e-8,
                rel < 1e-8,
                "series solution vs integrated first-order system on |z| <= 1".into(),
            ),
            Err(e) => fail_check(&mut checks, "hypergeometric_crosscheck", e.message()),
        }
    }

    // level-count property over 500 random parameter draws
    if !skip_sweep {
        let (matched, flagged, unflagged) = level_count_sweep(500);
        let frac = matched as f64 / 500.0;
        push(
            &mut checks,
            "level_count_bound",
            frac,
            0.98,
            frac >= 0.98 && unflagged == 0,
            format!("matched {matched}/500, flagged near-threshold {flagged}, unflagged mismatches {unflagged}"),
        );
    }

    let passed = checks.iter().all(|c| c.passed);
    for c in &checks {
        println!(
            "{:<28} {}  value {:.3e}  threshold {:.3e}  {}",
            c.name,
            if c.passed { "PASS" } else { "FAIL" },
            c.value,
            c.threshold,
            c.detail
        );
    }
    println!(
        "verify: {}",
        if passed {
            "ALL CHECKS PASSED"
        } else {
            "FAILURES PRESENT"
        }
    );

    let verdict = Verdict {
        passed,
        config: cfg.clone(),
        checks,
    };
    let dir = ensure_outdir(cfg)?;
    let path = dir.join("verify.json");
    std::fs::write(&path, serde_json::to_string_pretty(&verdict).unwrap())
        .map_err(|e| CommandError::Solver(format!("cannot write verdict: {e}")))?;
    println!("wrote {}", path.display());

    if passed {
        Ok(())
    } else {
        Err(CommandError::Verification(
            "one or more verification checks failed".into(),
        ))
    }
}

fn hypergeometric_deviation(beta_n: f64, lambda: f64) -> Result<f64, CommandError> {
    let seed = phi_pair_closed_form(0.0, beta_n, lambda).map_err(classify)?;
    let step = 5e-4;
    let rhs = |z: f64, y: [C64; 2]| -> [C64; 2] {
        let g = lambda / z.cosh();
        [
            -(g / 2.0 * y[0] + beta_n / 2.0 * y[1]),
            -(beta_n / 2.0 * y[0] - g / 2.0 * y[1]),
        ]
    };
    let mut max_dev = 0.0_f64;
    let mut sup = 0.0_f64;
    for direction in [1.0, -1.0] {
        let mut y = seed;
        let mut z = 0.0_f64;
        let s = direction * step;
        for _ in 0..2000 {
            let k1 = rhs(z, y);
            let y2 = [y[0] + s / 2.0 * k1[0], y[1] + s / 2.0 * k1[1]];
            let k2 = rhs(z + s / 2.0, y2);
            let y3 = [y[0] + s / 2.0 * k2[0], y[1] + s / 2.0 * k2[1]];
            let k3 = rhs(z + s / 2.0, y3);
            let y4 = [y[0] + s * k3[0], y[1] + s * k3[1]];
            let k4 = rhs(z + s, y4);
            y = [
                y[0] + s / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
                y[1] + s / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
            ];
            z += s;
            let closed =
                phi1_closed_form(z, beta_n, lambda, Phi1Branch::First).map_err(classify)?;
            max_dev = max_dev.max((y[0] - closed).norm());
            sup = sup.max(closed.norm());
        }
    }
    Ok(max_dev / sup)
}

/// The documented margin rule: flagged when the needed box exceeds the
/// largest usable one, when the N=750/N=1500 counts disagree, or when the
/// top level sits within 8x the Richardson error estimate of the threshold.
fn level_count_sweep(n_samples: usize) -> (usize, usize, usize) {
    let fam = TanhSuperpotential::new();
    let mut state = 0x5eed_cafe_u64;
    let mut rand = move || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut matched = 0;
    let mut flagged = 0;
    let mut unflagged_mismatch = 0;
    for _ in 0..n_samples {
        let gamma = 0.6 + 7.4 * rand();
        let beta = 2.0 * gamma * (0.001 + 0.998 * rand());
        let ana = bound_state_count(gamma, beta).unwrap();
        let thr = continuum_threshold(gamma, beta).unwrap();
        let gap_ana = thr - energy_level(gamma, beta, ana - 1).unwrap();
        let l_want = 3.0 / gap_ana.max(1e-9).sqrt();
        let l = l_want.clamp(12.0, 40.0);
        let box_flag = l_want > 40.0;
        let params = ModelParams::new(gamma, beta, 1.0).unwrap();
        let count_and_top = |points: usize| -> (usize, f64) {
            let grid = Grid::new(l, points).unwrap();
            let msup = MatrixSuperpotential::in_default_frame(&fam, params).unwrap();
            let h = discretize_factorized(&msup, &grid, Sector::Minus).unwrap();
            let c = h.count_below(thr);
            let e_top = if c > 0 {
                h.eigenvalue_by_index(c - 1, 1e-9)
            } else {
                f64::NAN
            };
            (c, e_top)
        };
        let (c1500, e1500) = count_and_top(1500);
        let (c750, e750) = count_and_top(750);
        let rich = if c1500 > 0 && c750 == c1500 {
            (e1500 - e750).abs() / 3.0 + 1e-9 * thr
        } else {
            f64::INFINITY
        };
        let margin_num = thr - e1500;
        let is_flagged =
            box_flag || c750 != c1500 || margin_num < 8.0 * rich || gap_ana < 8.0 * rich;
        let is_match = c1500 == 2 * ana;
        if is_match {
            matched += 1;
        }
        if is_flagged {
            flagged += 1;
        }
        if !is_match && !is_flagged {
            unflagged_mismatch += 1;
        }
    }
    (matched, flagged, unflagged_mismatch)
}

/// `spinshape wavefunction`: sample the level-n eigenspinor pair and write
/// plot-ready files.
pub fn cmd_wavefunction(
    cfg: &RunConfig,
    level: usize,
    member: Option<usize>,
    gnuplot: bool,
) -> CmdResult {
    let count = bound_state_count(cfg.gamma, cfg.beta).map_err(classify)?;
    if level >= count {
        return Err(CommandError::Config(format!(
            "level n={level} is not a bound state here ({count} bound levels for gamma={}, beta={})",
            cfg.gamma, cfg.beta
        )));
    }
    let fam = TanhSuperpotential::new();
    let params = model_params(cfg)?;
    let grid = ladder_grid(cfg, level)?;
    let state = build_excited_state(&fam, &params, FrameVectors::default_zx(), &grid, level)
        .map_err(classify)?;
    println!(
        "level n={level}: energy {:.10} ({} members, grid L={}, N={})",
        state.energy,
        state.pair.len(),
        grid.half_width(),
        grid.points()
    );
    let members: Vec<usize> = match member {
        Some(m) if m == 1 || m == 2 => vec![m - 1],
        Some(m) => {
            return Err(CommandError::Config(format!(
                "member must be 1 or 2, got {m}"
            )))
        }
        None => vec![0, 1],
    };
    let dir = ensure_outdir(cfg)?;
    let mut written = Vec::new();
    for &m in &members {
        let field = &state.pair[m];
        let mut out = Table::new(&["z", "re_psi1", "im_psi1", "re_psi2", "im_psi2"]);
        out.meta("gamma", cfg.gamma);
        out.meta("beta", cfg.beta);
        out.meta("lambda", cfg.lambda);
        out.meta("level", level);
        out.meta("member", m + 1);
        out.meta("energy", fmt_full(state.energy));
        out.meta("norm", fmt_full(field.norm()));
        out.meta("half_width", grid.half_width());
        out.meta("points", grid.points());
        for k in 0..field.len() {
            let v = field.values[k];
            out.row(vec![
                fmt_full(field.coord(k)),
                fmt_full(v[0].re),
                fmt_full(v[0].im),
                fmt_full(v[1].re),
                fmt_full(v[1].im),
            ]);
        }
        let stem = format!("wavefunction_n{level}_m{}", m + 1);
        let path = write_table(cfg, &out, &stem)?;
        println!("wrote {}", path.display());
        written.push(path);
    }
    if gnuplot {
        if cfg.output.format != OutputFormat::Csv {
            return Err(CommandError::Config(
                "--gnuplot requires --format csv".into(),
            ));
        }
        let gp = dir.join(format!("wavefunction_n{level}.gp"));
        let mut script = String::new();
        script.push_str("set datafile separator \",\"\nset datafile commentschars \"#\"\n");
        script.push_str(&format!("set title \"level n={level} eigenspinors\"\n"));
        script.push_str("set xlabel \"z\"\nplot ");
        let mut parts = Vec::new();
        for p in &written {
            let name = p.file_name().unwrap().to_string_lossy();
            parts.push(format!(
                "'{name}' using 1:2 with lines title '{name} psi1', '{name}' using 1:4 with lines title '{name} psi2'"
            ));
        }
        script.push_str(&parts.join(", \\\n     "));
        script.push('\n');
        std::fs::write(&gp, script)
            .map_err(|e| CommandError::Solver(format!("cannot write gnuplot script: {e}")))?;
        println!("wrote {}", gp.display());
    }
    Ok(())
}
