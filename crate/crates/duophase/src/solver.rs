//! Rayleigh-quotient thresholds and eigenpair solves.
//!
//! Both quotients and the parametric energy N(v) = E1(v) - lambda E2(v) are
//! minimized by multi-start descent: the raw Gateaux gradient is
//! H1-preconditioned (exact tridiagonal solve in 1D, Jacobi-CG in 2D),
//! steps start from a Barzilai-Borwein guess and are safeguarded by Armijo
//! backtracking, so the objective decreases monotonically along accepted
//! steps. Restart results merge by (objective, restart index), which keeps
//! runs bit-reproducible for a fixed seed.

use crate::energy::{residual_vector, Assembly, AssemblyRequest, ProblemSpec};
use crate::error::{Error, Result};
use crate::mesh::GridFunction;
use crate::modular::sobolev_norm;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Descent and stopping parameters shared by every solve.
#[derive(Debug, Clone)]
pub struct QuotientConfig {
    /// Trial step for the very first iteration of each restart.
    pub initial_step: f64,
    /// Armijo backtracking factor.
    pub armijo_factor: f64,
    /// Armijo sufficient-decrease constant.
    pub sufficient_decrease: f64,
    pub max_iterations: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Relative objective-change threshold for the stall test.
    pub quotient_change_tol: f64,
    /// Consecutive stalled iterations that end a restart.
    pub stall_iterations: usize,
    /// Scaled residual at which a restart stops early.
    pub residual_stop_tol: f64,
    /// Scaled residual a result must meet to count as converged.
    pub residual_tolerance: f64,
    /// Norm floor separating trivial collapse from a genuine eigenfunction.
    pub nontriviality_floor: f64,
}

impl Default for QuotientConfig {
    fn default() -> Self {
        QuotientConfig {
            initial_step: 1.0,
            armijo_factor: 0.5,
            sufficient_decrease: 1e-4,
            max_iterations: 20_000,
            restarts: 8,
            seed: 42,
            quotient_change_tol: 1e-10,
            stall_iterations: 5,
            residual_stop_tol: 1e-8,
            residual_tolerance: 1e-6,
            nontriviality_floor: 1e-6,
        }
    }
}

impl QuotientConfig {
    /// Check the structural invariants: positive steps and tolerances,
    /// backtracking factors in (0, 1), at least one restart.
    pub fn validated(self) -> Result<Self> {
        let positive = [
            ("initial_step", self.initial_step),
            ("quotient_change_tol", self.quotient_change_tol),
            ("residual_stop_tol", self.residual_stop_tol),
            ("residual_tolerance", self.residual_tolerance),
            ("nontriviality_floor", self.nontriviality_floor),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Config(format!("solver.{name} must be positive")));
            }
        }
        for (name, value) in [
            ("armijo_factor", self.armijo_factor),
            ("sufficient_decrease", self.sufficient_decrease),
        ] {
            if !(value > 0.0 && value < 1.0) {
                return Err(Error::Config(format!("solver.{name} must lie in (0, 1)")));
            }
        }
        if self.restarts == 0 || self.max_iterations == 0 || self.stall_iterations == 0 {
            return Err(Error::Config(
                "solver.restarts, max_iterations, stall_iterations must be at least 1".into(),
            ));
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    TrivialOnly,
    MaxIter,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Converged => "converged",
            SolveStatus::TrivialOnly => "trivial_only",
            SolveStatus::MaxIter => "max_iter",
        };
        write!(f, "{s}")
    }
}

/// One accepted descent step, as written to convergence-history CSVs.
#[derive(Debug, Clone, Copy)]
pub struct HistoryRow {
    pub iter: usize,
    pub objective: f64,
    pub residual_norm: f64,
    pub step_size: f64,
}

/// Per-restart convergence history.
#[derive(Debug, Clone)]
pub struct RestartHistory {
    pub restart: usize,
    pub rows: Vec<HistoryRow>,
}

/// Eigen solve output: candidate eigenpair plus convergence metadata.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub lambda: f64,
    pub u: GridFunction,
    pub residual_norm: f64,
    pub r1_value: f64,
    pub r2_value: f64,
    pub iterations: usize,
    pub restarts_used: usize,
    pub status: SolveStatus,
    pub histories: Vec<RestartHistory>,
}

/// Output of a quotient minimization.
#[derive(Debug, Clone)]
pub struct ThresholdResult {
    pub value: f64,
    pub minimizer: GridFunction,
    pub residual_norm: f64,
    pub iterations: usize,
    pub restarts_used: usize,
    pub histories: Vec<RestartHistory>,
}

/// First Rayleigh quotient E1(u) / E2(u).
pub fn r1(u: &GridFunction, spec: &ProblemSpec) -> Result<f64> {
    let e = spec.energies(u)?;
    if e.e2_value <= 0.0 {
        return Err(Error::ZeroDenominator(
            "first Rayleigh quotient of the zero function".into(),
        ));
    }
    Ok(e.e1() / e.e2_value)
}

/// Second Rayleigh quotient Num2(u) / Den2(u).
pub fn r2(u: &GridFunction, spec: &ProblemSpec) -> Result<f64> {
    let (num2, den2) = spec.num2_den2(u)?;
    if den2 <= 0.0 {
        return Err(Error::ZeroDenominator(
            "second Rayleigh quotient of the zero function".into(),
        ));
    }
    Ok(num2 / den2)
}

#[derive(Clone, Copy)]
enum Mode {
    QuotientR1,
    QuotientR2,
    Energy { lambda: f64 },
}

impl Mode {
    fn request(&self) -> AssemblyRequest {
        match self {
            Mode::QuotientR2 => AssemblyRequest {
                gradients: false,
                quotient2_gradients: true,
            },
            _ => AssemblyRequest {
                gradients: true,
                quotient2_gradients: false,
            },
        }
    }

    fn objective(&self, asm: &Assembly) -> f64 {
        match self {
            Mode::QuotientR1 => {
                if asm.e2_value > 0.0 {
                    asm.e1() / asm.e2_value
                } else {
                    f64::INFINITY
                }
            }
            Mode::QuotientR2 => {
                if asm.den2 > 0.0 {
                    asm.num2 / asm.den2
                } else {
                    f64::INFINITY
                }
            }
            Mode::Energy { lambda } => asm.e1() - lambda * asm.e2_value,
        }
    }

    /// Objective gradient and the raw (unscaled) residual sup norm used by
    /// the stopping test.
    fn gradient(&self, asm: &Assembly, objective: f64) -> (Vec<f64>, f64) {
        match self {
            Mode::QuotientR1 => {
                let res = residual_vector(asm, objective);
                let sup = sup_norm(&res);
                let grad = res.iter().map(|r| r / asm.e2_value).collect();
                (grad, sup)
            }
            Mode::QuotientR2 => {
                let res: Vec<f64> = asm
                    .num2_grad
                    .iter()
                    .zip(&asm.den2_grad)
                    .map(|(n, d)| n - objective * d)
                    .collect();
                let sup = sup_norm(&res);
                let grad = res.iter().map(|r| r / asm.den2).collect();
                (grad, sup)
            }
            Mode::Energy { lambda } => {
                let res = residual_vector(asm, *lambda);
                let sup = sup_norm(&res);
                (res.clone(), sup)
            }
        }
    }

    fn is_quotient(&self) -> bool {
        !matches!(self, Mode::Energy { .. })
    }
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Weighted H1 matrix on the interior nodes, used to precondition raw
/// gradients. The stiffness part carries the current kernel coefficient
/// (phi + psi)(x, |Du|) per element (lagged diffusivity), so conditioning
/// survives large-amplitude iterates where the upper-phase term dominates.
/// 1D meshes get an exact tridiagonal solve; 2D meshes Jacobi-CG.
struct H1Preconditioner {
    n: usize,
    tri: Option<(Vec<f64>, Vec<f64>, Vec<f64>)>,
    csr: Option<(Vec<usize>, Vec<usize>, Vec<f64>, Vec<f64>)>,
}

/// Clamp for the per-element diffusivity weight; the p < 2 kernels blow up
/// on perfectly flat elements.
const DIFFUSIVITY_CLAMP: (f64, f64) = (1e-8, 1e12);

impl H1Preconditioner {
    /// Assemble around the current iterate; `u = None` weights the stiffness
    /// by the kernel coefficients at |Du| = 1.
    fn build(spec: &ProblemSpec, u: Option<&GridFunction>) -> Self {
        let mesh = spec.mesh();
        let n = mesh.n_interior();
        let nloc = mesh.nodes_per_element();
        let per = mesh.quad_per_element();
        let quad = mesh.quad_data();
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        for (e, data) in mesh.element_data().iter().enumerate() {
            let xi = u.map_or(1.0, |f| {
                let g = f.gradient(e);
                (g[0] * g[0] + g[1] * g[1]).sqrt()
            });
            let mut coeff = 0.0;
            for qp in &quad[e * per..(e + 1) * per] {
                let p1 = spec.phi().exponent().value(qp.x);
                let p2 = spec.psi().exponent().value(qp.x);
                coeff += spec.phi().value_with(p1, qp.x, xi) + spec.psi().value_with(p2, qp.x, xi);
            }
            coeff /= per as f64;
            if !coeff.is_finite() {
                coeff = DIFFUSIVITY_CLAMP.1;
            }
            let coeff = coeff.clamp(DIFFUSIVITY_CLAMP.0, DIFFUSIVITY_CLAMP.1);
            for a in 0..nloc {
                let Some(ka) = data.interior[a] else { continue };
                for b in 0..nloc {
                    let Some(kb) = data.interior[b] else { continue };
                    let stiff = coeff
                        * data.measure
                        * (data.grads[a][0] * data.grads[b][0]
                            + data.grads[a][1] * data.grads[b][1]);
                    let mut mass = 0.0;
                    for qp in &quad[e * per..(e + 1) * per] {
                        mass += qp.weight * qp.shape[a] * qp.shape[b];
                    }
                    triplets.push((ka, kb, stiff + mass));
                }
            }
        }
        if mesh.dimension() == 1 {
            let mut diag = vec![0.0; n];
            let mut lower = vec![0.0; n.saturating_sub(1)];
            let mut upper = vec![0.0; n.saturating_sub(1)];
            for (i, j, v) in triplets {
                if i == j {
                    diag[i] += v;
                } else if j + 1 == i {
                    lower[j] += v;
                } else if i + 1 == j {
                    upper[i] += v;
                }
            }
            H1Preconditioner {
                n,
                tri: Some((lower, diag, upper)),
                csr: None,
            }
        } else {
            let mut dense: std::collections::BTreeMap<(usize, usize), f64> =
                std::collections::BTreeMap::new();
            for (i, j, v) in triplets {
                *dense.entry((i, j)).or_insert(0.0) += v;
            }
            let mut rowptr = vec![0usize; n + 1];
            let mut cols = Vec::with_capacity(dense.len());
            let mut vals = Vec::with_capacity(dense.len());
            for (&(i, j), &v) in &dense {
                rowptr[i + 1] += 1;
                cols.push(j);
                vals.push(v);
            }
            for i in 0..n {
                rowptr[i + 1] += rowptr[i];
            }
            let mut inv_diag = vec![1.0; n];
            for (&(i, j), &v) in &dense {
                if i == j && v > 0.0 {
                    inv_diag[i] = 1.0 / v;
                }
            }
            H1Preconditioner {
                n,
                tri: None,
                csr: Some((rowptr, cols, vals, inv_diag)),
            }
        }
    }

    /// Solve M z = rhs.
    fn apply_inverse(&self, rhs: &[f64]) -> Vec<f64> {
        if let Some((lower, diag, upper)) = &self.tri {
            return thomas_solve(lower, diag, upper, rhs);
        }
        let (rowptr, cols, vals, inv_diag) = self.csr.as_ref().unwrap();
        let n = self.n;
        let matvec = |x: &[f64], out: &mut [f64]| {
            for i in 0..n {
                let mut acc = 0.0;
                for k in rowptr[i]..rowptr[i + 1] {
                    acc += vals[k] * x[cols[k]];
                }
                out[i] = acc;
            }
        };
        let mut x = vec![0.0; n];
        let mut r = rhs.to_vec();
        let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(a, d)| a * d).collect();
        let mut p = z.clone();
        let mut ap = vec![0.0; n];
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let target = 1e-24 * rhs.iter().map(|v| v * v).sum::<f64>().max(1e-300);
        for _ in 0..20 * n.max(1) {
            if r.iter().map(|v| v * v).sum::<f64>() <= target {
                break;
            }
            matvec(&p, &mut ap);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if pap <= 0.0 {
                break;
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        x
    }
}

fn thomas_solve(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper.first().copied().unwrap_or(0.0) / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i - 1] * c[i - 1];
        if i < n - 1 {
            c[i] = upper[i] / m;
        }
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / m;
    }
    let mut x = d;
    for i in (0..n.saturating_sub(1)).rev() {
        let next = x[i + 1];
        x[i] -= c[i] * next;
    }
    x
}

struct RestartOutcome {
    u: GridFunction,
    objective: f64,
    iterations: usize,
    stationarity: f64,
    norm: f64,
    trivial: bool,
    history: Vec<HistoryRow>,
}

/// Multi-start seeds: leading sine (or tensor-sine) modes, then seeded random
/// nodal vectors, all normalized to unit max-abs. An optional warm start is
/// prepended.
fn starting_points(
    spec: &ProblemSpec,
    cfg: &QuotientConfig,
    warm: Option<&GridFunction>,
) -> Result<Vec<GridFunction>> {
    use std::f64::consts::PI;
    let mesh = spec.mesh();
    let mut starts: Vec<GridFunction> = Vec::new();
    if let Some(w) = warm {
        starts.push(w.clone());
    }
    let domain = mesh.domain();
    let mut modes: Vec<GridFunction> = Vec::new();
    match domain {
        crate::exponent::Domain::Interval { a, b } => {
            for k in 1..=3usize {
                modes.push(mesh.interpolate(|p| (k as f64 * PI * (p[0] - a) / (b - a)).sin())?);
            }
        }
        crate::exponent::Domain::Rectangle { x, y } => {
            for (i, j) in [(1usize, 1usize), (2, 1), (1, 2)] {
                modes.push(mesh.interpolate(|p| {
                    (i as f64 * PI * (p[0] - x.0) / (x.1 - x.0)).sin()
                        * (j as f64 * PI * (p[1] - y.0) / (y.1 - y.0)).sin()
                })?);
            }
        }
    }
    let mut rng = StdRng::seed_from_u64(cfg.seed);
    let deterministic = modes.len();
    for k in 0..cfg.restarts {
        let mut start = if k < deterministic {
            modes[k].clone()
        } else {
            let values: Vec<f64> = (0..mesh.n_interior())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            GridFunction::from_values(mesh, values)?
        };
        let m = start.max_abs();
        if m > 0.0 {
            start.scale(1.0 / m);
        }
        starts.push(start);
    }
    Ok(starts)
}

/// Best scaling t of u under the objective over t in [1e-3, 1e3]: a dense
/// log-grid scan (rays are not unimodal — the parametric energy rises before
/// its negative dip) followed by golden-section refinement in the winning
/// cell.
fn optimize_scale(spec: &ProblemSpec, mode: Mode, u: &GridFunction) -> Result<(f64, f64)> {
    let eval = |tau: f64| -> Result<f64> {
        let asm = spec.assemble(&u.scaled(tau.exp()), AssemblyRequest::default())?;
        Ok(mode.objective(&asm))
    };
    let span = 3.0 * std::f64::consts::LN_10;
    let points = 121usize;
    let tau_at = |k: usize| -span + 2.0 * span * k as f64 / (points - 1) as f64;
    let mut best = (f64::INFINITY, 0usize);
    for k in 0..points {
        let v = eval(tau_at(k))?;
        if v < best.0 {
            best = (v, k);
        }
    }
    let mut lo = tau_at(best.1.saturating_sub(1));
    let mut hi = tau_at((best.1 + 1).min(points - 1));
    let golden = 0.618_033_988_749_894_9_f64;
    let mut m1 = hi - golden * (hi - lo);
    let mut m2 = lo + golden * (hi - lo);
    let mut f1 = eval(m1)?;
    let mut f2 = eval(m2)?;
    for _ in 0..60 {
        if f1 <= f2 {
            hi = m2;
            m2 = m1;
            f2 = f1;
            m1 = hi - golden * (hi - lo);
            f1 = eval(m1)?;
        } else {
            lo = m1;
            m1 = m2;
            f1 = f2;
            m2 = lo + golden * (hi - lo);
            f2 = eval(m2)?;
        }
    }
    let (value, tau) = if f1 <= f2 { (f1, m1) } else { (f2, m2) };
    if value <= best.0 {
        Ok((tau.exp(), value))
    } else {
        Ok((tau_at(best.1).exp(), best.0))
    }
}

fn descend(
    spec: &ProblemSpec,
    mode: Mode,
    start: GridFunction,
    cfg: &QuotientConfig,
) -> Result<RestartOutcome> {
    let p2 = spec.psi().exponent();
    let mut u = start;

    // pick the best scale along the starting ray first; for the energy this
    // lands the iterate at the right amplitude immediately
    let (t, _) = optimize_scale(spec, mode, &u)?;
    u.scale(t);
    let mut precond = H1Preconditioner::build(spec, Some(&u));

    let eval_full = |u: &GridFunction| -> Result<(f64, Vec<f64>, f64)> {
        let asm = spec.assemble(u, mode.request())?;
        let f = mode.objective(&asm);
        let (grad, res_sup) = mode.gradient(&asm, f);
        Ok((f, grad, res_sup))
    };
    let eval_value = |u: &GridFunction| -> Result<f64> {
        let asm = spec.assemble(u, AssemblyRequest::default())?;
        Ok(mode.objective(&asm))
    };

    let (mut f, mut grad, mut res_sup) = eval_full(&u)?;
    let mut dir = precond.apply_inverse(&grad);
    for d in dir.iter_mut() {
        *d = -*d;
    }
    let mut gd: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
    let mut scale_norm = sobolev_norm(&u, p2)?;
    let mut history = vec![HistoryRow {
        iter: 0,
        objective: f,
        residual_norm: res_sup / (1.0 + scale_norm),
        step_size: 0.0,
    }];

    let mut step = cfg.initial_step;
    let mut stall = 0usize;
    let mut iterations = 0usize;
    let mut trivial = false;

    while iterations < cfg.max_iterations {
        if !f.is_finite() || gd >= 0.0 {
            break;
        }
        // Armijo backtracking from the BB trial step; the slack of a few
        // ulps of f keeps the test meaningful once decreases reach the
        // floating-point noise floor of the assembled energy
        let noise = 8.0 * f64::EPSILON * (1.0 + f.abs());
        let mut t = step;
        let mut accepted: Option<(GridFunction, f64)> = None;
        for _ in 0..60 {
            let mut trial = u.clone();
            for (v, d) in trial.values_mut().iter_mut().zip(&dir) {
                *v += t * d;
            }
            let ft = eval_value(&trial)?;
            if ft <= f + cfg.sufficient_decrease * t * gd + noise {
                accepted = Some((trial, ft));
                break;
            }
            t *= cfg.armijo_factor;
        }
        let Some((u_new, _)) = accepted else { break };
        if t < 1e-13 {
            break; // progress indistinguishable from rounding
        }
        let (f_new, grad_new, res_new) = eval_full(&u_new)?;
        let mut dir_new = precond.apply_inverse(&grad_new);
        for d in dir_new.iter_mut() {
            *d = -*d;
        }

        // BB step in the preconditioned metric; M^{-1} y = dir - dir_new
        let sy: f64 = grad_new
            .iter()
            .zip(&grad)
            .zip(&dir)
            .map(|((gn, g), d)| (gn - g) * (t * d))
            .sum();
        let y_minv_y: f64 = grad_new
            .iter()
            .zip(&grad)
            .zip(dir.iter().zip(&dir_new))
            .map(|((gn, g), (d, dn))| (gn - g) * (d - dn))
            .sum();
        step = if sy.is_finite() && y_minv_y.is_finite() && sy > 0.0 && y_minv_y > 0.0 {
            (sy / y_minv_y).clamp(1e-14, 1e8)
        } else {
            (t * 2.0).min(1e8)
        };

        let rel_change = (f_new - f).abs() / f_new.abs().max(1e-300);
        u = u_new;
        f = f_new;
        grad = grad_new;
        dir = dir_new;
        res_sup = res_new;
        gd = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        iterations += 1;

        if iterations % 20 == 0 {
            scale_norm = sobolev_norm(&u, p2)?;
        }
        let res_scaled = res_sup / (1.0 + scale_norm);
        history.push(HistoryRow {
            iter: iterations,
            objective: f,
            residual_norm: res_scaled,
            step_size: t,
        });

        if res_scaled < cfg.residual_stop_tol {
            break;
        }
        stall = if rel_change < cfg.quotient_change_tol {
            stall + 1
        } else {
            0
        };
        // the objective flattens quadratically near a minimizer while the
        // residual is still dropping, so stagnation only ends the restart
        // once the residual requirement is met
        if stall >= cfg.stall_iterations && res_scaled <= cfg.residual_tolerance {
            break;
        }

        if !mode.is_quotient()
            && u.max_abs() < cfg.nontriviality_floor * 1e-2
            && sobolev_norm(&u, p2)? < cfg.nontriviality_floor
        {
            trivial = true;
            break;
        }

        if iterations % 25 == 0 {
            // keep quotient iterates well-scaled; the objective is
            // re-evaluated, never assumed invariant
            let m = u.max_abs();
            let rescaled = mode.is_quotient() && !(1e-2..=1e2).contains(&m) && m > 0.0;
            if rescaled {
                u.scale(1.0 / m);
                let refreshed = eval_full(&u)?;
                f = refreshed.0;
                grad = refreshed.1;
                res_sup = refreshed.2;
                scale_norm = sobolev_norm(&u, p2)?;
                step = cfg.initial_step;
            }
            // refresh the lagged-diffusivity weights around the new iterate
            precond = H1Preconditioner::build(spec, Some(&u));
            dir = precond.apply_inverse(&grad);
            for d in dir.iter_mut() {
                *d = -*d;
            }
            gd = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        }
    }

    let norm = sobolev_norm(&u, p2)?;
    if !trivial && norm < cfg.nontriviality_floor {
        trivial = true;
    }
    Ok(RestartOutcome {
        objective: f,
        iterations,
        stationarity: res_sup / (1.0 + norm),
        norm,
        trivial,
        history,
        u,
    })
}

fn run_restarts(
    spec: &ProblemSpec,
    mode: Mode,
    cfg: &QuotientConfig,
    warm: Option<&GridFunction>,
) -> Result<(Vec<RestartOutcome>, Vec<RestartHistory>)> {
    let starts = starting_points(spec, cfg, warm)?;
    let mut outcomes = Vec::with_capacity(starts.len());
    let mut histories = Vec::with_capacity(starts.len());
    for (k, start) in starts.into_iter().enumerate() {
        let outcome = descend(spec, mode, start, cfg)?;
        histories.push(RestartHistory {
            restart: k,
            rows: outcome.history.clone(),
        });
        outcomes.push(outcome);
    }
    Ok((outcomes, histories))
}

fn minimize_quotient(
    spec: &ProblemSpec,
    mode: Mode,
    cfg: &QuotientConfig,
    warm: Option<&GridFunction>,
    label: &str,
) -> Result<ThresholdResult> {
    let (outcomes, histories) = run_restarts(spec, mode, cfg, warm)?;
    let restarts_used = outcomes.len();
    let mut winner: Option<usize> = None;
    for (k, o) in outcomes.iter().enumerate() {
        if !o.objective.is_finite() || o.stationarity > cfg.residual_tolerance {
            continue;
        }
        match winner {
            None => winner = Some(k),
            Some(w) if o.objective < outcomes[w].objective => winner = Some(k),
            _ => {}
        }
    }
    let Some(w) = winner else {
        return Err(Error::Convergence(format!(
            "no {label} restart reached residual {} (best stationarity {:.3e})",
            cfg.residual_tolerance,
            outcomes
                .iter()
                .map(|o| o.stationarity)
                .fold(f64::INFINITY, f64::min)
        )));
    };
    let best = &outcomes[w];
    Ok(ThresholdResult {
        value: best.objective,
        minimizer: best.u.clone(),
        residual_norm: best.stationarity,
        iterations: best.iterations,
        restarts_used,
        histories,
    })
}

/// Infimum of the first Rayleigh quotient; the minimizer is an eigenpair at
/// lambda = value, and its scaled weak residual meets the configured
/// tolerance.
pub fn minimize_r1(spec: &ProblemSpec, cfg: &QuotientConfig) -> Result<ThresholdResult> {
    minimize_quotient(spec, Mode::QuotientR1, cfg, None, "R1")
}

/// `minimize_r1` with an extra warm start; used by the weight optimizer.
pub(crate) fn minimize_r1_warm(
    spec: &ProblemSpec,
    cfg: &QuotientConfig,
    warm: Option<&GridFunction>,
) -> Result<ThresholdResult> {
    minimize_quotient(spec, Mode::QuotientR1, cfg, warm, "R1")
}

/// Infimum of the second Rayleigh quotient (the nonexistence threshold).
pub fn minimize_r2(spec: &ProblemSpec, cfg: &QuotientConfig) -> Result<ThresholdResult> {
    minimize_quotient(spec, Mode::QuotientR2, cfg, None, "R2")
}

/// Minimize N(v) = E1(v) - lambda E2(v) from multiple starts and classify
/// the outcome. A nontrivial minimizer with an in-tolerance residual is a
/// converged eigenpair; collapse of every restart below the norm floor means
/// only the trivial solution was found.
pub fn solve_at(lambda: f64, spec: &ProblemSpec, cfg: &QuotientConfig) -> Result<EigenResult> {
    solve_at_impl(lambda, spec, cfg, None)
}

/// `solve_at` with a warm-start prepended to the restart list.
pub fn solve_at_warm(
    lambda: f64,
    spec: &ProblemSpec,
    cfg: &QuotientConfig,
    warm: &GridFunction,
) -> Result<EigenResult> {
    solve_at_impl(lambda, spec, cfg, Some(warm))
}

fn solve_at_impl(
    lambda: f64,
    spec: &ProblemSpec,
    cfg: &QuotientConfig,
    warm: Option<&GridFunction>,
) -> Result<EigenResult> {
    let (outcomes, histories) = run_restarts(spec, Mode::Energy { lambda }, cfg, warm)?;
    let restarts_used = outcomes.len();

    let mut winner: Option<usize> = None;
    for (k, o) in outcomes.iter().enumerate() {
        if o.trivial || o.norm < cfg.nontriviality_floor {
            continue;
        }
        if o.stationarity > cfg.residual_tolerance {
            continue;
        }
        match winner {
            None => winner = Some(k),
            Some(w) if o.objective < outcomes[w].objective => winner = Some(k),
            _ => {}
        }
    }

    if let Some(w) = winner {
        let best = &outcomes[w];
        let (residual_norm, _) = spec.weak_residual(&best.u, lambda)?;
        return Ok(EigenResult {
            lambda,
            r1_value: r1(&best.u, spec)?,
            r2_value: r2(&best.u, spec)?,
            residual_norm,
            iterations: best.iterations,
            restarts_used,
            status: SolveStatus::Converged,
            u: best.u.clone(),
            histories,
        });
    }

    if outcomes.iter().all(|o| o.trivial) {
        let total_iterations = outcomes.iter().map(|o| o.iterations).max().unwrap_or(0);
        return Ok(EigenResult {
            lambda,
            u: GridFunction::zero(spec.mesh()),
            residual_norm: 0.0,
            r1_value: f64::NAN,
            r2_value: f64::NAN,
            iterations: total_iterations,
            restarts_used,
            status: SolveStatus::TrivialOnly,
            histories,
        });
    }

    // no restart both nontrivial and converged: report the best nontrivial one
    let best = outcomes
        .iter()
        .enumerate()
        .filter(|(_, o)| !o.trivial)
        .min_by(|(ka, a), (kb, b)| {
            a.objective
                .partial_cmp(&b.objective)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(ka.cmp(kb))
        })
        .map(|(_, o)| o)
        .expect("at least one nontrivial outcome");
    let (residual_norm, _) = spec.weak_residual(&best.u, lambda)?;
    Ok(EigenResult {
        lambda,
        r1_value: r1(&best.u, spec).unwrap_or(f64::NAN),
        r2_value: r2(&best.u, spec).unwrap_or(f64::NAN),
        residual_norm,
        iterations: best.iterations,
        restarts_used,
        status: SolveStatus::MaxIter,
        u: best.u.clone(),
        histories,
    })
}

/// Nonexistence certificate for lambda below the second threshold.
#[derive(Debug, Clone)]
pub struct CertificateReport {
    pub lambda: f64,
    pub lambda_lower: f64,
    pub gap: f64,
    /// Largest relative defect of the discrete identity R(u).u = Num2 - lambda Den2
    /// over the sampled functions.
    pub identity_max_rel_err: f64,
    pub rays_checked: usize,
    /// Smallest energy N seen along the sampled rays.
    pub ray_min: f64,
    pub passed: bool,
}

impl std::fmt::Display for CertificateReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "nonexistence certificate at lambda = {:.12e} (threshold lambda_* = {:.12e}, gap {:.6e})",
            self.lambda, self.lambda_lower, self.gap
        )?;
        writeln!(
            f,
            "discrete identity: any weak solution u would satisfy lambda = Num2(u)/Den2(u) >= lambda_*,"
        )?;
        writeln!(
            f,
            "so lambda < lambda_* excludes eigenfunctions; sampled identity defect {:.3e}",
            self.identity_max_rel_err
        )?;
        writeln!(
            f,
            "corroborating rays: {} directions, min energy {:.6e} (expected >= 0)",
            self.rays_checked, self.ray_min
        )?;
        write!(
            f,
            "result: {}",
            if self.passed {
                "CERTIFIED"
            } else {
                "NOT CERTIFIED"
            }
        )
    }
}

/// Certify that no eigenfunction exists at `lambda < lambda_lower`.
///
/// The argument is the exact discrete identity: testing the weak form with
/// u itself forces lambda = r2(u) >= lambda_lower for any solution u. The
/// identity is spot-checked on random functions, and random rays provide
/// corroborating nonnegativity evidence for the energy.
pub fn certify_nonexistence(
    lambda: f64,
    lambda_lower: f64,
    spec: &ProblemSpec,
    cfg: &QuotientConfig,
) -> Result<CertificateReport> {
    // NaN lambdas must fail the precondition too
    if lambda.is_nan() || lambda_lower.is_nan() || lambda >= lambda_lower {
        return Err(Error::Precondition(format!(
            "certify_nonexistence needs lambda < lambda_* (got {lambda} >= {lambda_lower})"
        )));
    }
    let mesh = spec.mesh();
    let mut rng = StdRng::seed_from_u64(cfg.seed ^ 0x6e6f6e65);

    let mut identity_max_rel_err = 0.0f64;
    for _ in 0..10 {
        let values: Vec<f64> = (0..mesh.n_interior())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let u = GridFunction::from_values(mesh, values)?;
        let (_, residual) = spec.weak_residual(&u, lambda)?;
        let dot: f64 = residual.iter().zip(u.values()).map(|(r, v)| r * v).sum();
        let (num2, den2) = spec.num2_den2(&u)?;
        let expected = num2 - lambda * den2;
        let scale = num2.abs() + lambda.abs() * den2.abs() + 1.0;
        identity_max_rel_err = identity_max_rel_err.max((dot - expected).abs() / scale);
    }

    let rays = 200usize;
    let t_samples = 61usize;
    let mut ray_min = f64::INFINITY;
    for _ in 0..rays {
        let values: Vec<f64> = (0..mesh.n_interior())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let mut v = GridFunction::from_values(mesh, values)?;
        let m = v.max_abs();
        if m > 0.0 {
            v.scale(1.0 / m);
        }
        for k in 0..t_samples {
            let log_t = -3.0 + 6.0 * k as f64 / (t_samples - 1) as f64;
            let t = 10f64.powf(log_t);
            let energy = spec.total_energy(&v.scaled(t), lambda)?;
            ray_min = ray_min.min(energy);
        }
    }

    let passed = identity_max_rel_err <= 1e-12 && ray_min >= -1e-9;
    Ok(CertificateReport {
        lambda,
        lambda_lower,
        gap: lambda_lower - lambda,
        identity_max_rel_err,
        rays_checked: rays,
        ray_min,
        passed,
    })
}
