//! Problem data and the discrete energies, Gateaux derivatives, and the
//! weak-form residual.
//!
//! The gradient magnitude |Du| is constant per element, so kernels are
//! evaluated once per (element, quadrature point) with exponents and the
//! weight cached at the quadrature points up front. The Gateaux gradient and
//! the weak residual share one assembly path and are identical by
//! construction.

use crate::error::{Error, Result};
use crate::exponent::{validate_ordering, validate_subcritical, PowerPair};
use crate::kernels::Kernel;
use crate::mesh::{GridFunction, Mesh};
use crate::modular::sobolev_norm;
use crate::report::ValidationReport;
use std::sync::Arc;

/// Full problem instance: mesh, kernel triple, weight, and reaction powers.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    mesh: Arc<Mesh>,
    phi: Kernel,
    psi: Kernel,
    theta: Kernel,
    weight: GridFunction,
    powers: PowerPair,
    p1_at_quad: Vec<f64>,
    p2_at_quad: Vec<f64>,
    p3_at_quad: Vec<f64>,
    weight_at_quad: Vec<f64>,
}

/// The four energy pieces; the total at parameter lambda is
/// phi + psi + theta - lambda * e2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    pub phi_value: f64,
    pub psi_value: f64,
    pub theta_value: f64,
    pub e2_value: f64,
}

impl EnergyBreakdown {
    pub fn e1(&self) -> f64 {
        self.phi_value + self.psi_value + self.theta_value
    }

    pub fn total(&self, lambda: f64) -> f64 {
        self.e1() - lambda * self.e2_value
    }

    /// CSV row `phi,psi,theta,e2,total,lambda` with full precision.
    pub fn csv_row(&self, lambda: f64) -> String {
        format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            self.phi_value,
            self.psi_value,
            self.theta_value,
            self.e2_value,
            self.total(lambda),
            lambda
        )
    }
}

/// Which pieces an assembly pass should produce.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct AssemblyRequest {
    pub gradients: bool,
    pub quotient2_gradients: bool,
}

/// Scalars and (optionally) gradient vectors produced by one assembly sweep.
#[derive(Debug, Clone, Default)]
pub(crate) struct Assembly {
    pub phi_value: f64,
    pub psi_value: f64,
    pub theta_value: f64,
    pub e2_value: f64,
    pub num2: f64,
    pub den2: f64,
    pub e1_grad: Vec<f64>,
    pub e2_grad: Vec<f64>,
    pub num2_grad: Vec<f64>,
    pub den2_grad: Vec<f64>,
}

impl Assembly {
    pub fn e1(&self) -> f64 {
        self.phi_value + self.psi_value + self.theta_value
    }

    pub fn breakdown(&self) -> EnergyBreakdown {
        EnergyBreakdown {
            phi_value: self.phi_value,
            psi_value: self.psi_value,
            theta_value: self.theta_value,
            e2_value: self.e2_value,
        }
    }
}

impl ProblemSpec {
    pub fn new(
        mesh: Arc<Mesh>,
        phi: Kernel,
        psi: Kernel,
        theta: Kernel,
        weight: GridFunction,
        powers: PowerPair,
    ) -> Result<Self> {
        if !Arc::ptr_eq(&mesh, weight.mesh()) {
            return Err(Error::Domain("weight lives on a different mesh".into()));
        }
        for (kernel, name) in [(&phi, "phi"), (&psi, "psi"), (&theta, "theta")] {
            if kernel.exponent().domain() != mesh.domain() {
                return Err(Error::Domain(format!(
                    "{name} kernel exponent domain differs from the mesh domain"
                )));
            }
        }
        let quad = mesh.quad_data();
        let p1_at_quad = quad.iter().map(|q| phi.exponent().value(q.x)).collect();
        let p2_at_quad = quad.iter().map(|q| psi.exponent().value(q.x)).collect();
        let p3_at_quad = quad.iter().map(|q| theta.exponent().value(q.x)).collect();
        let weight_at_quad = weight.quad_values();
        Ok(ProblemSpec {
            mesh,
            phi,
            psi,
            theta,
            weight,
            powers,
            p1_at_quad,
            p2_at_quad,
            p3_at_quad,
            weight_at_quad,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn phi(&self) -> &Kernel {
        &self.phi
    }

    pub fn psi(&self) -> &Kernel {
        &self.psi
    }

    pub fn theta(&self) -> &Kernel {
        &self.theta
    }

    pub fn weight(&self) -> &GridFunction {
        &self.weight
    }

    pub fn powers(&self) -> PowerPair {
        self.powers
    }

    /// Sampled bound for the weight, used as its L-infinity surrogate.
    pub fn weight_bound(&self) -> f64 {
        self.weight.max_abs()
    }

    /// Same problem with the weight replaced (exponents and kernels shared).
    pub fn with_weight(&self, weight: GridFunction) -> Result<Self> {
        ProblemSpec::new(
            Arc::clone(&self.mesh),
            self.phi.clone(),
            self.psi.clone(),
            self.theta.clone(),
            weight,
            self.powers,
        )
    }

    /// Structural checks: exponent ordering and subcriticality.
    pub fn validate(&self) -> ValidationReport {
        let mut report = validate_ordering(
            self.phi.exponent(),
            self.psi.exponent(),
            self.theta.exponent(),
            self.powers,
        );
        for check in validate_subcritical(self.phi.exponent(), self.psi.exponent()).checks {
            report.checks.push(check);
        }
        report
    }

    /// The four energy pieces of u.
    pub fn energies(&self, u: &GridFunction) -> Result<EnergyBreakdown> {
        Ok(self.assemble(u, AssemblyRequest::default())?.breakdown())
    }

    /// E_lambda(u) = Phi + Psi + Theta - lambda * E2.
    pub fn total_energy(&self, u: &GridFunction, lambda: f64) -> Result<f64> {
        Ok(self.energies(u)?.total(lambda))
    }

    /// Numerator and denominator of the second Rayleigh quotient.
    pub fn num2_den2(&self, u: &GridFunction) -> Result<(f64, f64)> {
        let asm = self.assemble(u, AssemblyRequest::default())?;
        Ok((asm.num2, asm.den2))
    }

    /// Directional derivatives of the total energy along every interior basis
    /// function; exact for the discrete energy up to quadrature.
    pub fn gateaux_gradient(&self, u: &GridFunction, lambda: f64) -> Result<Vec<f64>> {
        let asm = self.assemble(
            u,
            AssemblyRequest {
                gradients: true,
                ..Default::default()
            },
        )?;
        Ok(residual_vector(&asm, lambda))
    }

    /// Weak-form residual: the same vector as `gateaux_gradient`, plus the
    /// scale-free sup norm max|R_i| / (1 + |u|_{W^{1,p2}}).
    pub fn weak_residual(&self, u: &GridFunction, lambda: f64) -> Result<(f64, Vec<f64>)> {
        let vector = self.gateaux_gradient(u, lambda)?;
        let scale = 1.0 + sobolev_norm(u, self.psi.exponent())?;
        let sup = vector.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok((sup / scale, vector))
    }

    pub(crate) fn assemble(&self, u: &GridFunction, req: AssemblyRequest) -> Result<Assembly> {
        assert!(
            Arc::ptr_eq(&self.mesh, u.mesh()),
            "function lives on a different mesh"
        );
        let mesh = &self.mesh;
        let per = mesh.quad_per_element();
        let nloc = mesh.nodes_per_element();
        let n = mesh.n_interior();
        let (r, s) = (self.powers.r, self.powers.s);

        let mut out = Assembly::default();
        if req.gradients {
            out.e1_grad = vec![0.0; n];
            out.e2_grad = vec![0.0; n];
        }
        if req.quotient2_gradients {
            out.num2_grad = vec![0.0; n];
            out.den2_grad = vec![0.0; n];
        }

        let quad = mesh.quad_data();
        for (e, data) in mesh.element_data().iter().enumerate() {
            let mut local = [0.0f64; 3];
            for a in 0..nloc {
                local[a] = data.interior[a].map_or(0.0, |k| u.values()[k]);
            }
            let mut du = [0.0f64; 2];
            for a in 0..nloc {
                du[0] += local[a] * data.grads[a][0];
                du[1] += local[a] * data.grads[a][1];
            }
            let xi = (du[0] * du[0] + du[1] * du[1]).sqrt();

            let mut element_sum = 0.0;
            for (q, qp) in quad[e * per..(e + 1) * per].iter().enumerate() {
                let idx = e * per + q;
                let (p1, p2, p3) = (
                    self.p1_at_quad[idx],
                    self.p2_at_quad[idx],
                    self.p3_at_quad[idx],
                );
                let wgt = self.weight_at_quad[idx];
                let x = qp.x;
                let w = qp.weight;

                let mut uv = 0.0;
                for a in 0..nloc {
                    uv += local[a] * qp.shape[a];
                }
                let au = uv.abs();

                let phi_d = self.phi.density_with(p1, x, xi);
                let psi_d = self.psi.density_with(p2, x, xi);
                let theta_d = self.theta.density_with(p3, x, au);
                out.phi_value += w * phi_d;
                out.psi_value += w * psi_d;
                out.theta_value += w * wgt * theta_d;

                let ur = if au > 0.0 { au.powf(r) } else { 0.0 };
                let us = if au > 0.0 { au.powf(s) } else { 0.0 };
                out.e2_value += w * (ur / r + us / s);
                out.den2 += w * (ur + us);

                let grad_flux =
                    self.phi.flux_scalar_with(p1, x, xi) + self.psi.flux_scalar_with(p2, x, xi);
                let theta_flux = self.theta.flux_scalar_with(p3, x, au);
                out.num2 += w * (grad_flux * xi + wgt * theta_flux * au);

                element_sum += phi_d + psi_d + wgt * theta_d + ur + us;

                if req.gradients {
                    if xi > 0.0 {
                        let coef =
                            w * (self.phi.value_with(p1, x, xi) + self.psi.value_with(p2, x, xi));
                        for a in 0..nloc {
                            if let Some(k) = data.interior[a] {
                                out.e1_grad[k] +=
                                    coef * (du[0] * data.grads[a][0] + du[1] * data.grads[a][1]);
                            }
                        }
                    }
                    if au > 0.0 {
                        let sign = if uv >= 0.0 { 1.0 } else { -1.0 };
                        let react = w * (au.powf(r - 1.0) + au.powf(s - 1.0)) * sign;
                        let theta_term = w * wgt * theta_flux * sign;
                        for a in 0..nloc {
                            if let Some(k) = data.interior[a] {
                                out.e1_grad[k] += theta_term * qp.shape[a];
                                out.e2_grad[k] += react * qp.shape[a];
                            }
                        }
                    }
                }
                if req.quotient2_gradients {
                    if xi > 0.0 {
                        let gcoef = w
                            * ((self.phi.xi_derivative_with(p1, x, xi)
                                + self.psi.xi_derivative_with(p2, x, xi))
                                * xi
                                + 2.0
                                    * (self.phi.value_with(p1, x, xi)
                                        + self.psi.value_with(p2, x, xi)));
                        for a in 0..nloc {
                            if let Some(k) = data.interior[a] {
                                out.num2_grad[k] +=
                                    gcoef * (du[0] * data.grads[a][0] + du[1] * data.grads[a][1]);
                            }
                        }
                    }
                    if au > 0.0 {
                        let sign = if uv >= 0.0 { 1.0 } else { -1.0 };
                        let tprime = self.theta.xi_derivative_with(p3, x, au);
                        let tval = self.theta.value_with(p3, x, au);
                        let ucoef = w * wgt * (tprime * au + 2.0 * tval) * au * sign;
                        let dreact = w * (r * au.powf(r - 1.0) + s * au.powf(s - 1.0)) * sign;
                        for a in 0..nloc {
                            if let Some(k) = data.interior[a] {
                                out.num2_grad[k] += ucoef * qp.shape[a];
                                out.den2_grad[k] += dreact * qp.shape[a];
                            }
                        }
                    }
                }
            }
            if !element_sum.is_finite() {
                return Err(Error::NonFiniteValue {
                    element: e,
                    context: "energy density".into(),
                });
            }
        }
        Ok(out)
    }
}

/// R(lambda) = grad E1 - lambda * grad E2 from an assembly with gradients.
pub(crate) fn residual_vector(asm: &Assembly, lambda: f64) -> Vec<f64> {
    asm.e1_grad
        .iter()
        .zip(&asm.e2_grad)
        .map(|(a, b)| a - lambda * b)
        .collect()
}
