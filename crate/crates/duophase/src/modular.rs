//! The modular rho_p(u) = integral of |u|^p(x) and the Luxemburg norm it
//! induces on discrete functions, together with the Holder pairing bound.
//!
//! Modulars are evaluated with the same quadrature rule as the energies so
//! that the norm/modular equivalences hold exactly at the discrete level.

use crate::error::{Error, Result};
use crate::exponent::{conjugate, ExponentField};
use crate::mesh::GridFunction;

/// Absolute bisection tolerance on the Luxemburg scaling parameter.
pub const LUXEMBURG_TOL: f64 = 1e-10;
const MAX_BRACKET_DOUBLINGS: usize = 200;

/// Exponent values at every quadrature point of the mesh carrying `u`.
fn exponent_at_quad(u: &GridFunction, p: &ExponentField) -> Vec<f64> {
    u.mesh()
        .quad_data()
        .iter()
        .map(|qp| p.value(qp.x))
        .collect()
}

fn quad_weights(u: &GridFunction) -> Vec<f64> {
    u.mesh().quad_data().iter().map(|qp| qp.weight).collect()
}

fn modular_from_samples(values: &[f64], exps: &[f64], weights: &[f64], inv_scale: f64) -> f64 {
    let mut total = 0.0;
    for ((&v, &p), &w) in values.iter().zip(exps).zip(weights) {
        let t = (v * inv_scale).abs();
        if t > 0.0 {
            total += w * t.powf(p);
        }
    }
    total
}

/// rho_p(u): quadrature approximation of the integral of |u(x)|^p(x).
pub fn modular(u: &GridFunction, p: &ExponentField) -> f64 {
    let values = u.quad_values();
    let exps = exponent_at_quad(u, p);
    let weights = quad_weights(u);
    modular_from_samples(&values, &exps, &weights, 1.0)
}

/// rho_p(|Du|): modular of the (piecewise constant) gradient magnitude.
pub fn modular_of_gradient(u: &GridFunction, p: &ExponentField) -> f64 {
    let mesh = u.mesh();
    let per = mesh.quad_per_element();
    let mut total = 0.0;
    for (idx, qp) in mesh.quad_data().iter().enumerate() {
        let g = u.gradient(idx / per);
        let t = (g[0] * g[0] + g[1] * g[1]).sqrt();
        if t > 0.0 {
            total += qp.weight * t.powf(p.value(qp.x));
        }
    }
    total
}

fn luxemburg_from_samples(values: &[f64], exps: &[f64], weights: &[f64]) -> Result<f64> {
    if values.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let rho = |lambda: f64| modular_from_samples(values, exps, weights, 1.0 / lambda);

    // bracket [lo, hi] with rho(lo) >= 1 >= rho(hi), growing from lambda = 1
    let mut lo = 1.0;
    let mut hi = 1.0;
    let at_one = rho(1.0);
    if at_one > 1.0 {
        let mut grew = false;
        for _ in 0..MAX_BRACKET_DOUBLINGS {
            hi *= 2.0;
            if rho(hi) <= 1.0 {
                grew = true;
                break;
            }
        }
        if !grew {
            return Err(Error::Convergence(
                "luxemburg bracket not found after 200 doublings".into(),
            ));
        }
        lo = hi / 2.0;
    } else if at_one < 1.0 {
        let mut shrunk = false;
        for _ in 0..MAX_BRACKET_DOUBLINGS {
            lo /= 2.0;
            if rho(lo) >= 1.0 {
                shrunk = true;
                break;
            }
        }
        if !shrunk {
            return Err(Error::Convergence(
                "luxemburg bracket not found after 200 halvings".into(),
            ));
        }
        hi = lo * 2.0;
    } else {
        return Ok(1.0);
    }

    // the modular is strictly decreasing in lambda for nonzero u
    for _ in 0..200 {
        if hi - lo <= LUXEMBURG_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if rho(mid) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Luxemburg norm: inf of lambda > 0 with rho(u / lambda) <= 1, by bisection.
/// Returns 0 for the zero function.
pub fn luxemburg_norm(u: &GridFunction, p: &ExponentField) -> Result<f64> {
    let values = u.quad_values();
    let exps = exponent_at_quad(u, p);
    let weights = quad_weights(u);
    luxemburg_from_samples(&values, &exps, &weights)
}

/// Luxemburg norm of the gradient magnitude |Du|.
pub fn luxemburg_norm_of_gradient(u: &GridFunction, p: &ExponentField) -> Result<f64> {
    let mesh = u.mesh();
    let per = mesh.quad_per_element();
    let mut values = Vec::with_capacity(mesh.quad_data().len());
    for (idx, _) in mesh.quad_data().iter().enumerate() {
        let g = u.gradient(idx / per);
        values.push((g[0] * g[0] + g[1] * g[1]).sqrt());
    }
    let exps = exponent_at_quad(u, p);
    let weights = quad_weights(u);
    luxemburg_from_samples(&values, &exps, &weights)
}

/// Norm of the zero-trace Sobolev space: |u|_p + |Du|_p.
pub fn sobolev_norm(u: &GridFunction, p: &ExponentField) -> Result<f64> {
    Ok(luxemburg_norm(u, p)? + luxemburg_norm_of_gradient(u, p)?)
}

/// Holder pairing: returns (|integral of u v|, C |u|_p |v|_p') with
/// C = 1/p^- + 1/p'^- and p' the pointwise conjugate field. The inequality
/// lhs <= rhs is the caller's assertion.
pub fn holder_pairing(u: &GridFunction, v: &GridFunction, p: &ExponentField) -> Result<(f64, f64)> {
    assert!(
        std::sync::Arc::ptr_eq(u.mesh(), v.mesh()),
        "holder_pairing needs functions on the same mesh"
    );
    let uq = u.quad_values();
    let vq = v.quad_values();
    let weights = quad_weights(u);
    let mut pairing = 0.0;
    for ((a, b), w) in uq.iter().zip(&vq).zip(&weights) {
        pairing += w * a * b;
    }
    let dual = p.conjugate_field();
    let factor = 1.0 / p.p_minus() + 1.0 / conjugate(p.p_plus())?;
    let rhs = factor * luxemburg_norm(u, p)? * luxemburg_norm(v, &dual)?;
    Ok((pairing.abs(), rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponent::Domain;
    use crate::mesh::Mesh;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn unit() -> Domain {
        Domain::interval(0.0, 1.0).unwrap()
    }

    /// Exact integral of |u|^2 for piecewise-linear u via per-element Simpson
    /// (the integrand is quadratic per element).
    fn exact_square_integral(u: &GridFunction) -> f64 {
        let mesh = u.mesh();
        let n = mesh.n_elements();
        let mut total = 0.0;
        for e in 0..n {
            let a = u.node_value(e);
            let b = u.node_value(e + 1);
            let h = 1.0 / n as f64;
            let mid = 0.5 * (a + b);
            total += h / 6.0 * (a * a + 4.0 * mid * mid + b * b);
        }
        total
    }

    #[test]
    fn modular_of_parabola_matches_beta_integral() {
        let mesh = Mesh::interval(0.0, 1.0, 256).unwrap();
        let p2 = ExponentField::constant(unit(), 2.0).unwrap();
        let u = mesh.interpolate(|q| q[0] * (1.0 - q[0])).unwrap();
        let m = modular(&u, &p2);
        // quadrature is exact for the discrete interpolant
        assert_relative_eq!(m, exact_square_integral(&u), epsilon = 1e-14);
        // and within interpolation error of the smooth closed form 1/30
        assert!((m - 1.0 / 30.0).abs() < 1e-5);
    }

    #[test]
    fn modular_of_zero_is_zero() {
        let mesh = Mesh::interval(0.0, 1.0, 16).unwrap();
        let p2 = ExponentField::constant(unit(), 2.0).unwrap();
        assert_eq!(modular(&GridFunction::zero(&mesh), &p2), 0.0);
    }

    #[test]
    fn modular_variable_exponent_against_dense_oracle() {
        use std::f64::consts::PI;
        let mesh = Mesh::interval(0.0, 1.0, 256).unwrap();
        let p = ExponentField::new(unit(), |q| 2.0 + q[0]).unwrap();
        let u = mesh.interpolate(|q| (PI * q[0]).sin()).unwrap();
        let m = modular(&u, &p);

        // dense composite-midpoint oracle on the same piecewise-linear function
        let cells = 1_000_000usize;
        let h = 1.0 / cells as f64;
        let mut oracle = 0.0;
        for k in 0..cells {
            let x = (k as f64 + 0.5) * h;
            let e = ((x * 256.0) as usize).min(255);
            let (xl, xr) = (e as f64 / 256.0, (e + 1) as f64 / 256.0);
            let t = (x - xl) / (xr - xl);
            let v = (1.0 - t) * u.node_value(e) + t * u.node_value(e + 1);
            oracle += h * v.abs().powf(2.0 + x);
        }
        assert!((m - oracle).abs() < 1e-6, "m = {m}, oracle = {oracle}");
    }

    #[test]
    fn luxemburg_norm_constant_exponent_is_lp_norm() {
        let mesh = Mesh::interval(0.0, 1.0, 256).unwrap();
        let p2 = ExponentField::constant(unit(), 2.0).unwrap();
        let u = mesh.interpolate(|q| q[0] * (1.0 - q[0])).unwrap();
        let n = luxemburg_norm(&u, &p2).unwrap();
        assert_relative_eq!(n, modular(&u, &p2).sqrt(), epsilon = 1e-8);
        assert!((n - (1.0f64 / 30.0).sqrt()).abs() < 1e-4);
        assert_eq!(
            luxemburg_norm(&GridFunction::zero(&mesh), &p2).unwrap(),
            0.0
        );
    }

    #[test]
    fn luxemburg_norm_solves_defining_equation() {
        use std::f64::consts::PI;
        let mesh = Mesh::interval(0.0, 1.0, 128).unwrap();
        let p = ExponentField::new(unit(), |q| 2.0 + q[0]).unwrap();
        let u = mesh.interpolate(|q| (PI * q[0]).sin()).unwrap();
        let n = luxemburg_norm(&u, &p).unwrap();
        let res = modular(&u.scaled(1.0 / n), &p);
        assert!((res - 1.0).abs() < 1e-8, "rho(u/norm) = {res}");

        // independent dense scan for the crossing of rho(u/l) = 1
        let mut lo = n / 2.0;
        let mut hi = n * 2.0;
        for _ in 0..4 {
            let mut best = (f64::INFINITY, lo);
            let steps = 1000;
            for k in 0..=steps {
                let l = lo + (hi - lo) * k as f64 / steps as f64;
                let gap = (modular(&u.scaled(1.0 / l), &p) - 1.0).abs();
                if gap < best.0 {
                    best = (gap, l);
                }
            }
            let w = (hi - lo) / steps as f64;
            lo = best.1 - w;
            hi = best.1 + w;
        }
        let scan = 0.5 * (lo + hi);
        assert!((n - scan).abs() < 1e-8, "bisection {n} vs scan {scan}");
    }

    #[test]
    fn luxemburg_norm_absolute_homogeneity() {
        let mesh = Mesh::interval(0.0, 1.0, 64).unwrap();
        let p = ExponentField::new(unit(), |q| 2.0 + q[0]).unwrap();
        let u = mesh.interpolate(|q| (3.0 * q[0]).sin() + 0.5).unwrap();
        let base = luxemburg_norm(&u, &p).unwrap();
        for t in [-2.0, 0.5, 10.0] {
            let n = luxemburg_norm(&u.scaled(t), &p).unwrap();
            assert!(
                (n - t.abs() * base).abs() <= 1e-8 * (1.0 + t.abs() * base),
                "t = {t}: {n} vs {}",
                t.abs() * base
            );
        }
    }

    #[test]
    fn unit_ball_equivalences_on_random_functions() {
        let mesh = Mesh::interval(0.0, 1.0, 256).unwrap();
        let p = ExponentField::new(unit(), |q| 2.0 + q[0]).unwrap();
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..50 {
            let scale: f64 = rng.random_range(0.05..5.0);
            let vals: Vec<f64> = (0..mesh.n_interior())
                .map(|_| rng.random_range(-1.0..1.0) * scale)
                .collect();
            let u = GridFunction::from_values(&mesh, vals).unwrap();
            let n = luxemburg_norm(&u, &p).unwrap();
            let m = modular(&u, &p);
            if (n - 1.0).abs() > 1e-8 {
                assert_eq!(n < 1.0, m < 1.0, "norm {n} modular {m}");
                assert_eq!(n > 1.0, m > 1.0, "norm {n} modular {m}");
            } else {
                assert!((m - 1.0).abs() < 1e-7);
            }
            // power sandwich between p- and p+
            let (pm, pp) = (p.p_minus(), p.p_plus());
            if n > 1.0 + 1e-10 {
                assert!(n.powf(pm) <= m * (1.0 + 1e-8) && m <= n.powf(pp) * (1.0 + 1e-8));
            } else if n > 0.0 && n < 1.0 - 1e-10 {
                assert!(n.powf(pm) >= m * (1.0 - 1e-8) && m >= n.powf(pp) * (1.0 - 1e-8));
            }
        }
    }

    #[test]
    fn norm_and_modular_convergence_are_equivalent() {
        let mesh = Mesh::interval(0.0, 1.0, 64).unwrap();
        let p = ExponentField::new(unit(), |q| 2.0 + q[0]).unwrap();
        let u = mesh.interpolate(|q| (2.0 * q[0]).cos() - 0.3).unwrap();
        let v = mesh.interpolate(|q| q[0] * (1.0 - q[0]) * 7.0).unwrap();
        let mut norms = Vec::new();
        let mut modulars = Vec::new();
        for k in 0..12 {
            let mut uk = u.clone();
            uk.axpy(0.5f64.powi(k), &v); // u_k -> u nodally
            let mut diff = uk;
            diff.axpy(-1.0, &u);
            norms.push(luxemburg_norm(&diff, &p).unwrap());
            modulars.push(modular(&diff, &p));
        }
        for w in norms.windows(2) {
            assert!(w[1] < w[0] || w[1] == 0.0);
        }
        for w in modulars.windows(2) {
            assert!(w[1] < w[0] || w[1] == 0.0);
        }
        // both vanish together along the sequence
        assert!(norms.last().unwrap() < &1e-3);
        assert!(modulars.last().unwrap() < &1e-6);
    }

    #[test]
    fn holder_pairing_examples() {
        let mesh = Mesh::interval(0.0, 1.0, 256).unwrap();
        let p2 = ExponentField::constant(unit(), 2.0).unwrap();
        let u = mesh.interpolate(|q| q[0] * (1.0 - q[0])).unwrap();
        let (lhs, rhs) = holder_pairing(&u, &u, &p2).unwrap();
        // constant p = 2: the factor 1/p- + 1/p'- is exactly 1, so pairing
        // u with itself is the Cauchy-Schwarz equality case
        assert_relative_eq!(rhs, lhs, epsilon = 1e-7);
        assert!((lhs - 1.0 / 30.0).abs() < 1e-5);
        assert!(lhs <= rhs * (1.0 + 1e-9));

        let zero = GridFunction::zero(&mesh);
        let (l0, r0) = holder_pairing(&zero, &u, &p2).unwrap();
        assert_eq!(l0, 0.0);
        assert!(l0 <= r0);
    }

    #[test]
    fn holder_inequality_on_random_pairs() {
        let mesh = Mesh::interval(0.0, 1.0, 64).unwrap();
        let p = ExponentField::new(unit(), |q| 2.0 + q[0]).unwrap();
        let mut rng = StdRng::seed_from_u64(42);
        for _ in 0..100 {
            let mk = |rng: &mut StdRng| {
                let vals: Vec<f64> = (0..mesh.n_interior())
                    .map(|_| rng.random_range(-2.0..2.0))
                    .collect();
                GridFunction::from_values(&mesh, vals).unwrap()
            };
            let u = mk(&mut rng);
            let v = mk(&mut rng);
            let (lhs, rhs) = holder_pairing(&u, &v, &p).unwrap();
            assert!(lhs <= rhs * (1.0 + 1e-9), "lhs {lhs} rhs {rhs}");
        }
    }
}
