//! Uniform meshes, piecewise-linear zero-trace elements, and quadrature.
//!
//! 1D domains are split into equal segments; 2D rectangles into a uniform
//! grid of cells, each cut along the lower-left/upper-right diagonal into two
//! triangles. Shape functions are linear, so gradients are constant per
//! element. Homogeneous Dirichlet data is imposed by construction: boundary
//! nodes carry no unknowns.

use crate::error::{Error, Result};
use crate::exponent::{Domain, Point};
use std::sync::Arc;

/// Quadrature rule in reference coordinates (segment [0,1] or the unit
/// triangle). Weights are positive and sum to the reference measure.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// n-point Gauss-Legendre rule on the reference segment [0, 1].
    pub fn gauss_segment(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        QuadratureRule {
            points: nodes.iter().map(|&x| [(x + 1.0) / 2.0, 0.0]).collect(),
            weights: weights.iter().map(|&w| w / 2.0).collect(),
        }
    }

    /// Degree-2 midpoint rule on the reference triangle (0,0)-(1,0)-(0,1).
    pub fn triangle_midpoint() -> Self {
        QuadratureRule {
            points: vec![[0.5, 0.0], [0.5, 0.5], [0.0, 0.5]],
            weights: vec![1.0 / 6.0; 3],
        }
    }
}

/// Nodes and roots for the n-point Gauss-Legendre rule on [-1, 1].
///
/// Roots of the Legendre polynomial found by Newton iteration from the
/// Chebyshev initial guess; accurate to machine precision for moderate n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x.abs();
        nodes[n - 1 - i] = x.abs();
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[derive(Debug, Clone)]
pub(crate) struct ElementData {
    /// Global node ids; the third entry is unused for segments.
    pub nodes: [usize; 3],
    /// Interior unknown index per local node, None on the boundary.
    pub interior: [Option<usize>; 3],
    /// Constant shape-function gradients.
    pub grads: [[f64; 2]; 3],
    pub measure: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct QuadPointData {
    pub x: Point,
    /// Physical weight (reference weight times Jacobian).
    pub weight: f64,
    /// Shape-function values of the element's local nodes at this point.
    pub shape: [f64; 3],
}

/// Uniform mesh over an interval or rectangle with precomputed element and
/// quadrature tables. Immutable after construction.
#[derive(Debug)]
pub struct Mesh {
    domain: Domain,
    elems_per_axis: (usize, usize),
    nodes: Vec<Point>,
    elements: Vec<ElementData>,
    interior_of_node: Vec<Option<usize>>,
    node_of_interior: Vec<usize>,
    rule: QuadratureRule,
    quad: Vec<QuadPointData>,
    nodes_per_element: usize,
}

impl Mesh {
    /// Segment mesh with the default 4-point Gauss rule per element.
    pub fn interval(a: f64, b: f64, elements: usize) -> Result<Arc<Self>> {
        Self::interval_with_rule(a, b, elements, QuadratureRule::gauss_segment(4))
    }

    pub fn interval_with_rule(
        a: f64,
        b: f64,
        elements: usize,
        rule: QuadratureRule,
    ) -> Result<Arc<Self>> {
        let domain = Domain::interval(a, b)?;
        if elements < 2 {
            return Err(Error::Domain(format!(
                "need at least 2 elements per axis (got {elements})"
            )));
        }
        let h = (b - a) / elements as f64;
        let nodes: Vec<Point> = (0..=elements).map(|i| [a + i as f64 * h, 0.0]).collect();
        let interior_of_node: Vec<Option<usize>> = (0..=elements)
            .map(|i| {
                if i == 0 || i == elements {
                    None
                } else {
                    Some(i - 1)
                }
            })
            .collect();
        let node_of_interior: Vec<usize> = (1..elements).collect();
        let mut elems = Vec::with_capacity(elements);
        for e in 0..elements {
            elems.push(ElementData {
                nodes: [e, e + 1, usize::MAX],
                interior: [interior_of_node[e], interior_of_node[e + 1], None],
                grads: [[-1.0 / h, 0.0], [1.0 / h, 0.0], [0.0, 0.0]],
                measure: h,
            });
        }
        let mut quad = Vec::with_capacity(elements * rule.points.len());
        for e in 0..elements {
            let xl = nodes[e][0];
            for (pt, &w) in rule.points.iter().zip(&rule.weights) {
                let xi = pt[0];
                quad.push(QuadPointData {
                    x: [xl + h * xi, 0.0],
                    weight: h * w,
                    shape: [1.0 - xi, xi, 0.0],
                });
            }
        }
        Ok(Arc::new(Mesh {
            domain,
            elems_per_axis: (elements, 0),
            nodes,
            elements: elems,
            interior_of_node,
            node_of_interior,
            rule,
            quad,
            nodes_per_element: 2,
        }))
    }

    /// Rectangle mesh (nx by ny cells, two triangles each) with the degree-2
    /// triangle rule.
    pub fn rectangle(
        ax: f64,
        bx: f64,
        ay: f64,
        by: f64,
        nx: usize,
        ny: usize,
    ) -> Result<Arc<Self>> {
        let domain = Domain::rectangle(ax, bx, ay, by)?;
        if nx < 2 || ny < 2 {
            return Err(Error::Domain(format!(
                "need at least 2 elements per axis (got {nx} x {ny})"
            )));
        }
        let rule = QuadratureRule::triangle_midpoint();
        let hx = (bx - ax) / nx as f64;
        let hy = (by - ay) / ny as f64;
        let node_id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push([ax + i as f64 * hx, ay + j as f64 * hy]);
            }
        }
        let mut interior_of_node = vec![None; nodes.len()];
        let mut node_of_interior = Vec::with_capacity((nx - 1) * (ny - 1));
        for j in 1..ny {
            for i in 1..nx {
                interior_of_node[node_id(i, j)] = Some(node_of_interior.len());
                node_of_interior.push(node_id(i, j));
            }
        }
        let mut elems = Vec::with_capacity(2 * nx * ny);
        let mut quad = Vec::with_capacity(2 * nx * ny * rule.points.len());
        for j in 0..ny {
            for i in 0..nx {
                let ll = node_id(i, j);
                let lr = node_id(i + 1, j);
                let ur = node_id(i + 1, j + 1);
                let ul = node_id(i, j + 1);
                // diagonal from lower-left to upper-right
                for tri in [[ll, lr, ur], [ll, ur, ul]] {
                    let v = [nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]];
                    let (grads, area) = triangle_gradients(v);
                    elems.push(ElementData {
                        nodes: tri,
                        interior: [
                            interior_of_node[tri[0]],
                            interior_of_node[tri[1]],
                            interior_of_node[tri[2]],
                        ],
                        grads,
                        measure: area,
                    });
                    for (pt, &w) in rule.points.iter().zip(&rule.weights) {
                        let (xi, eta) = (pt[0], pt[1]);
                        let shape = [1.0 - xi - eta, xi, eta];
                        let phys = [
                            shape[0] * v[0][0] + shape[1] * v[1][0] + shape[2] * v[2][0],
                            shape[0] * v[0][1] + shape[1] * v[1][1] + shape[2] * v[2][1],
                        ];
                        quad.push(QuadPointData {
                            x: phys,
                            weight: 2.0 * area * w,
                            shape,
                        });
                    }
                }
            }
        }
        Ok(Arc::new(Mesh {
            domain,
            elems_per_axis: (nx, ny),
            nodes,
            elements: elems,
            interior_of_node,
            node_of_interior,
            rule,
            quad,
            nodes_per_element: 3,
        }))
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn dimension(&self) -> usize {
        self.domain.dimension()
    }

    pub fn elements_per_axis(&self) -> (usize, usize) {
        self.elems_per_axis
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_interior(&self) -> usize {
        self.node_of_interior.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn node(&self, id: usize) -> Point {
        self.nodes[id]
    }

    pub fn interior_index(&self, node: usize) -> Option<usize> {
        self.interior_of_node[node]
    }

    pub fn interior_node(&self, k: usize) -> usize {
        self.node_of_interior[k]
    }

    /// Global node ids of an element (2 for segments, 3 for triangles).
    pub fn element_nodes(&self, element: usize) -> &[usize] {
        &self.elements[element].nodes[..self.nodes_per_element]
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub(crate) fn element_data(&self) -> &[ElementData] {
        &self.elements
    }

    pub(crate) fn quad_data(&self) -> &[QuadPointData] {
        &self.quad
    }

    pub(crate) fn quad_per_element(&self) -> usize {
        self.rule.points.len()
    }

    pub(crate) fn nodes_per_element(&self) -> usize {
        self.nodes_per_element
    }

    /// Interpolate a function at the interior nodes (zero trace on the
    /// boundary by construction).
    pub fn interpolate(self: &Arc<Self>, f: impl Fn(Point) -> f64) -> Result<GridFunction> {
        let mut values = Vec::with_capacity(self.n_interior());
        for &node in &self.node_of_interior {
            let v = f(self.nodes[node]);
            if !v.is_finite() {
                return Err(Error::NonFiniteValue {
                    element: node,
                    context: "interpolated nodal value".into(),
                });
            }
            values.push(v);
        }
        Ok(GridFunction {
            mesh: Arc::clone(self),
            values,
        })
    }

    /// Quadrature-weighted integral of `density(x, element)`; linear in the
    /// density and exact for polynomials up to the rule's degree.
    pub fn integrate(&self, density: impl Fn(Point, usize) -> f64) -> Result<f64> {
        let per = self.quad_per_element();
        let mut total = 0.0;
        for (idx, qp) in self.quad.iter().enumerate() {
            let element = idx / per;
            let v = density(qp.x, element);
            if !v.is_finite() {
                return Err(Error::NonFiniteValue {
                    element,
                    context: "integrand at quadrature point".into(),
                });
            }
            total += qp.weight * v;
        }
        Ok(total)
    }
}

fn triangle_gradients(v: [Point; 3]) -> ([[f64; 2]; 3], f64) {
    let det = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]);
    let area = det.abs() / 2.0;
    let d = det;
    let grads = [
        [(v[1][1] - v[2][1]) / d, (v[2][0] - v[1][0]) / d],
        [(v[2][1] - v[0][1]) / d, (v[0][0] - v[2][0]) / d],
        [(v[0][1] - v[1][1]) / d, (v[1][0] - v[0][0]) / d],
    ];
    (grads, area)
}

/// Piecewise-linear function with zero boundary trace: one value per interior
/// node, boundary values implicitly zero.
#[derive(Debug, Clone)]
pub struct GridFunction {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn zero(mesh: &Arc<Mesh>) -> Self {
        GridFunction {
            mesh: Arc::clone(mesh),
            values: vec![0.0; mesh.n_interior()],
        }
    }

    pub fn from_values(mesh: &Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_interior() {
            return Err(Error::Domain(format!(
                "value count {} does not match interior node count {}",
                values.len(),
                mesh.n_interior()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                element: k,
                context: "nodal value".into(),
            });
        }
        Ok(GridFunction {
            mesh: Arc::clone(mesh),
            values,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Nodal value by global node id (zero on the boundary).
    pub fn node_value(&self, node: usize) -> f64 {
        match self.mesh.interior_of_node[node] {
            Some(k) => self.values[k],
            None => 0.0,
        }
    }

    /// Constant gradient on an element.
    pub fn gradient(&self, element: usize) -> [f64; 2] {
        let data = &self.mesh.elements[element];
        let mut g = [0.0, 0.0];
        for a in 0..self.mesh.nodes_per_element {
            if let Some(k) = data.interior[a] {
                let u = self.values[k];
                g[0] += u * data.grads[a][0];
                g[1] += u * data.grads[a][1];
            }
        }
        g
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&mut self, t: f64) {
        for v in &mut self.values {
            *v *= t;
        }
    }

    pub fn scaled(&self, t: f64) -> Self {
        let mut out = self.clone();
        out.scale(t);
        out
    }

    /// self += alpha * other (same mesh).
    pub fn axpy(&mut self, alpha: f64, other: &GridFunction) {
        assert!(Arc::ptr_eq(&self.mesh, &other.mesh), "mesh mismatch");
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    /// Values of the function at every quadrature point, in mesh order.
    pub(crate) fn quad_values(&self) -> Vec<f64> {
        let per = self.mesh.quad_per_element();
        let nloc = self.mesh.nodes_per_element;
        let mut out = Vec::with_capacity(self.mesh.quad.len());
        for (e, data) in self.mesh.elements.iter().enumerate() {
            let mut local = [0.0; 3];
            for a in 0..nloc {
                local[a] = data.interior[a].map_or(0.0, |k| self.values[k]);
            }
            for qp in &self.mesh.quad[e * per..(e + 1) * per] {
                let mut v = 0.0;
                for a in 0..nloc {
                    v += local[a] * qp.shape[a];
                }
                out.push(v);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_matches_reference_values() {
        let (n2, w2) = gauss_legendre(2);
        assert_relative_eq!(n2[1], 1.0 / 3.0_f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(w2[0], 1.0, epsilon = 1e-15);
        let (n4, w4) = gauss_legendre(4);
        assert_relative_eq!(n4[3], 0.8611363115940526, epsilon = 1e-14);
        assert_relative_eq!(w4[3], 0.3478548451374538, epsilon = 1e-14);
        for n in [1, 2, 3, 4, 8, 16, 32] {
            let (nodes, weights) = gauss_legendre(n);
            assert_relative_eq!(weights.iter().sum::<f64>(), 2.0, epsilon = 1e-13);
            assert!(nodes.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn quadrature_weights_sum_to_reference_measure() {
        let seg = QuadratureRule::gauss_segment(4);
        assert!(seg.weights.iter().all(|&w| w > 0.0));
        assert_relative_eq!(seg.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
        let tri = QuadratureRule::triangle_midpoint();
        assert!(tri.weights.iter().all(|&w| w > 0.0));
        assert_relative_eq!(tri.weights.iter().sum::<f64>(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn interpolate_examples() {
        let mesh = Mesh::interval(0.0, 1.0, 4).unwrap();
        let zero = mesh.interpolate(|_| 0.0).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));

        let u = mesh.interpolate(|p| p[0] * (1.0 - p[0])).unwrap();
        assert_eq!(u.values(), &[0.1875, 0.25, 0.1875]);

        let one = mesh.interpolate(|_| 1.0).unwrap();
        assert!(one.values().iter().all(|&v| v == 1.0));
        assert_eq!(one.node_value(0), 0.0); // boundary forced to zero

        assert!(mesh.interpolate(|p| 1.0 / (p[0] - 0.25)).is_err());
    }

    #[test]
    fn gradient_of_linear_interpolant() {
        let mesh = Mesh::interval(0.0, 1.0, 8).unwrap();
        let u = mesh.interpolate(|p| p[0]).unwrap();
        // middle elements see the exact slope; end elements feel the boundary zeroing
        assert_relative_eq!(u.gradient(3)[0], 1.0, epsilon = 1e-13);
        assert_relative_eq!(u.gradient(4)[0], 1.0, epsilon = 1e-13);
        let z = GridFunction::zero(&mesh);
        assert_eq!(z.gradient(2), [0.0, 0.0]);
    }

    #[test]
    fn gradient_of_affine_function_is_exact_on_interior_elements() {
        let mesh = Mesh::rectangle(0.0, 1.0, 0.0, 1.0, 6, 6).unwrap();
        let u = mesh
            .interpolate(|p| 2.0 * p[0] - 3.0 * p[1] + 0.25)
            .unwrap();
        // elements whose nodes are all interior carry the exact slope
        for (e, data) in mesh.element_data().iter().enumerate() {
            if data.interior.iter().take(3).all(|k| k.is_some()) {
                let g = u.gradient(e);
                assert_relative_eq!(g[0], 2.0, epsilon = 1e-12);
                assert_relative_eq!(g[1], -3.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn gradient_2d_matches_analytic_in_central_element() {
        let mesh = Mesh::rectangle(0.0, 1.0, 0.0, 1.0, 8, 8).unwrap();
        let u = mesh
            .interpolate(|p| p[0] * (1.0 - p[0]) * p[1] * (1.0 - p[1]))
            .unwrap();
        // centroid of some central element
        let e = 2 * (3 * 8 + 3);
        let data = &mesh.element_data()[e];
        let c = [
            (mesh.node(data.nodes[0])[0]
                + mesh.node(data.nodes[1])[0]
                + mesh.node(data.nodes[2])[0])
                / 3.0,
            (mesh.node(data.nodes[0])[1]
                + mesh.node(data.nodes[1])[1]
                + mesh.node(data.nodes[2])[1])
                / 3.0,
        ];
        let grad = u.gradient(e);
        let exact = [
            (1.0 - 2.0 * c[0]) * c[1] * (1.0 - c[1]),
            c[0] * (1.0 - c[0]) * (1.0 - 2.0 * c[1]),
        ];
        let h = 1.0 / 8.0;
        assert!((grad[0] - exact[0]).abs() <= h);
        assert!((grad[1] - exact[1]).abs() <= h);
    }

    #[test]
    fn integrate_examples() {
        let mesh = Mesh::interval(0.0, 1.0, 16).unwrap();
        assert_relative_eq!(mesh.integrate(|_, _| 1.0).unwrap(), 1.0, epsilon = 1e-14);

        let two_point =
            Mesh::interval_with_rule(0.0, 1.0, 2, QuadratureRule::gauss_segment(2)).unwrap();
        assert_relative_eq!(
            two_point.integrate(|x, _| x[0] * x[0]).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-15
        );

        let fine = Mesh::interval(0.0, 1.0, 64).unwrap();
        assert_relative_eq!(
            fine.integrate(|x, _| (std::f64::consts::PI * x[0]).sin())
                .unwrap(),
            2.0 / std::f64::consts::PI,
            epsilon = 1e-10
        );

        assert!(mesh
            .integrate(|x, _| if x[0] < 0.5 { f64::NAN } else { 1.0 })
            .is_err());
    }

    #[test]
    fn integrate_2d_area_and_polynomials() {
        let mesh = Mesh::rectangle(0.0, 2.0, 0.0, 1.0, 8, 4).unwrap();
        assert_relative_eq!(mesh.integrate(|_, _| 1.0).unwrap(), 2.0, epsilon = 1e-13);
        // degree-2 rule integrates quadratics exactly
        assert_relative_eq!(
            mesh.integrate(|p, _| p[0] * p[1]).unwrap(),
            1.0,
            epsilon = 1e-13
        );
        assert_relative_eq!(
            mesh.integrate(|p, _| p[0] * p[0]).unwrap(),
            8.0 / 3.0,
            epsilon = 1e-13
        );
    }

    #[test]
    fn refinement_consistency_of_dirichlet_energy() {
        use std::f64::consts::PI;
        // reference: exact Dirichlet energy of sin(pi x) is pi^2 / 2
        let exact = PI * PI / 2.0;
        let mut errors = Vec::new();
        for n in [16usize, 32, 64] {
            let mesh = Mesh::interval(0.0, 1.0, n).unwrap();
            let u = mesh.interpolate(|p| (PI * p[0]).sin()).unwrap();
            let energy = mesh
                .integrate(|_, e| {
                    let g = u.gradient(e);
                    g[0] * g[0]
                })
                .unwrap();
            errors.push((energy - exact).abs());
        }
        let order01 = (errors[0] / errors[1]).log2();
        let order12 = (errors[1] / errors[2]).log2();
        assert!(
            order01 >= 1.0 && order12 >= 1.0,
            "orders {order01}, {order12}"
        );
    }

    #[test]
    fn interior_indexing_2d() {
        let mesh = Mesh::rectangle(0.0, 1.0, 0.0, 1.0, 4, 3).unwrap();
        assert_eq!(mesh.n_nodes(), 20);
        assert_eq!(mesh.n_interior(), 6);
        assert_eq!(mesh.n_elements(), 24);
        for node in 0..mesh.n_nodes() {
            let p = mesh.node(node);
            let on_boundary = p[0] == 0.0 || p[0] == 1.0 || p[1] == 0.0 || p[1] == 1.0;
            assert_eq!(mesh.interior_index(node).is_none(), on_boundary);
        }
    }
}
