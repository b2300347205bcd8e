//! Variable exponents p(x) on a domain and the structural ordering /
//! subcriticality checks they must satisfy.

use crate::error::{Error, Result};
use crate::report::ValidationReport;
use std::fmt;
use std::sync::Arc;

/// A point in the domain; `point[1]` is unused (zero) in one dimension.
pub type Point = [f64; 2];

/// Margin by which every exponent must stay above 1.
pub const EXPONENT_MARGIN: f64 = 1e-9;

/// Default number of sample points per axis used to estimate sup/inf of a field.
pub const DEFAULT_BOUND_SAMPLES: usize = 1001;

/// Bounded interval or axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Rectangle { x: (f64, f64), y: (f64, f64) },
}

impl Domain {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::Domain(format!(
                "interval bounds must be finite with a < b (got [{a}, {b}])"
            )));
        }
        Ok(Domain::Interval { a, b })
    }

    pub fn rectangle(ax: f64, bx: f64, ay: f64, by: f64) -> Result<Self> {
        for (lo, hi, axis) in [(ax, bx, "x"), (ay, by, "y")] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Domain(format!(
                    "rectangle {axis}-bounds must be finite with a < b (got [{lo}, {hi}])"
                )));
            }
        }
        Ok(Domain::Rectangle {
            x: (ax, bx),
            y: (ay, by),
        })
    }

    pub fn dimension(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Rectangle { .. } => 2,
        }
    }

    pub fn measure(&self) -> f64 {
        match self {
            Domain::Interval { a, b } => b - a,
            Domain::Rectangle { x, y } => (x.1 - x.0) * (y.1 - y.0),
        }
    }

    /// Uniform sample points including the corners, `samples` per axis.
    pub fn sample_points(&self, samples: usize) -> Vec<Point> {
        debug_assert!(samples >= 2);
        match *self {
            Domain::Interval { a, b } => (0..samples)
                .map(|i| {
                    let t = i as f64 / (samples - 1) as f64;
                    [a + t * (b - a), 0.0]
                })
                .collect(),
            Domain::Rectangle { x, y } => {
                let mut pts = Vec::with_capacity(samples * samples);
                for j in 0..samples {
                    let ty = j as f64 / (samples - 1) as f64;
                    for i in 0..samples {
                        let tx = i as f64 / (samples - 1) as f64;
                        pts.push([x.0 + tx * (x.1 - x.0), y.0 + ty * (y.1 - y.0)]);
                    }
                }
                pts
            }
        }
    }
}

/// Continuous exponent function on a domain with cached sampled bounds.
///
/// Construction scans a uniform grid (corners included), rejects fields that
/// produce non-finite values or dip to 1 or below, and caches the observed
/// infimum/supremum. Sampling cannot certify continuity on the closure; that
/// remains an assumption on the supplied evaluator.
#[derive(Clone)]
pub struct ExponentField {
    domain: Domain,
    eval: Arc<dyn Fn(Point) -> f64 + Send + Sync>,
    p_minus: f64,
    p_plus: f64,
    samples: usize,
}

impl fmt::Debug for ExponentField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExponentField")
            .field("domain", &self.domain)
            .field("p_minus", &self.p_minus)
            .field("p_plus", &self.p_plus)
            .field("samples", &self.samples)
            .finish()
    }
}

impl ExponentField {
    /// Build a field from an evaluator, sampling bounds on the default grid.
    pub fn new(
        domain: Domain,
        eval: impl Fn(Point) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::with_samples(domain, eval, DEFAULT_BOUND_SAMPLES)
    }

    /// Build a field with an explicit per-axis sample count for the bound scan.
    pub fn with_samples(
        domain: Domain,
        eval: impl Fn(Point) -> f64 + Send + Sync + 'static,
        samples: usize,
    ) -> Result<Self> {
        let eval: Arc<dyn Fn(Point) -> f64 + Send + Sync> = Arc::new(eval);
        let (p_minus, p_plus) = scan_bounds(&domain, eval.as_ref(), samples)?;
        if p_minus <= 1.0 + EXPONENT_MARGIN {
            return Err(Error::Domain(format!(
                "exponent field must stay above 1 (sampled infimum {p_minus})"
            )));
        }
        Ok(Self {
            domain,
            eval,
            p_minus,
            p_plus,
            samples,
        })
    }

    /// Constant field p(x) = value.
    pub fn constant(domain: Domain, value: f64) -> Result<Self> {
        // bounds of a constant need no dense scan
        if !value.is_finite() {
            return Err(Error::NonFiniteExponent { x: 0.0, y: 0.0 });
        }
        if value <= 1.0 + EXPONENT_MARGIN {
            return Err(Error::Domain(format!(
                "constant exponent must exceed 1 (got {value})"
            )));
        }
        Ok(Self {
            domain,
            eval: Arc::new(move |_| value),
            p_minus: value,
            p_plus: value,
            samples: 2,
        })
    }

    /// Internal constructor for fields whose bounds are known analytically.
    pub(crate) fn from_parts(
        domain: Domain,
        eval: Arc<dyn Fn(Point) -> f64 + Send + Sync>,
        p_minus: f64,
        p_plus: f64,
    ) -> Self {
        Self {
            domain,
            eval,
            p_minus,
            p_plus,
            samples: 0,
        }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn value(&self, point: Point) -> f64 {
        (self.eval)(point)
    }

    /// Cached sampled infimum.
    pub fn p_minus(&self) -> f64 {
        self.p_minus
    }

    /// Cached sampled supremum.
    pub fn p_plus(&self) -> f64 {
        self.p_plus
    }

    /// Re-scan min/max of the evaluator over a `samples`-per-axis uniform grid
    /// including the corners. The cached values from construction are not
    /// modified; this exists for refinement studies.
    pub fn bounds(&self, samples: usize) -> Result<(f64, f64)> {
        if samples < 2 {
            return Err(Error::Precondition(
                "bound scan needs at least 2 samples per axis".into(),
            ));
        }
        scan_bounds(&self.domain, self.eval.as_ref(), samples)
    }

    /// Pointwise conjugate field p'(x) = p(x)/(p(x) - 1).
    ///
    /// The conjugate is decreasing in p, so the bounds swap through the formula
    /// and no re-sampling is needed.
    pub fn conjugate_field(&self) -> ExponentField {
        let inner = Arc::clone(&self.eval);
        let eval: Arc<dyn Fn(Point) -> f64 + Send + Sync> = Arc::new(move |p: Point| {
            let v = inner(p);
            v / (v - 1.0)
        });
        let p_minus = self.p_plus / (self.p_plus - 1.0);
        let p_plus = self.p_minus / (self.p_minus - 1.0);
        ExponentField::from_parts(self.domain, eval, p_minus, p_plus)
    }
}

fn scan_bounds(
    domain: &Domain,
    eval: &(dyn Fn(Point) -> f64 + Send + Sync),
    samples: usize,
) -> Result<(f64, f64)> {
    if samples < 2 {
        return Err(Error::Precondition(
            "bound scan needs at least 2 samples per axis".into(),
        ));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for point in domain.sample_points(samples) {
        let v = eval(point);
        if !v.is_finite() {
            return Err(Error::NonFiniteExponent {
                x: point[0],
                y: point[1],
            });
        }
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok((lo, hi))
}

/// Conjugate exponent: 1/p + 1/p' = 1.
pub fn conjugate(p_value: f64) -> Result<f64> {
    if p_value.is_nan() || p_value <= 1.0 {
        return Err(Error::Domain(format!(
            "conjugate exponent requires p > 1 (got {p_value})"
        )));
    }
    Ok(p_value / (p_value - 1.0))
}

/// Critical Sobolev exponent; infinite for p >= N.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CriticalExponent {
    Finite(f64),
    Infinite,
}

impl CriticalExponent {
    pub fn is_finite(&self) -> bool {
        matches!(self, CriticalExponent::Finite(_))
    }

    /// Finite value, or None for the infinite branch.
    pub fn finite(&self) -> Option<f64> {
        match self {
            CriticalExponent::Finite(v) => Some(*v),
            CriticalExponent::Infinite => None,
        }
    }
}

/// N p / (N - p) when p < N, infinite otherwise. Requires p > 1, N >= 1.
pub fn critical_exponent(p_value: f64, dimension: usize) -> CriticalExponent {
    debug_assert!(p_value > 1.0 && dimension >= 1);
    let n = dimension as f64;
    if p_value < n {
        CriticalExponent::Finite(n * p_value / (n - p_value))
    } else {
        CriticalExponent::Infinite
    }
}

/// Reaction-term powers r <= s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerPair {
    pub r: f64,
    pub s: f64,
}

impl PowerPair {
    pub fn new(r: f64, s: f64) -> Result<Self> {
        if !(r.is_finite() && s.is_finite() && r <= s) {
            return Err(Error::Domain(format!(
                "powers must be finite with r <= s (got r={r}, s={s})"
            )));
        }
        Ok(Self { r, s })
    }
}

/// Check the exponent ordering chain p1+ < r <= p3- <= p3+ <= s < p2- on the
/// cached sampled bounds; each inequality becomes one report entry.
pub fn validate_ordering(
    p1: &ExponentField,
    p2: &ExponentField,
    p3: &ExponentField,
    powers: PowerPair,
) -> ValidationReport {
    let mut report = ValidationReport::new();
    let (r, s) = (powers.r, powers.s);
    let entries: [(&str, bool, String); 5] = [
        (
            "p1+ < r",
            p1.p_plus() < r,
            format!("p1+ = {}, r = {}", p1.p_plus(), r),
        ),
        (
            "r <= p3-",
            r <= p3.p_minus(),
            format!("r = {}, p3- = {}", r, p3.p_minus()),
        ),
        (
            "p3- <= p3+",
            p3.p_minus() <= p3.p_plus(),
            format!("p3- = {}, p3+ = {}", p3.p_minus(), p3.p_plus()),
        ),
        (
            "p3+ <= s",
            p3.p_plus() <= s,
            format!("p3+ = {}, s = {}", p3.p_plus(), s),
        ),
        (
            "s < p2-",
            s < p2.p_minus(),
            format!("s = {}, p2- = {}", s, p2.p_minus()),
        ),
    ];
    for (name, ok, detail) in entries {
        let detail = if ok {
            detail
        } else {
            format!("{name} violated ({detail})")
        };
        report.push(name, ok, detail);
    }
    report
}

/// Subcriticality: min over a sample grid of p1*(x) - p2(x) must be positive.
///
/// Points where p1(x) >= N contribute an infinite gap and always pass.
pub fn validate_subcritical(p1: &ExponentField, p2: &ExponentField) -> ValidationReport {
    let mut report = ValidationReport::new();
    let dimension = p1.domain().dimension();
    let samples = match p1.domain() {
        Domain::Interval { .. } => DEFAULT_BOUND_SAMPLES,
        // keep the 2D scan around 10^6 points total
        Domain::Rectangle { .. } => DEFAULT_BOUND_SAMPLES,
    };
    let mut min_gap = f64::INFINITY;
    let mut all_infinite = true;
    let mut worst: Point = [f64::NAN, f64::NAN];
    for point in p1.domain().sample_points(samples) {
        match critical_exponent(p1.value(point), dimension) {
            CriticalExponent::Infinite => {}
            CriticalExponent::Finite(star) => {
                all_infinite = false;
                let gap = star - p2.value(point);
                if gap < min_gap {
                    min_gap = gap;
                    worst = point;
                }
            }
        }
    }
    if all_infinite {
        report.push(
            "min(p1* - p2) > 0",
            true,
            "p1 >= N everywhere sampled, so p1* is infinite",
        );
    } else {
        report.push(
            "min(p1* - p2) > 0",
            min_gap > 0.0,
            format!("min gap {} at ({}, {})", min_gap, worst[0], worst[1]),
        );
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit() -> Domain {
        Domain::interval(0.0, 1.0).unwrap()
    }

    fn square() -> Domain {
        Domain::rectangle(0.0, 1.0, 0.0, 1.0).unwrap()
    }

    #[test]
    fn domain_rejects_bad_bounds() {
        assert!(Domain::interval(1.0, 1.0).is_err());
        assert!(Domain::interval(2.0, 1.0).is_err());
        assert!(Domain::interval(f64::NAN, 1.0).is_err());
        assert!(Domain::rectangle(0.0, 1.0, 3.0, 2.0).is_err());
    }

    #[test]
    fn bounds_constant_field() {
        let p = ExponentField::with_samples(unit(), |_| 2.0, 16).unwrap();
        assert_eq!((p.p_minus(), p.p_plus()), (2.0, 2.0));
    }

    #[test]
    fn bounds_monotone_field_hits_endpoints() {
        let p = ExponentField::with_samples(unit(), |q| 2.0 + q[0], 16).unwrap();
        assert_eq!((p.p_minus(), p.p_plus()), (2.0, 3.0));
    }

    #[test]
    fn bounds_2d_sine_within_1e3_of_dense_scan() {
        use std::f64::consts::PI;
        let f = |q: Point| 2.0 + (PI * q[0]).sin() * (PI * q[1]).sin();
        let p = ExponentField::with_samples(square(), f, 101).unwrap();
        // dense oracle: ~10^6-point scan
        let (oracle_min, oracle_max) = p.bounds(1001).unwrap();
        assert!((p.p_minus() - oracle_min).abs() <= 1e-3);
        assert!((p.p_plus() - oracle_max).abs() <= 1e-3);
        assert_relative_eq!(oracle_min, 2.0, epsilon = 1e-9);
        assert_relative_eq!(oracle_max, 3.0, epsilon = 1e-9);
    }

    #[test]
    fn bounds_monotone_under_refinement() {
        let f = |q: Point| 2.0 + (3.0 * q[0]).sin().abs();
        let p = ExponentField::with_samples(unit(), f, 11).unwrap();
        let coarse = p.bounds(11).unwrap();
        // 2n-1 points nest the n-point grid
        let fine = p.bounds(21).unwrap();
        assert!(fine.0 <= coarse.0 && fine.1 >= coarse.1);
        // never beyond the true extrema of 2 + |sin 3x| on [0, 1]
        assert!(fine.0 >= 2.0 - 1e-15 && fine.1 <= 3.0 + 1e-15);
    }

    #[test]
    fn non_finite_evaluator_is_rejected() {
        let err = ExponentField::with_samples(unit(), |q| 2.0 / q[0], 16).unwrap_err();
        assert!(matches!(err, Error::NonFiniteExponent { .. }));
    }

    #[test]
    fn exponent_must_exceed_one() {
        assert!(ExponentField::with_samples(unit(), |_| 1.0, 4).is_err());
        assert!(ExponentField::with_samples(unit(), |q| 1.0 + q[0], 4).is_err());
        assert!(ExponentField::constant(unit(), 1.0).is_err());
    }

    #[test]
    fn conjugate_examples() {
        assert_eq!(conjugate(2.0).unwrap(), 2.0);
        assert_eq!(conjugate(3.0).unwrap(), 1.5);
        assert_eq!(conjugate(1.5).unwrap(), 3.0);
        assert!(conjugate(1.0).is_err());
        assert!(conjugate(0.5).is_err());
    }

    #[test]
    fn conjugate_is_an_involution() {
        let mut p = 1.01;
        while p < 100.0 {
            let back = conjugate(conjugate(p).unwrap()).unwrap();
            assert!((back - p).abs() <= 1e-12 * p.max(1.0), "p = {p}");
            p *= 1.17;
        }
    }

    #[test]
    fn critical_exponent_examples() {
        assert_eq!(critical_exponent(1.5, 2), CriticalExponent::Finite(6.0));
        assert_eq!(critical_exponent(2.0, 2), CriticalExponent::Infinite);
        assert_eq!(critical_exponent(2.0, 3), CriticalExponent::Finite(6.0));
    }

    #[test]
    fn critical_exponent_monotonicity() {
        // Np/(N-p) grows in p toward the blow-up at p = N and shrinks as the
        // dimension rises.
        for n in [2usize, 3] {
            let mut prev = 0.0;
            let mut p = 1.01;
            while p < n as f64 {
                let v = critical_exponent(p, n).finite().unwrap();
                assert!(v > prev, "p*({p}) = {v} not above {prev}");
                prev = v;
                p += 0.05;
            }
        }
        for p in [1.2, 1.5, 1.9] {
            let v2 = critical_exponent(p, 2).finite().unwrap();
            let v3 = critical_exponent(p, 3).finite().unwrap();
            assert!(v3 < v2);
        }
    }

    #[test]
    fn ordering_pass_and_boundary_failure() {
        let d = unit();
        let p1 = ExponentField::constant(d, 2.0).unwrap();
        let p2 = ExponentField::constant(d, 5.0).unwrap();
        let p3 = ExponentField::constant(d, 3.5).unwrap();
        let ok = validate_ordering(&p1, &p2, &p3, PowerPair::new(3.0, 4.0).unwrap());
        assert!(ok.passed(), "{ok}");

        // r = p1+ violates the strict first inequality
        let bad = validate_ordering(&p1, &p2, &p3, PowerPair::new(2.0, 4.0).unwrap());
        assert!(!bad.passed());
        let failure = bad.failures().next().unwrap();
        assert_eq!(failure.name, "p1+ < r");
        assert!(failure.detail.contains("violated"));
    }

    #[test]
    fn ordering_with_sampled_bounds() {
        let d = unit();
        let p1 = ExponentField::new(d, |q| 2.0 + q[0]).unwrap(); // p1+ = 3
        let p2 = ExponentField::constant(d, 5.0).unwrap();
        let p3 = ExponentField::constant(d, 3.5).unwrap();
        let report = validate_ordering(&p1, &p2, &p3, PowerPair::new(3.5, 4.0).unwrap());
        assert!(report.passed(), "{report}");
    }

    #[test]
    fn subcritical_cases() {
        let d1 = unit();
        let p1 = ExponentField::constant(d1, 2.0).unwrap();
        let p2 = ExponentField::constant(d1, 5.0).unwrap();
        assert!(validate_subcritical(&p1, &p2).passed()); // N = 1: p1* infinite

        let d2 = square();
        let q1 = ExponentField::constant(d2, 1.5).unwrap();
        let q2 = ExponentField::constant(d2, 5.0).unwrap();
        assert!(validate_subcritical(&q1, &q2).passed()); // p1* = 6 > 5

        let q3 = ExponentField::constant(d2, 6.0).unwrap();
        assert!(!validate_subcritical(&q1, &q3).passed()); // gap exactly 0
    }

    #[test]
    fn conjugate_field_bounds() {
        let p = ExponentField::new(unit(), |q| 2.0 + q[0]).unwrap();
        let dual = p.conjugate_field();
        assert_relative_eq!(dual.p_minus(), 1.5, epsilon = 1e-12);
        assert_relative_eq!(dual.p_plus(), 2.0, epsilon = 1e-12);
        assert_relative_eq!(dual.value([0.5, 0.0]), 2.5 / 1.5, epsilon = 1e-12);
    }
}
