//! Edge-wise smooth functions on a metric graph.
//!
//! A [`PiecewiseFunction`] assigns each edge a closed-form profile in the
//! edge-local coordinate `t in [0, length]`. Profiles carry exact values and
//! first/second derivatives, which is what the cutoff constructions, energy
//! quadrature, and the integration-by-parts residual need.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::{GraphPoint, MetricGraph};

/// Quintic smoothstep on `[0,1]`: value 0→1 with first and second
/// derivatives vanishing at both ends.
pub fn smoothstep(u: f64) -> f64 {
    u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
}

pub fn smoothstep_deriv(u: f64) -> f64 {
    30.0 * u * u * (1.0 - u) * (1.0 - u)
}

pub fn smoothstep_deriv2(u: f64) -> f64 {
    60.0 * u * (1.0 - u) * (1.0 - 2.0 * u)
}

/// Dirichlet energy of a unit smoothstep ramp over a unit interval:
/// `∫_0^1 (s')^2 du = 10/7`.
pub const SMOOTHSTEP_ENERGY: f64 = 10.0 / 7.0;

/// Closed-form profile of a function restricted to one edge.
#[derive(Debug, Clone)]
pub enum EdgeShape {
    Constant(f64),
    /// Linear between the endpoint values.
    Linear { v0: f64, v1: f64 },
    /// `v0 + (v1 - v0) * s(t/l)` with the quintic smoothstep `s`.
    Smoothstep { v0: f64, v1: f64 },
    /// Polynomial in the edge coordinate `t`, ascending coefficients.
    Poly(Vec<f64>),
    /// `offset + amplitude * sin(omega * t + phase)`.
    Sine { amplitude: f64, omega: f64, phase: f64, offset: f64 },
}

impl EdgeShape {
    pub fn value(&self, t: f64, len: f64) -> f64 {
        match self {
            EdgeShape::Constant(c) => *c,
            EdgeShape::Linear { v0, v1 } => v0 + (v1 - v0) * t / len,
            EdgeShape::Smoothstep { v0, v1 } => v0 + (v1 - v0) * smoothstep(t / len),
            EdgeShape::Poly(coeffs) => horner(coeffs, t),
            EdgeShape::Sine { amplitude, omega, phase, offset } => {
                offset + amplitude * (omega * t + phase).sin()
            }
        }
    }

    pub fn deriv(&self, t: f64, len: f64) -> f64 {
        match self {
            EdgeShape::Constant(_) => 0.0,
            EdgeShape::Linear { v0, v1 } => (v1 - v0) / len,
            EdgeShape::Smoothstep { v0, v1 } => (v1 - v0) * smoothstep_deriv(t / len) / len,
            EdgeShape::Poly(coeffs) => horner(&differentiate(coeffs), t),
            EdgeShape::Sine { amplitude, omega, phase, .. } => {
                amplitude * omega * (omega * t + phase).cos()
            }
        }
    }

    pub fn deriv2(&self, t: f64, len: f64) -> f64 {
        match self {
            EdgeShape::Constant(_) | EdgeShape::Linear { .. } => 0.0,
            EdgeShape::Smoothstep { v0, v1 } => (v1 - v0) * smoothstep_deriv2(t / len) / (len * len),
            EdgeShape::Poly(coeffs) => horner(&differentiate(&differentiate(coeffs)), t),
            EdgeShape::Sine { amplitude, omega, phase, .. } => {
                -amplitude * omega * omega * (omega * t + phase).sin()
            }
        }
    }

    /// Whether the profile is identically zero.
    pub fn is_zero(&self) -> bool {
        match self {
            EdgeShape::Constant(c) => *c == 0.0,
            EdgeShape::Linear { v0, v1 } | EdgeShape::Smoothstep { v0, v1 } => *v0 == 0.0 && *v1 == 0.0,
            EdgeShape::Poly(coeffs) => coeffs.iter().all(|&c| c == 0.0),
            EdgeShape::Sine { amplitude, offset, .. } => *amplitude == 0.0 && *offset == 0.0,
        }
    }

    /// Cubic Hermite profile with prescribed endpoint values and derivatives.
    pub fn hermite(len: f64, v0: f64, d0: f64, v1: f64, d1: f64) -> EdgeShape {
        let l = len;
        let a = v0;
        let b = d0;
        let c = (3.0 * (v1 - v0) - (2.0 * d0 + d1) * l) / (l * l);
        let d = (2.0 * (v0 - v1) + (d0 + d1) * l) / (l * l * l);
        EdgeShape::Poly(vec![a, b, c, d])
    }
}

fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

fn differentiate(coeffs: &[f64]) -> Vec<f64> {
    coeffs.iter().enumerate().skip(1).map(|(k, &c)| k as f64 * c).collect()
}

/// A function given edge by edge on a metric graph.
#[derive(Debug, Clone)]
pub struct PiecewiseFunction {
    graph: Arc<MetricGraph>,
    shapes: Vec<EdgeShape>,
}

impl PiecewiseFunction {
    pub fn new(graph: Arc<MetricGraph>, shapes: Vec<EdgeShape>) -> Result<Self> {
        if shapes.len() != graph.edge_count() {
            return Err(Error::DimensionMismatch { expected: graph.edge_count(), got: shapes.len() });
        }
        Ok(PiecewiseFunction { graph, shapes })
    }

    pub fn zero(graph: Arc<MetricGraph>) -> Self {
        let shapes = vec![EdgeShape::Constant(0.0); graph.edge_count()];
        PiecewiseFunction { graph, shapes }
    }

    pub fn graph(&self) -> &Arc<MetricGraph> {
        &self.graph
    }

    pub fn shape(&self, e: usize) -> &EdgeShape {
        &self.shapes[e]
    }

    pub fn set_shape(&mut self, e: usize, shape: EdgeShape) {
        self.shapes[e] = shape;
    }

    pub fn value_at(&self, p: GraphPoint) -> Result<f64> {
        self.graph.check_point(p)?;
        Ok(self.shapes[p.edge].value(p.offset, self.graph.edge(p.edge).length))
    }

    /// Value at a vertex as seen from one incident edge.
    pub fn vertex_value_via(&self, v: usize, e: usize) -> f64 {
        let ed = self.graph.edge(e);
        let t = if ed.tail == v { 0.0 } else { ed.length };
        self.shapes[e].value(t, ed.length)
    }

    /// Value at a vertex via its first incident edge.
    pub fn vertex_value(&self, v: usize) -> f64 {
        let e = self.graph.incident(v)[0];
        self.vertex_value_via(v, e)
    }

    /// Largest mismatch of vertex values across incident edges; zero for a
    /// continuous function.
    pub fn continuity_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for v in 0..self.graph.vertex_count() {
            let edges = self.graph.incident(v);
            if edges.len() < 2 {
                continue;
            }
            let base = self.vertex_value_via(v, edges[0]);
            for &e in &edges[1..] {
                worst = worst.max((self.vertex_value_via(v, e) - base).abs());
            }
        }
        worst
    }

    /// Outward derivative of the profile on `e` at vertex `v` (pointing from
    /// `v` into the edge).
    pub fn outward_derivative(&self, v: usize, e: usize) -> f64 {
        let ed = self.graph.edge(e);
        if ed.tail == v {
            self.shapes[e].deriv(0.0, ed.length)
        } else {
            -self.shapes[e].deriv(ed.length, ed.length)
        }
    }

    /// Sum of outward derivatives over the edges at `v`.
    pub fn kirchhoff_residual(&self, v: usize) -> f64 {
        self.graph
            .incident(v)
            .iter()
            .map(|&e| {
                let ed = self.graph.edge(e);
                if ed.tail == ed.head {
                    self.shapes[e].deriv(0.0, ed.length) - self.shapes[e].deriv(ed.length, ed.length)
                } else {
                    self.outward_derivative(v, e)
                }
            })
            .sum()
    }

    /// Edges on which the profile is not identically zero.
    pub fn support_edges(&self) -> Vec<usize> {
        (0..self.shapes.len()).filter(|&e| !self.shapes[e].is_zero()).collect()
    }

    /// Dirichlet energy `∫ (f')^2`; ramps and linear pieces in closed form,
    /// everything else by adaptive quadrature.
    pub fn dirichlet_energy(&self, tol: f64) -> f64 {
        let mut total = 0.0;
        for (e, shape) in self.shapes.iter().enumerate() {
            let len = self.graph.edge(e).length;
            match shape {
                EdgeShape::Constant(_) => {}
                EdgeShape::Linear { v0, v1 } => total += (v1 - v0) * (v1 - v0) / len,
                EdgeShape::Smoothstep { v0, v1 } => {
                    total += (v1 - v0) * (v1 - v0) / len * SMOOTHSTEP_ENERGY
                }
                _ => {
                    total += adaptive_simpson(&|t| shape.deriv(t, len).powi(2), 0.0, len, tol);
                }
            }
        }
        total
    }

    /// `∫ f' g'` over the whole graph by adaptive quadrature.
    pub fn deriv_inner(&self, other: &PiecewiseFunction, tol: f64) -> Result<f64> {
        if !Arc::ptr_eq(&self.graph, &other.graph) {
            return Err(Error::GraphMismatch);
        }
        let mut total = 0.0;
        for e in 0..self.shapes.len() {
            if matches!(self.shapes[e], EdgeShape::Constant(_))
                || matches!(other.shapes[e], EdgeShape::Constant(_))
            {
                continue;
            }
            let len = self.graph.edge(e).length;
            total += adaptive_simpson(
                &|t| self.shapes[e].deriv(t, len) * other.shapes[e].deriv(t, len),
                0.0,
                len,
                tol,
            );
        }
        Ok(total)
    }

    /// Linear combination of functions whose edge profiles all lie in the
    /// constant/smoothstep family (as cutoffs do).
    pub fn combine_ramps(terms: &[(f64, &PiecewiseFunction)]) -> Result<PiecewiseFunction> {
        let graph = Arc::clone(&terms.first().ok_or(Error::GraphMismatch)?.1.graph);
        let mut shapes = Vec::with_capacity(graph.edge_count());
        for e in 0..graph.edge_count() {
            let mut v0 = 0.0;
            let mut v1 = 0.0;
            for (c, f) in terms {
                if !Arc::ptr_eq(&graph, &f.graph) {
                    return Err(Error::GraphMismatch);
                }
                match &f.shapes[e] {
                    EdgeShape::Constant(a) => {
                        v0 += c * a;
                        v1 += c * a;
                    }
                    EdgeShape::Smoothstep { v0: a, v1: b } => {
                        v0 += c * a;
                        v1 += c * b;
                    }
                    other => {
                        return Err(Error::Numerical(format!(
                            "combine_ramps expects constant or smoothstep profiles, found {other:?}"
                        )))
                    }
                }
            }
            shapes.push(if v0 == v1 {
                EdgeShape::Constant(v0)
            } else {
                EdgeShape::Smoothstep { v0, v1 }
            });
        }
        Ok(PiecewiseFunction { graph, shapes })
    }
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)
                + recurse(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 40)
}
