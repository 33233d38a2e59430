//! Barnes-Hut style treecode for the velocity sums.
//!
//! Sources are organized in a quadtree; cells passing the opening criterion
//! `radius <= theta * dist` are evaluated through a complex multipole
//! expansion `Σ_j Γ_j/(w - z_j) = Σ_m a_m/(w - c)^{m+1}` about the cell
//! centroid, the rest descend to direct summation. A rigorous truncation
//! bound from the geometric tail is accumulated per target and reported.
//!
//! The periodic variant expands the periodized kernel instead: the far-field
//! coefficients `Σ_n 1/(v - 2πn)^{q+1}` are evaluated exactly through the
//! derivatives of `(1/2)cot(v/2)`, written as polynomials in `cot(v/2)`, so
//! no image truncation is involved. Blob kernels are smoothed only at close
//! range; far cells use the point-vortex expansion and the induced `δ²`
//! discrepancy joins the reported bound.

use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::TAU;
use thiserror::Error;

use crate::c64;
use crate::kernel::{closed_summand, periodic_summand, KernelError, KernelSpec};
use crate::sheet::{SheetState, Topology};

#[derive(Debug, Error)]
pub enum TreecodeError {
    #[error("invalid treecode parameters: {0}")]
    BadParams(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Opening criterion, leaf capacity, and expansion order.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TreecodeParams {
    pub theta: f64,
    pub max_leaf: usize,
    pub expansion_order: usize,
}

impl TreecodeParams {
    pub fn new(theta: f64, max_leaf: usize, expansion_order: usize) -> Result<Self, TreecodeError> {
        let p = TreecodeParams {
            theta,
            max_leaf,
            expansion_order,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), TreecodeError> {
        if !(self.theta >= 0.0 && self.theta < 1.0) {
            return Err(TreecodeError::BadParams(format!(
                "theta = {} must lie in [0, 1); theta = 0 forces direct summation",
                self.theta
            )));
        }
        if self.max_leaf < 1 {
            return Err(TreecodeError::BadParams("max_leaf must be >= 1".into()));
        }
        if self.expansion_order > 60 {
            return Err(TreecodeError::BadParams(format!(
                "expansion_order = {} too large (max 60)",
                self.expansion_order
            )));
        }
        Ok(())
    }

    /// Geometric tail factor `theta^(p+1) / (1 - theta)` of the multipole
    /// truncation at the opening criterion.
    pub fn truncation_factor(&self) -> f64 {
        self.theta.powi(self.expansion_order as i32 + 1) / (1.0 - self.theta)
    }
}

/// Treecode output: velocity samples plus the accumulated error bound.
#[derive(Clone, Debug)]
pub struct TreecodeEval {
    pub velocity: Vec<Complex64>,
    /// `theta^(p+1)/(1-theta)`, the per-cell geometric truncation factor.
    pub truncation_factor: f64,
    /// Rigorous bound on `max_i |v_i - v_i^direct|` accumulated during
    /// traversal (velocity units).
    pub error_bound: f64,
}

const NO_CHILD: usize = usize::MAX;

struct Node {
    begin: usize,
    end: usize,
    centroid: Complex64,
    radius: f64,
    abs_weight: f64,
    moments: Vec<Complex64>,
    children: [usize; 4],
    leaf: bool,
}

struct Tree {
    nodes: Vec<Node>,
    /// reordered slot -> original index
    order: Vec<usize>,
    points: Vec<Complex64>,
    weights: Vec<f64>,
}

impl Tree {
    fn build(points_in: &[Complex64], weights_in: &[f64], max_leaf: usize, p: usize) -> Tree {
        let n = points_in.len();
        let mut order: Vec<usize> = (0..n).collect();
        let mut points = points_in.to_vec();
        let mut weights = weights_in.to_vec();

        let mut lo = c64(f64::INFINITY, f64::INFINITY);
        let mut hi = c64(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for z in points_in {
            lo = c64(lo.re.min(z.re), lo.im.min(z.im));
            hi = c64(hi.re.max(z.re), hi.im.max(z.im));
        }
        let center = 0.5 * (lo + hi);
        let half = 0.5 * ((hi.re - lo.re).max(hi.im - lo.im)).max(1e-300);

        let mut tree = Tree {
            nodes: Vec::new(),
            order: Vec::new(),
            points: Vec::new(),
            weights: Vec::new(),
        };
        tree.subdivide(
            &mut points,
            &mut weights,
            &mut order,
            0,
            n,
            center,
            half,
            max_leaf,
            p,
            0,
        );
        tree.order = order;
        tree.points = points;
        tree.weights = weights;
        tree
    }

    #[allow(clippy::too_many_arguments)]
    fn subdivide(
        &mut self,
        points: &mut [Complex64],
        weights: &mut [f64],
        order: &mut [usize],
        begin: usize,
        end: usize,
        center: Complex64,
        half: f64,
        max_leaf: usize,
        p: usize,
        depth: usize,
    ) -> usize {
        let slice = &points[begin..end];
        let count = end - begin;
        let mut centroid = c64(0.0, 0.0);
        let mut total_w = 0.0;
        let mut abs_weight = 0.0;
        for (z, &w) in slice.iter().zip(&weights[begin..end]) {
            centroid += w * z;
            total_w += w;
            abs_weight += w.abs();
        }
        if total_w.abs() > 1e-300 {
            centroid /= total_w;
        } else if count > 0 {
            centroid = slice.iter().sum::<Complex64>() / count as f64;
        }
        let radius = slice
            .iter()
            .map(|z| (z - centroid).norm())
            .fold(0.0, f64::max);
        let mut moments = vec![c64(0.0, 0.0); p + 1];
        for (z, &w) in slice.iter().zip(&weights[begin..end]) {
            let zeta = z - centroid;
            let mut pw = c64(1.0, 0.0);
            for m in moments.iter_mut() {
                *m += w * pw;
                pw *= zeta;
            }
        }

        let id = self.nodes.len();
        self.nodes.push(Node {
            begin,
            end,
            centroid,
            radius,
            abs_weight,
            moments,
            children: [NO_CHILD; 4],
            leaf: true,
        });

        if count <= max_leaf || depth >= 48 || half < 1e-14 {
            return id;
        }

        // quadrant partition, stable and in fixed child order
        let quadrant = |z: &Complex64| -> usize {
            (if z.re > center.re { 1 } else { 0 }) + (if z.im > center.im { 2 } else { 0 })
        };
        let mut buckets: [Vec<(Complex64, f64, usize)>; 4] = Default::default();
        for i in begin..end {
            buckets[quadrant(&points[i])].push((points[i], weights[i], order[i]));
        }
        let mut cursor = begin;
        let mut ranges = [(0usize, 0usize); 4];
        for (q, bucket) in buckets.iter().enumerate() {
            let start = cursor;
            for &(z, w, o) in bucket {
                points[cursor] = z;
                weights[cursor] = w;
                order[cursor] = o;
                cursor += 1;
            }
            ranges[q] = (start, cursor);
        }

        let offsets = [
            c64(-0.5 * half, -0.5 * half),
            c64(0.5 * half, -0.5 * half),
            c64(-0.5 * half, 0.5 * half),
            c64(0.5 * half, 0.5 * half),
        ];
        let mut children = [NO_CHILD; 4];
        for q in 0..4 {
            let (s, e) = ranges[q];
            if e > s {
                children[q] = self.subdivide(
                    points,
                    weights,
                    order,
                    s,
                    e,
                    center + offsets[q],
                    0.5 * half,
                    max_leaf,
                    p,
                    depth + 1,
                );
            }
        }
        self.nodes[id].children = children;
        self.nodes[id].leaf = false;
        id
    }
}

/// Scaled cot-derivative polynomial tables: entry q holds the coefficients
/// (ascending powers of `c = cot(v/2)`) of
/// `Σ_n 1/(v - 2πn)^{q+1} = (-1)^q/(q! 2^{q+1}) d^q/dx^q cot(x) |_{x=v/2}`.
fn cot_coefficient_tables(p: usize) -> Vec<Vec<f64>> {
    let mut g: Vec<Vec<f64>> = Vec::with_capacity(p + 1);
    g.push(vec![0.0, 1.0]); // G_0 = c
    for q in 0..p {
        let prev = &g[q];
        // derivative in x: d/dx G(c) = G'(c) * (-(1 + c^2))
        let mut dg = vec![0.0; prev.len().max(2) - 1];
        for (k, &a) in prev.iter().enumerate().skip(1) {
            dg[k - 1] = a * k as f64;
        }
        let mut next = vec![0.0; prev.len() + 1];
        for (k, &a) in dg.iter().enumerate() {
            next[k] -= a;
            next[k + 2] -= a;
        }
        g.push(next);
    }
    let mut factorial = 1.0;
    let mut tables = Vec::with_capacity(p + 1);
    for (q, poly) in g.iter().enumerate() {
        if q > 0 {
            factorial *= q as f64;
        }
        let scale = if q % 2 == 0 { 1.0 } else { -1.0 } / (factorial * 2f64.powi(q as i32 + 1));
        tables.push(poly.iter().map(|a| a * scale).collect());
    }
    tables
}

fn eval_poly(coeffs: &[f64], x: Complex64) -> Complex64 {
    let mut acc = c64(0.0, 0.0);
    for &a in coeffs.iter().rev() {
        acc = acc * x + a;
    }
    acc
}

struct Accumulator {
    sum: Complex64,
    bound: f64,
}

#[allow(clippy::too_many_arguments)]
fn eval_closed(
    tree: &Tree,
    node_id: usize,
    target_slot_value: Complex64,
    target_original: usize,
    theta: f64,
    p: usize,
    delta_sq: f64,
    acc: &mut Accumulator,
) -> Result<(), KernelError> {
    let node = &tree.nodes[node_id];
    let v = target_slot_value - node.centroid;
    let dist = v.norm();
    if theta > 0.0 && dist > node.radius && node.radius <= theta * dist {
        // multipole about the centroid
        let inv = 1.0 / v;
        let mut pw = inv;
        for m in 0..=p {
            acc.sum += node.moments[m] * pw;
            pw *= inv;
        }
        let rho = node.radius / dist;
        acc.bound += node.abs_weight * rho.powi(p as i32 + 1) / ((1.0 - rho) * dist);
        if delta_sq > 0.0 {
            let dmin = dist - node.radius;
            acc.bound += node.abs_weight * delta_sq / (dmin * dmin * dmin);
        }
        return Ok(());
    }
    if node.leaf {
        for slot in node.begin..node.end {
            if tree.order[slot] == target_original {
                continue;
            }
            let u = target_slot_value - tree.points[slot];
            if u.norm_sqr() + delta_sq == 0.0 {
                return Err(KernelError::SingularConfiguration {
                    i: target_original,
                    j: tree.order[slot],
                });
            }
            acc.sum += tree.weights[slot] * closed_summand(u, delta_sq);
        }
        return Ok(());
    }
    for &child in &node.children {
        if child != NO_CHILD {
            eval_closed(
                tree,
                child,
                target_slot_value,
                target_original,
                theta,
                p,
                delta_sq,
                acc,
            )?;
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn eval_periodic(
    tree: &Tree,
    node_id: usize,
    target_slot_value: Complex64,
    target_original: usize,
    theta: f64,
    p: usize,
    delta_sq: f64,
    tables: &[Vec<f64>],
    acc: &mut Accumulator,
) -> Result<(), KernelError> {
    let node = &tree.nodes[node_id];
    let v = target_slot_value - node.centroid;
    let n0 = (v.re / TAU).round();
    let mut d_eff = f64::INFINITY;
    for k in -1..=1i32 {
        let d = (v - c64(TAU * (n0 + k as f64), 0.0)).norm();
        d_eff = d_eff.min(d);
    }
    if theta > 0.0 && d_eff > node.radius && node.radius <= theta * d_eff {
        let ct = {
            let w = 0.5 * v;
            w.cos() / w.sin()
        };
        for (m, table) in tables.iter().enumerate().take(p + 1) {
            acc.sum += node.moments[m] * eval_poly(table, ct);
        }
        // geometric tails of the three nearest images plus a closure for the rest
        let rp1 = p as i32 + 1;
        for k in -1..=1i32 {
            let d = (v - c64(TAU * (n0 + k as f64), 0.0)).norm();
            if d > node.radius {
                let rho = node.radius / d;
                acc.bound += node.abs_weight * rho.powi(rp1) / ((1.0 - rho) * d);
            }
        }
        let far = 3.0 * std::f64::consts::PI;
        let rho_far = (node.radius / far).min(0.9);
        acc.bound += 4.0 * node.abs_weight * rho_far.powi(rp1) / ((1.0 - rho_far) * far);
        if delta_sq > 0.0 {
            let dmin = d_eff - node.radius;
            acc.bound += 2.0 * node.abs_weight * delta_sq / (dmin * dmin * dmin);
        }
        return Ok(());
    }
    if node.leaf {
        for slot in node.begin..node.end {
            if tree.order[slot] == target_original {
                continue;
            }
            let u = target_slot_value - tree.points[slot];
            let denom = crate::kernel::cosh_minus_cos(u.re, u.im) + delta_sq;
            if denom < 1e-28 {
                return Err(KernelError::SingularConfiguration {
                    i: target_original,
                    j: tree.order[slot],
                });
            }
            acc.sum += tree.weights[slot] * periodic_summand(u, delta_sq);
        }
        return Ok(());
    }
    for &child in &node.children {
        if child != NO_CHILD {
            eval_periodic(
                tree,
                child,
                target_slot_value,
                target_original,
                theta,
                p,
                delta_sq,
                tables,
                acc,
            )?;
        }
    }
    Ok(())
}

const PREF: Complex64 = Complex64 { re: 0.0, im: -1.0 };

fn diagonal_terms(state: &SheetState) -> Result<Vec<Complex64>, KernelError> {
    let z_a = state.derivative();
    let z_aa = state.second_derivative();
    let mut out = Vec::with_capacity(z_a.len());
    for (i, (da, daa)) in z_a.iter().zip(&z_aa).enumerate() {
        let norm = da.norm();
        if norm < 1e-13 {
            return Err(KernelError::VanishingDerivative {
                index: i,
                min_abs: norm,
            });
        }
        out.push(daa / (2.0 * da * da));
    }
    Ok(out)
}

/// Same contract as [`crate::kernel::velocity_closed`], accelerated.
pub fn treecode_velocity(
    state: &SheetState,
    kernel: &KernelSpec,
    params: &TreecodeParams,
) -> Result<TreecodeEval, TreecodeError> {
    if state.topology() != Topology::Closed {
        return Err(KernelError::WrongTopology {
            expected: Topology::Closed,
            got: state.topology(),
        }
        .into());
    }
    kernel.validate()?;
    params.validate()?;
    let z = state.positions();
    let n = z.len();
    let h = TAU / n as f64;
    let weights = vec![1.0; n];
    let tree = Tree::build(&z, &weights, params.max_leaf, params.expansion_order);
    let diag = diagonal_terms(state)?;
    let d2 = kernel.delta * kernel.delta;

    let results: Result<Vec<(Complex64, f64)>, KernelError> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = Accumulator {
                sum: c64(0.0, 0.0),
                bound: 0.0,
            };
            eval_closed(
                &tree,
                0,
                z[i],
                i,
                params.theta,
                params.expansion_order,
                d2,
                &mut acc,
            )?;
            let v = PREF * (acc.sum + diag[i]) * (h / TAU);
            Ok((v, acc.bound * h / TAU))
        })
        .collect();
    let results = results?;
    let error_bound = results.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(TreecodeEval {
        velocity: results.into_iter().map(|r| r.0).collect(),
        truncation_factor: params.truncation_factor(),
        error_bound,
    })
}

/// Same contract as [`crate::kernel::velocity_periodic`], accelerated; the
/// periodization is exact (no image truncation).
pub fn treecode_velocity_periodic(
    state: &SheetState,
    kernel: &KernelSpec,
    params: &TreecodeParams,
) -> Result<TreecodeEval, TreecodeError> {
    if state.topology() != Topology::PeriodicFlat {
        return Err(KernelError::WrongTopology {
            expected: Topology::PeriodicFlat,
            got: state.topology(),
        }
        .into());
    }
    kernel.validate()?;
    params.validate()?;
    let z = state.positions();
    let n = z.len();
    let h = TAU / n as f64;
    let weights = vec![1.0; n];
    let tree = Tree::build(&z, &weights, params.max_leaf, params.expansion_order);
    let diag = diagonal_terms(state)?;
    let d2 = kernel.delta * kernel.delta;
    let tables = cot_coefficient_tables(params.expansion_order);

    let results: Result<Vec<(Complex64, f64)>, KernelError> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = Accumulator {
                sum: c64(0.0, 0.0),
                bound: 0.0,
            };
            eval_periodic(
                &tree,
                0,
                z[i],
                i,
                params.theta,
                params.expansion_order,
                d2,
                &tables,
                &mut acc,
            )?;
            let v = PREF * (acc.sum + diag[i]) * (h / TAU);
            Ok((v, acc.bound * h / TAU))
        })
        .collect();
    let results = results?;
    let error_bound = results.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(TreecodeEval {
        velocity: results.into_iter().map(|r| r.0).collect(),
        truncation_factor: params.truncation_factor(),
        error_bound,
    })
}
