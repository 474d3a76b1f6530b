//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use smmfit::weights::WeightGraph;

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &x) in u.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (i + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

pub fn objective(points: ArrayView2<f64>, b: ArrayView2<f64>, graph: &WeightGraph, lambda: f64) -> f64 {
    let fit: f64 = points.iter().zip(b.iter()).map(|(p, q)| (p - q).powi(2)).sum::<f64>() * 0.5;
    let pen: f64 = graph
        .edges
        .iter()
        .map(|e| {
            e.w * b
                .row(e.i)
                .iter()
                .zip(b.row(e.j).iter())
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .sum();
    fit + lambda * pen
}

/// In-place projection onto the simplex; `scratch` must have the same length.
fn project_simplex_into(v: &mut [f64], scratch: &mut [f64]) {
    scratch.copy_from_slice(v);
    for i in 1..scratch.len() {
        let x = scratch[i];
        let mut j = i;
        while j > 0 && scratch[j - 1] < x {
            scratch[j] = scratch[j - 1];
            j -= 1;
        }
        scratch[j] = x;
    }
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &x) in scratch.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (i + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter_mut().for_each(|x| *x = (*x - theta).max(0.0));
}

/// Projected subgradient descent on the primal with steps `2 / (t + 1)`
/// (the objective is 1-strongly convex) and `t`-weighted averaging.
/// Returns the better of the averaged and the best visited iterate.
pub fn subgradient_oracle(points: ArrayView2<f64>, graph: &WeightGraph, lambda: f64, iters: usize) -> (Array2<f64>, f64) {
    let (p, d) = points.dim();
    let pts = points.as_standard_layout().to_owned();
    let pts = pts.as_slice().unwrap();
    let mut xs = pts.to_vec();
    let mut avg = vec![0.0; p * d];
    let mut weight_sum = 0.0;
    let mut best = xs.clone();
    let mut best_val = objective(points, points, graph, lambda);
    let mut g = vec![0.0; p * d];
    let mut diff = vec![0.0; d];
    let mut scratch = vec![0.0; d];
    let view = |v: &[f64]| Array2::from_shape_vec((p, d), v.to_vec()).unwrap();
    for t in 1..=iters {
        for k in 0..p * d {
            g[k] = xs[k] - pts[k];
        }
        for e in &graph.edges {
            let mut norm = 0.0;
            for c in 0..d {
                diff[c] = xs[e.i * d + c] - xs[e.j * d + c];
                norm += diff[c] * diff[c];
            }
            let norm = norm.sqrt();
            if norm > 1e-15 {
                let s = lambda * e.w / norm;
                for c in 0..d {
                    g[e.i * d + c] += s * diff[c];
                    g[e.j * d + c] -= s * diff[c];
                }
            }
        }
        let step = 2.0 / (t as f64 + 1.0);
        for k in 0..p * d {
            xs[k] -= step * g[k];
        }
        for row in xs.chunks_mut(d) {
            project_simplex_into(row, &mut scratch);
        }
        let tw = t as f64;
        for k in 0..p * d {
            avg[k] += tw * xs[k];
        }
        weight_sum += tw;
        if t % 1024 == 0 || t == iters {
            let val = objective(points, view(&xs).view(), graph, lambda);
            if val < best_val {
                best_val = val;
                best.copy_from_slice(&xs);
            }
        }
    }
    avg.iter_mut().for_each(|a| *a /= weight_sum);
    let avg = view(&avg);
    let avg_val = objective(points, avg.view(), graph, lambda);
    if avg_val < best_val {
        (avg, avg_val)
    } else {
        (view(&best), best_val)
    }
}

/// ADMM on the split `v_l = u_i - u_j`, penalty `rho = 1`, with the
/// linear system `(I + L)` inverted once by Gauss-Jordan.
/// Stops when primal and dual residuals fall below `tol` or after `max_iter`.
pub fn admm_oracle(points: ArrayView2<f64>, graph: &WeightGraph, lambda: f64, tol: f64, max_iter: usize) -> (Array2<f64>, f64) {
    let (p, d) = points.dim();
    let ne = graph.edges.len();
    let mut sys = vec![0.0; p * p];
    for i in 0..p {
        sys[i * p + i] = 1.0;
    }
    for e in &graph.edges {
        sys[e.i * p + e.i] += 1.0;
        sys[e.j * p + e.j] += 1.0;
        sys[e.i * p + e.j] -= 1.0;
        sys[e.j * p + e.i] -= 1.0;
    }
    let inv = invert(&sys, p);
    let x = points.as_standard_layout().to_owned();
    let x = x.as_slice().unwrap();
    let mut u = x.to_vec();
    let mut v = vec![0.0; ne * d];
    let mut z = vec![0.0; ne * d];
    let mut rhs = vec![0.0; p * d];
    let mut buf = vec![0.0; d];
    for (l, e) in graph.edges.iter().enumerate() {
        for c in 0..d {
            v[l * d + c] = u[e.i * d + c] - u[e.j * d + c];
        }
    }
    for _ in 0..max_iter {
        rhs.copy_from_slice(x);
        for (l, e) in graph.edges.iter().enumerate() {
            for c in 0..d {
                let t = v[l * d + c] - z[l * d + c];
                rhs[e.i * d + c] += t;
                rhs[e.j * d + c] -= t;
            }
        }
        for i in 0..p {
            for c in 0..d {
                u[i * d + c] = (0..p).map(|k| inv[i * p + k] * rhs[k * d + c]).sum();
            }
        }
        let (mut primal, mut dual) = (0.0f64, 0.0f64);
        for (l, e) in graph.edges.iter().enumerate() {
            let mut norm = 0.0;
            for c in 0..d {
                buf[c] = u[e.i * d + c] - u[e.j * d + c] + z[l * d + c];
                norm += buf[c] * buf[c];
            }
            let norm = norm.sqrt();
            let shrink = if norm > 0.0 { (1.0 - lambda * e.w / norm).max(0.0) } else { 0.0 };
            for c in 0..d {
                let new_v = shrink * buf[c];
                dual = dual.max((new_v - v[l * d + c]).abs());
                v[l * d + c] = new_v;
                let r = u[e.i * d + c] - u[e.j * d + c] - new_v;
                primal = primal.max(r.abs());
                z[l * d + c] += r;
            }
        }
        if primal < tol && dual < tol {
            break;
        }
    }
    let u = Array2::from_shape_vec((p, d), u).unwrap();
    let val = objective(points, u.view(), graph, lambda);
    (u, val)
}

fn invert(a: &[f64], n: usize) -> Vec<f64> {
    let mut m = a.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&r, &s| m[r * n + col].abs().total_cmp(&m[s * n + col].abs())).unwrap();
        for k in 0..n {
            m.swap(col * n + k, piv * n + k);
            inv.swap(col * n + k, piv * n + k);
        }
        let diag = m[col * n + col];
        for k in 0..n {
            m[col * n + k] /= diag;
            inv[col * n + k] /= diag;
        }
        for r in 0..n {
            if r != col {
                let f = m[r * n + col];
                if f != 0.0 {
                    for k in 0..n {
                        m[r * n + k] -= f * m[col * n + k];
                        inv[r * n + k] -= f * inv[col * n + k];
                    }
                }
            }
        }
    }
    inv
}

/// A random point on the simplex, sometimes with exact zeros.
pub fn random_simplex_row<R: Rng>(d: usize, rng: &mut R) -> Vec<f64> {
    let mut v: Vec<f64> = (0..d)
        .map(|_| if rng.random_bool(0.15) { 0.0 } else { -rng.random::<f64>().max(1e-300).ln() })
        .collect();
    if v.iter().all(|&x| x == 0.0) {
        v[rng.random_range(0..d)] = 1.0;
    }
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

pub fn random_points<R: Rng>(p: usize, d: usize, rng: &mut R) -> Array2<f64> {
    let rows: Vec<f64> = (0..p).flat_map(|_| random_simplex_row(d, rng)).collect();
    Array2::from_shape_vec((p, d), rows).unwrap()
}

/// Each pair present with probability `density`, weight uniform in (0, 2].
pub fn random_graph<R: Rng>(p: usize, density: f64, rng: &mut R) -> WeightGraph {
    let mut triples = Vec::new();
    for i in 0..p {
        for j in i + 1..p {
            if rng.random_bool(density) {
                triples.push((i, j, 2.0 * (1.0 - rng.random::<f64>())));
            }
        }
    }
    WeightGraph::from_edges(p, triples).unwrap()
}

/// Log-uniform draw from `[lo, hi]`.
pub fn log_uniform<R: Rng>(lo: f64, hi: f64, rng: &mut R) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

/// RI and ARI by enumerating every pair of elements.
pub fn brute_force_ri_ari(a: &[usize], b: &[usize]) -> (f64, f64) {
    let n = a.len();
    let (mut both, mut only_a, mut only_b, mut neither) = (0u64, 0u64, 0u64, 0u64);
    for i in 0..n {
        for j in i + 1..n {
            match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => both += 1,
                (true, false) => only_a += 1,
                (false, true) => only_b += 1,
                (false, false) => neither += 1,
            }
        }
    }
    let pairs = (both + only_a + only_b + neither) as f64;
    let ri = (both + neither) as f64 / pairs;
    let same_a = (both + only_a) as f64;
    let same_b = (both + only_b) as f64;
    let expected = same_a * same_b / pairs;
    let max = 0.5 * (same_a + same_b);
    let ari = if max == expected {
        if a_equiv_b(a, b) { 1.0 } else { 0.0 }
    } else {
        (both as f64 - expected) / (max - expected)
    };
    (ri, ari)
}

fn a_equiv_b(a: &[usize], b: &[usize]) -> bool {
    (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
}

/// Transition counts by scanning every window and decoding it by hand.
pub fn naive_counts(codes: &[usize], d: usize, m: usize) -> Vec<Vec<u64>> {
    let p = d.pow(m as u32);
    let mut counts = vec![vec![0u64; d]; p];
    for t in m..codes.len() {
        let mut ctx = 0;
        for k in 0..m {
            ctx = ctx * d + codes[t - m + k];
        }
        counts[ctx][codes[t]] += 1;
    }
    counts
}
