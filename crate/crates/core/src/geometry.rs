//! Euclidean geometry on products of probability simplices.

use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::game::JointPolicy;

/// Euclidean projection of `v` onto the probability simplex.
///
/// Sort-based threshold method: find the largest `rho` with
/// `u_rho - (sum_{j<=rho} u_j - 1)/rho > 0` for `u` sorted decreasingly, then
/// shift and clip. Equal entries are ordered by index.
pub fn project_simplex(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(CoreError::InvalidArgument("cannot project an empty vector".into()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(CoreError::InvalidArgument("non-finite entry in projection input".into()));
    }
    Ok(project_simplex_unchecked(v))
}

pub(crate) fn project_simplex_unchecked(v: &[f64]) -> Vec<f64> {
    let k = v.len();
    if k == 1 {
        return vec![1.0];
    }
    // Already feasible inputs are returned untouched so the map is exactly
    // idempotent in floating point.
    if v.iter().all(|&x| x >= 0.0) && (v.iter().sum::<f64>() - 1.0).abs() <= 1e-15 {
        return v.to_vec();
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (r, &idx) in order.iter().enumerate() {
        cumsum += v[idx];
        let t = (cumsum - 1.0) / (r + 1) as f64;
        if v[idx] - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Projects every `raw[i][s]` onto its simplex independently.
///
/// Because the feasible set is a Cartesian product of simplices, this equals
/// the joint Euclidean projection onto the product.
pub fn project_policy(raw: &[Vec<Vec<f64>>], action_counts: &[usize]) -> Result<JointPolicy> {
    if raw.len() != action_counts.len() {
        return Err(CoreError::ShapeMismatch(format!(
            "table has {} agents, expected {}",
            raw.len(),
            action_counts.len()
        )));
    }
    let mut probs = Vec::with_capacity(raw.len());
    for (i, (agent, &k)) in raw.iter().zip(action_counts).enumerate() {
        let mut rows = Vec::with_capacity(agent.len());
        for row in agent {
            if row.len() != k {
                return Err(CoreError::ShapeMismatch(format!(
                    "agent {i}: row of length {}, expected {k}",
                    row.len()
                )));
            }
            rows.push(project_simplex(row)?);
        }
        probs.push(rows);
    }
    Ok(JointPolicy::from_raw(probs))
}

/// Projection onto the product of simplices that solves each block's KKT
/// condition by bisection on its threshold. Slower than [`project_policy`];
/// kept as an independent implementation for cross-checks.
pub fn project_product_bisection(raw: &[Vec<Vec<f64>>]) -> JointPolicy {
    let probs = raw
        .iter()
        .map(|agent| agent.iter().map(|row| bisection_projection(row)).collect())
        .collect();
    JointPolicy::from_raw(probs)
}

fn bisection_projection(v: &[f64]) -> Vec<f64> {
    let mut lo = v.iter().copied().fold(f64::INFINITY, f64::min) - 1.0;
    let mut hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mass = |t: f64| v.iter().map(|&x| (x - t).max(0.0)).sum::<f64>();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    v.iter().map(|&x| (x - t).max(0.0)).collect()
}

/// `(1 - alpha) x + alpha / A_i` for every agent and state.
pub fn alpha_greedy(params: &JointPolicy, alpha: f64) -> Result<JointPolicy> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(CoreError::InvalidArgument(format!("alpha {alpha} outside [0, 1]")));
    }
    Ok(alpha_greedy_unchecked(params, alpha))
}

pub(crate) fn alpha_greedy_unchecked(params: &JointPolicy, alpha: f64) -> JointPolicy {
    if alpha == 0.0 {
        return params.clone();
    }
    let probs = params
        .probs
        .iter()
        .map(|agent| {
            agent
                .iter()
                .map(|row| {
                    let u = alpha / row.len() as f64;
                    row.iter().map(|&x| (1.0 - alpha) * x + u).collect()
                })
                .collect()
        })
        .collect();
    JointPolicy::from_raw(probs)
}

/// Gradient mapping `G = beta (P(pi + g / beta) - pi)` and its Euclidean norm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientMapping {
    pub beta: f64,
    pub mapped_point: JointPolicy,
    pub mapping_norm: f64,
}

pub fn gradient_mapping(
    point: &JointPolicy,
    gradient: &[Vec<Vec<f64>>],
    beta: f64,
) -> Result<GradientMapping> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(CoreError::InvalidArgument(format!("beta must be positive, got {beta}")));
    }
    let counts: Vec<usize> = point.probs.iter().map(|a| a.first().map_or(0, |r| r.len())).collect();
    let stepped = add_scaled(point, gradient, 1.0 / beta)?;
    let mapped_point = project_policy(&stepped, &counts)?;
    let mapping_norm = beta * l2_distance(&mapped_point, point);
    Ok(GradientMapping {
        beta,
        mapped_point,
        mapping_norm,
    })
}

/// `pi + scale * g` as a raw table.
pub(crate) fn add_scaled(
    point: &JointPolicy,
    g: &[Vec<Vec<f64>>],
    scale: f64,
) -> Result<Vec<Vec<Vec<f64>>>> {
    if g.len() != point.probs.len() {
        return Err(CoreError::ShapeMismatch("gradient and policy agent counts differ".into()));
    }
    point
        .probs
        .iter()
        .zip(g)
        .map(|(pa, ga)| {
            if pa.len() != ga.len() {
                return Err(CoreError::ShapeMismatch("gradient and policy state counts differ".into()));
            }
            pa.iter()
                .zip(ga)
                .map(|(pr, gr)| {
                    if pr.len() != gr.len() {
                        return Err(CoreError::ShapeMismatch(
                            "gradient and policy action counts differ".into(),
                        ));
                    }
                    Ok(pr.iter().zip(gr).map(|(x, d)| x + scale * d).collect())
                })
                .collect()
        })
        .collect()
}

/// Euclidean distance between two policies viewed as flat vectors.
pub fn l2_distance(a: &JointPolicy, b: &JointPolicy) -> f64 {
    a.probs
        .iter()
        .flatten()
        .flatten()
        .zip(b.probs.iter().flatten().flatten())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Largest entrywise difference between two policies.
pub fn linf_distance(a: &JointPolicy, b: &JointPolicy) -> f64 {
    a.probs
        .iter()
        .flatten()
        .flatten()
        .zip(b.probs.iter().flatten().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Mean over agents of the entrywise L1 distance to `reference`.
pub fn l1_accuracy(policy: &JointPolicy, reference: &JointPolicy) -> Result<f64> {
    if !same_shape(policy, reference) {
        return Err(CoreError::ShapeMismatch("policies have different shapes".into()));
    }
    let total: f64 = policy
        .probs
        .iter()
        .flatten()
        .flatten()
        .zip(reference.probs.iter().flatten().flatten())
        .map(|(x, y)| (x - y).abs())
        .sum();
    Ok(total / policy.num_agents() as f64)
}

pub(crate) fn same_shape(a: &JointPolicy, b: &JointPolicy) -> bool {
    a.probs.len() == b.probs.len()
        && a.probs.iter().zip(&b.probs).all(|(x, y)| {
            x.len() == y.len() && x.iter().zip(y).all(|(r, t)| r.len() == t.len())
        })
}
