//! Brute-force checkers for the self-normalizing graph-sequence bounds.
//!
//! Each checker evaluates the left-hand side exactly, computes the bound from
//! the exact mas-number, and reports both. Terms of the form `0/0` count as 0.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::FeedbackGraph;
use crate::instances::random_graph;
use crate::mdp::PairId;
use crate::props::{mas_number, SolverOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LemmaError {
    #[error("weight row {row} has {got} entries, expected {expected}")]
    RowLength {
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("weights must be finite and nonnegative")]
    NegativeWeight,
    #[error("w_min must be positive")]
    NonPositiveMin,
    #[error("vertex {0} out of range")]
    VertexOutOfRange(PairId),
    #[error("graph too large for an exact mas-number ({0} vertices)")]
    TooLarge(usize),
}

/// `T` weight functions over the vertices, row `k` is `w_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSequence {
    pub weights: Vec<Vec<f64>>,
    /// Claimed bound on every `Σ_x w_k(x)`; computed from the data when absent.
    #[serde(default)]
    pub w_max: Option<f64>,
    #[serde(default)]
    pub w_min: Option<f64>,
}

impl WeightSequence {
    pub fn new(weights: Vec<Vec<f64>>) -> Self {
        Self {
            weights,
            w_max: None,
            w_min: None,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn max_row_sum(&self) -> f64 {
        self.weights
            .iter()
            .map(|r| r.iter().sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_entry(&self) -> f64 {
        self.weights.iter().flatten().copied().fold(0.0, f64::max)
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().flatten().sum()
    }

    fn validate(&self, n: usize) -> Result<(), LemmaError> {
        for (row, w) in self.weights.iter().enumerate() {
            if w.len() != n {
                return Err(LemmaError::RowLength {
                    row,
                    expected: n,
                    got: w.len(),
                });
            }
            if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(LemmaError::NegativeWeight);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl LemmaCheck {
    fn new(lhs: f64, rhs: f64) -> Self {
        Self {
            lhs,
            rhs,
            pass: lhs <= rhs * (1.0 + 1e-12) + 1e-12,
        }
    }

    pub fn ratio(&self) -> f64 {
        if self.rhs > 0.0 {
            self.lhs / self.rhs
        } else if self.lhs > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }
}

fn exact_mas(graph: &FeedbackGraph) -> Result<f64, LemmaError> {
    let m = mas_number(graph, SolverOptions::default());
    if !m.exact {
        return Err(LemmaError::TooLarge(graph.num_vertices()));
    }
    Ok(m.value as f64)
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Running sums `Σ_{i≤k} Σ_{x'∈N(x)} w_i(x')` for each `k` (inclusive) and vertex.
fn neighborhood_prefix(graph: &FeedbackGraph, ws: &WeightSequence) -> Vec<Vec<f64>> {
    let nb = graph.closed_in_neighborhoods();
    let n = graph.num_vertices();
    let mut acc = vec![0.0; n];
    let mut out = Vec::with_capacity(ws.len());
    for w in &ws.weights {
        for x in 0..n {
            acc[x] += nb[x].iter().map(|&y| w[y]).sum::<f64>();
        }
        out.push(acc.clone());
    }
    out
}

/// `Σ_k 1/|{i ≤ k : x_i ∈ N(x_k)}| ≤ M ln(eT)`.
pub fn check_vertex_sequence(
    graph: &FeedbackGraph,
    seq: &[PairId],
) -> Result<LemmaCheck, LemmaError> {
    let n = graph.num_vertices();
    if let Some(&x) = seq.iter().find(|&&x| x >= n) {
        return Err(LemmaError::VertexOutOfRange(x));
    }
    let m = exact_mas(graph)?;
    let nb = graph.closed_in_neighborhoods();
    let mut counts = vec![0usize; n];
    let mut lhs = 0.0;
    for &x in seq {
        counts[x] += 1;
        let den: usize = nb[x].iter().map(|&y| counts[y]).sum();
        lhs += 1.0 / den as f64;
    }
    let t = seq.len().max(1) as f64;
    Ok(LemmaCheck::new(lhs, m * (std::f64::consts::E * t).ln()))
}

/// `Σ_k Σ_x 1{w_k(x) ≥ w_min} w_k(x) / Σ_{i≤k} Σ_{N(x)} w_i ≤ 2M ln(eT w_max/w_min)`.
pub fn check_self_normalized(
    graph: &FeedbackGraph,
    ws: &WeightSequence,
) -> Result<LemmaCheck, LemmaError> {
    ws.validate(graph.num_vertices())?;
    let w_min = ws.w_min.unwrap_or(1.0);
    if w_min <= 0.0 {
        return Err(LemmaError::NonPositiveMin);
    }
    let w_max = ws.w_max.unwrap_or_else(|| ws.max_row_sum()).max(w_min);
    let m = exact_mas(graph)?;
    let prefix = neighborhood_prefix(graph, ws);
    let mut lhs = 0.0;
    for (k, w) in ws.weights.iter().enumerate() {
        for (x, &wx) in w.iter().enumerate() {
            if wx >= w_min {
                lhs += ratio(wx, prefix[k][x]);
            }
        }
    }
    let t = ws.len().max(1) as f64;
    let rhs = 2.0 * m * (std::f64::consts::E * t * w_max / w_min).ln();
    Ok(LemmaCheck::new(lhs, rhs))
}

/// `Σ_x Σ_k w_k(x) 1{Σ_{i≤k} Σ_{N(x)} w_i ≤ C} ≤ M·C`, or with `i < k` in the
/// indicator, `≤ M(C + w_max)`.
///
/// `w_max` must bound the per-step mass `Σ_x w_k(x)`, not merely each entry:
/// the current step adds a whole neighborhood's weight to the indicator sum,
/// and with a per-entry bound two mutually observing vertices already break it.
pub fn check_pigeonhole(
    graph: &FeedbackGraph,
    ws: &WeightSequence,
    c: f64,
    strict_past: bool,
) -> Result<LemmaCheck, LemmaError> {
    let n = graph.num_vertices();
    ws.validate(n)?;
    let m = exact_mas(graph)?;
    let prefix = neighborhood_prefix(graph, ws);
    let mut lhs = 0.0;
    for (k, w) in ws.weights.iter().enumerate() {
        for x in 0..n {
            let past = if strict_past {
                if k == 0 {
                    0.0
                } else {
                    prefix[k - 1][x]
                }
            } else {
                prefix[k][x]
            };
            if past <= c {
                lhs += w[x];
            }
        }
    }
    let rhs = if strict_past {
        let w_max = ws.w_max.unwrap_or_else(|| ws.max_row_sum());
        m * (c + w_max)
    } else {
        m * c
    };
    Ok(LemmaCheck::new(lhs, rhs))
}

/// Integer weights: `Σ_k Σ_x w_k(x) / Σ_{i≤k} Σ_{N(x)} w_i ≤ M ln(e Σ w)`.
pub fn check_integer_sequence(
    graph: &FeedbackGraph,
    ws: &[Vec<u64>],
) -> Result<LemmaCheck, LemmaError> {
    let real = WeightSequence::new(
        ws.iter()
            .map(|r| r.iter().map(|&v| v as f64).collect())
            .collect(),
    );
    real.validate(graph.num_vertices())?;
    let m = exact_mas(graph)?;
    let prefix = neighborhood_prefix(graph, &real);
    let mut lhs = 0.0;
    for (k, w) in real.weights.iter().enumerate() {
        for (x, &wx) in w.iter().enumerate() {
            lhs += ratio(wx, prefix[k][x]);
        }
    }
    let rhs = m * (std::f64::consts::E * real.total().max(1.0)).ln();
    Ok(LemmaCheck::new(lhs, rhs))
}

// ------------------------------------------------------------------ suites

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LemmaKind {
    /// Vertex sequences.
    D1,
    /// Real-valued self-normalized sums.
    L41,
    /// Pigeonhole, inclusive past.
    L42,
    /// Pigeonhole, strict past.
    D2,
    /// Integer-valued self-normalized sums.
    D3,
}

impl LemmaKind {
    pub const ALL: [LemmaKind; 5] = [Self::D1, Self::L41, Self::L42, Self::D2, Self::D3];

    pub fn name(self) -> &'static str {
        match self {
            Self::D1 => "d1",
            Self::L41 => "l41",
            Self::L42 => "l42",
            Self::D2 => "d2",
            Self::D3 => "d3",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// A replayable random case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaCase {
    pub vertices: usize,
    pub arcs: Vec<(PairId, PairId)>,
    #[serde(default)]
    pub sequence: Vec<PairId>,
    #[serde(default)]
    pub weights: Option<WeightSequence>,
    #[serde(default)]
    pub integer_weights: Vec<Vec<u64>>,
    #[serde(default)]
    pub threshold: f64,
}

impl LemmaCase {
    pub fn graph(&self) -> FeedbackGraph {
        FeedbackGraph::from_arcs(self.vertices, &self.arcs).expect("case graphs are valid")
    }

    pub fn check(&self, kind: LemmaKind) -> Result<LemmaCheck, LemmaError> {
        let g = self.graph();
        let weights = || self.weights.clone().unwrap_or_else(|| WeightSequence::new(vec![]));
        match kind {
            LemmaKind::D1 => check_vertex_sequence(&g, &self.sequence),
            LemmaKind::L41 => check_self_normalized(&g, &weights()),
            LemmaKind::L42 => check_pigeonhole(&g, &weights(), self.threshold, false),
            LemmaKind::D2 => check_pigeonhole(&g, &weights(), self.threshold, true),
            LemmaKind::D3 => check_integer_sequence(&g, &self.integer_weights),
        }
    }
}

/// Random graph with at most 8 vertices, `T ≤ 30`, weights in `[0, 1]`
/// (often sparse so that neighborhoods matter).
pub fn random_case<R: Rng + ?Sized>(kind: LemmaKind, rng: &mut R) -> LemmaCase {
    let n = rng.gen_range(1..=8);
    let density = rng.gen::<f64>();
    let graph = random_graph(n, density, rng);
    let t = rng.gen_range(1..=30);
    let sparsity = rng.gen::<f64>();
    let mut case = LemmaCase {
        vertices: n,
        arcs: graph.arcs(),
        sequence: vec![],
        weights: None,
        integer_weights: vec![],
        threshold: 0.0,
    };
    match kind {
        LemmaKind::D1 => {
            case.sequence = (0..t).map(|_| rng.gen_range(0..n)).collect();
        }
        LemmaKind::D3 => {
            case.integer_weights = (0..t)
                .map(|_| {
                    (0..n)
                        .map(|_| if rng.gen::<f64>() < sparsity { 0 } else { rng.gen_range(0..=5) })
                        .collect()
                })
                .collect();
        }
        _ => {
            let rows: Vec<Vec<f64>> = (0..t)
                .map(|_| {
                    (0..n)
                        .map(|_| if rng.gen::<f64>() < sparsity { 0.0 } else { rng.gen::<f64>() })
                        .collect()
                })
                .collect();
            let mut ws = WeightSequence::new(rows);
            if kind == LemmaKind::L41 {
                ws.w_min = Some(rng.gen_range(0.01..=1.0));
            }
            case.threshold = rng.gen_range(0.0..(t as f64).max(1.0));
            case.weights = Some(ws);
        }
    }
    case
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub kind: LemmaKind,
    pub cases: usize,
    pub violations: Vec<LemmaCase>,
    pub worst_ratio: f64,
}

pub fn run_suite(kind: LemmaKind, cases: usize, seed: u64) -> Result<SuiteReport, LemmaError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport {
        kind,
        cases,
        violations: vec![],
        worst_ratio: 0.0,
    };
    for _ in 0..cases {
        let case = random_case(kind, &mut rng);
        let check = case.check(kind)?;
        report.worst_ratio = report.worst_ratio.max(check.ratio());
        if !check.pass {
            report.violations.push(case);
        }
    }
    Ok(report)
}

/// Single vertex with unit weights: the harmonic and threshold cases where
/// the bounds are nearly attained.
pub fn tightness_probe(kind: LemmaKind) -> LemmaCheck {
    let g = FeedbackGraph::empty(1);
    let ones = |t: usize| WeightSequence {
        weights: vec![vec![1.0]; t],
        w_max: Some(1.0),
        w_min: Some(1.0),
    };
    let r = match kind {
        LemmaKind::D1 => check_vertex_sequence(&g, &[0; 10]),
        LemmaKind::L41 => check_self_normalized(&g, &ones(10)),
        LemmaKind::L42 => check_pigeonhole(&g, &ones(10), 5.0, false),
        LemmaKind::D2 => check_pigeonhole(&g, &ones(10), 5.0, true),
        LemmaKind::D3 => check_integer_sequence(&g, &vec![vec![1]; 10]),
    };
    r.expect("probe inputs are valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    const H10: f64 = 7381.0 / 2520.0;

    #[test]
    fn single_vertex_harmonic() {
        let g = FeedbackGraph::empty(1);
        let r = check_vertex_sequence(&g, &[0; 10]).unwrap();
        assert!((r.lhs - H10).abs() < 1e-12);
        assert!((r.rhs - (10.0 * std::f64::consts::E).ln()).abs() < 1e-12);
        assert!(r.pass);
    }

    #[test]
    fn single_step_is_one() {
        let g = FeedbackGraph::complete(3);
        let r = check_vertex_sequence(&g, &[2]).unwrap();
        assert_eq!(r.lhs, 1.0);
        assert_eq!(r.rhs, 1.0);
    }

    #[test]
    fn edgeless_round_robin() {
        let g = FeedbackGraph::empty(4);
        let r = check_vertex_sequence(&g, &[0, 1, 2, 3]).unwrap();
        assert_eq!(r.lhs, 4.0);
        assert!((r.rhs - 4.0 * (4.0 * std::f64::consts::E).ln()).abs() < 1e-12);
    }

    #[test]
    fn self_normalized_cases() {
        let g = FeedbackGraph::empty(1);
        let r = tightness_probe(LemmaKind::L41);
        assert!((r.lhs - H10).abs() < 1e-12 && r.pass);
        let below = WeightSequence {
            weights: vec![vec![0.1]; 5],
            w_max: Some(1.0),
            w_min: Some(0.5),
        };
        assert_eq!(check_self_normalized(&g, &below).unwrap().lhs, 0.0);
    }

    #[test]
    fn pigeonhole_cases() {
        let r = tightness_probe(LemmaKind::L42);
        assert_eq!((r.lhs, r.rhs), (5.0, 5.0));
        let g = FeedbackGraph::empty(2);
        let ws = WeightSequence::new(vec![vec![0.3, 0.7]; 4]);
        assert_eq!(check_pigeonhole(&g, &ws, 0.0, false).unwrap().lhs, 0.0);
        let r = tightness_probe(LemmaKind::D2);
        assert_eq!((r.lhs, r.rhs), (6.0, 6.0));
    }

    #[test]
    fn strict_past_needs_mass_bound() {
        let g = FeedbackGraph::complete(2);
        let mut ws = WeightSequence::new(vec![vec![1.0, 1.0]]);
        assert_eq!(check_pigeonhole(&g, &ws, 0.0, true).unwrap().rhs, 2.0);
        ws.w_max = Some(ws.max_entry());
        let r = check_pigeonhole(&g, &ws, 0.0, true).unwrap();
        assert_eq!((r.lhs, r.rhs, r.pass), (2.0, 1.0, false));
    }

    #[test]
    fn integer_all_zero() {
        let g = FeedbackGraph::empty(3);
        let r = check_integer_sequence(&g, &vec![vec![0, 0, 0]; 4]).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn probes_are_tight() {
        for kind in LemmaKind::ALL {
            let r = tightness_probe(kind);
            assert!(r.pass && r.lhs >= 0.25 * r.rhs, "{kind:?}: {r:?}");
        }
    }
}
