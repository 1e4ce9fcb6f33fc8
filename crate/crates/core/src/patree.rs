//! General preferential attachment trees: vertex `n` attaches to an existing
//! vertex `m` with probability proportional to `f(out-degree of m)`.
//!
//! Also the discrete skeleton of a CMJ genealogy, a conditional chi-square
//! test of the poissonization coupling, and finite-size shape diagnostics.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::cmj::{simulate, Genealogy, SimOptions, ROOT};
use crate::error::{Error, Result};
use crate::fenwick::FenwickTree;
use crate::numeric::chi_square_sf;
use crate::purebirth::Stop;
use crate::rates::RateSequence;
use crate::rng::CounterRng;

/// Above this many vertices `grow` samples parents through a Fenwick tree.
pub const LINEAR_SCAN_LIMIT: u64 = 10_000;

/// Minimum expected count per chi-square cell.
const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum WeightFunction {
    /// `f(k) = c`.
    Constant { c: f64 },
    /// `f(k) = k + shift`.
    Affine { shift: f64 },
    /// `f(k) = (k + 1)^p`.
    Power { p: f64 },
    /// `f(k) = values[k]`.
    Table { values: Vec<f64> },
}

impl WeightFunction {
    pub fn eval(&self, k: u64) -> Result<f64> {
        let v = match *self {
            WeightFunction::Constant { c } => c,
            WeightFunction::Affine { shift } => k as f64 + shift,
            WeightFunction::Power { p } => libm::pow(k as f64 + 1.0, p),
            WeightFunction::Table { ref values } => {
                *values.get(k as usize).ok_or(Error::NonFiniteWeight(k))?
            }
        };
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteWeight(k))
        }
    }

    /// Birth rates of the coupled CMJ process, `λ_i = f(i - 1)`.
    pub fn to_rates(&self) -> RateSequence {
        match *self {
            WeightFunction::Constant { c } => RateSequence::Constant { c },
            WeightFunction::Affine { shift } => RateSequence::Affine { a: 1.0, b: shift - 1.0 },
            WeightFunction::Power { p } => RateSequence::Power { p },
            WeightFunction::Table { ref values } => {
                RateSequence::Table { log2: values.iter().map(|&v| libm::log2(v)).collect() }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PATree {
    /// `parent[0] == ROOT`, `parent[n] < n` otherwise.
    pub parent: Vec<u32>,
}

impl PATree {
    /// Number of vertices.
    pub fn size(&self) -> usize {
        self.parent.len()
    }

    pub fn out_degrees(&self) -> Vec<u32> {
        let mut d = vec![0u32; self.parent.len()];
        for &p in &self.parent[1..] {
            d[p as usize] += 1;
        }
        d
    }

    pub fn depths(&self) -> Vec<u32> {
        let mut depth = vec![0u32; self.parent.len()];
        for v in 1..self.parent.len() {
            depth[v] = depth[self.parent[v] as usize] + 1;
        }
        depth
    }

    pub fn height(&self) -> u32 {
        self.depths().into_iter().max().unwrap_or(0)
    }

    pub fn path(n: u32) -> Self {
        let mut parent = vec![ROOT];
        parent.extend(0..n);
        Self { parent }
    }

    pub fn star(n: u32) -> Self {
        let mut parent = vec![ROOT];
        parent.extend(core::iter::repeat_n(0, n as usize));
        Self { parent }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    /// Linear scan up to [`LINEAR_SCAN_LIMIT`] vertices, Fenwick above.
    Auto,
    Linear,
    Fenwick,
}

/// Grows `T_n` (vertices `0..=n`). Step `m` uses uniform `(lane 0, counter m - 1)`.
pub fn grow(f: &WeightFunction, n: u64, rng: &CounterRng) -> Result<PATree> {
    grow_with(f, n, rng, SamplerKind::Auto, |_, _| {})
}

/// [`grow`] with an explicit sampler and a per-step observer receiving
/// `(degrees after the step, running denominator)`.
pub fn grow_with(
    f: &WeightFunction,
    n: u64,
    rng: &CounterRng,
    kind: SamplerKind,
    mut observe: impl FnMut(&[u32], f64),
) -> Result<PATree> {
    if n == 0 {
        return Err(Error::InvalidParameter("grow needs n >= 1".into()));
    }
    if n >= u32::MAX as u64 {
        return Err(Error::InvalidParameter("tree size exceeds u32 ids".into()));
    }
    let use_fenwick = match kind {
        SamplerKind::Auto => n > LINEAR_SCAN_LIMIT,
        SamplerKind::Linear => false,
        SamplerKind::Fenwick => true,
    };
    let size = n as usize + 1;
    let mut parent = Vec::with_capacity(size);
    parent.push(ROOT);
    let mut degree = vec![0u32; size];
    let mut weight = vec![0.0f64; size];
    let mut fenwick = use_fenwick.then(|| FenwickTree::with_len(size));

    let f0 = f.eval(0)?;
    weight[0] = f0;
    if let Some(t) = fenwick.as_mut() {
        t.add(0, f0);
    }
    let mut total = f0;

    for m in 1..size {
        let target = rng.uniform(0, m as u64 - 1) * total;
        let chosen = match fenwick.as_ref() {
            Some(t) => t.find(target, m),
            None => {
                let mut cum = 0.0;
                let mut pick = m - 1;
                for (j, w) in weight[..m].iter().enumerate() {
                    cum += w;
                    if cum > target {
                        pick = j;
                        break;
                    }
                }
                pick
            }
        };
        parent.push(chosen as u32);
        degree[chosen] += 1;
        let new_w = f.eval(degree[chosen] as u64)?;
        let delta = new_w - weight[chosen];
        weight[chosen] = new_w;
        weight[m] = f0;
        if let Some(t) = fenwick.as_mut() {
            t.add(chosen, delta);
            t.add(m, f0);
        }
        total += delta + f0;
        observe(&degree[..=m], total);
    }
    Ok(PATree { parent })
}

/// The CMJ genealogy read as a tree in birth order.
pub fn skeleton(g: &Genealogy) -> PATree {
    PATree { parent: g.parent.clone() }
}

/// `P{parent of vertex m = j}` given the parents of vertices `1..m`.
pub fn attachment_probabilities(f: &WeightFunction, prefix: &[u32]) -> Result<Vec<f64>> {
    let m = prefix.len() + 1;
    let mut deg = vec![0u64; m];
    for &p in prefix {
        deg[p as usize] += 1;
    }
    let w = deg.iter().map(|&d| f.eval(d)).collect::<Result<Vec<_>>>()?;
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / total).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    /// Vertex being attached.
    pub step: u32,
    pub chi_square: f64,
    pub df: u32,
    pub p_value: f64,
    /// Distinct realized prefixes.
    pub groups: u32,
    pub groups_used: u32,
    /// Replicates whose prefix group had too little expected mass to test.
    pub samples_dropped: u64,
    pub underpowered: bool,
    pub observed_marginal: Vec<f64>,
    pub expected_marginal: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub weight: WeightFunction,
    pub n: u32,
    pub replicates: u64,
    pub steps: Vec<StepReport>,
}

impl CouplingReport {
    pub fn min_p_value(&self) -> f64 {
        self.steps.iter().map(|s| s.p_value).fold(1.0, f64::min)
    }

    /// Per-step conditional chi-square of `trees` (each with vertices `0..=n`)
    /// against the exact attachment law.
    pub fn from_trees(f: &WeightFunction, n: u32, trees: &[Vec<u32>]) -> Result<Self> {
        let mut steps = Vec::with_capacity(n as usize);
        for m in 1..=n as usize {
            let mut groups: BTreeMap<&[u32], Vec<u64>> = BTreeMap::new();
            for t in trees {
                let cell = groups.entry(&t[1..m]).or_insert_with(|| vec![0; m]);
                cell[t[m] as usize] += 1;
            }
            let mut rep = StepReport {
                step: m as u32,
                chi_square: 0.0,
                df: 0,
                p_value: 1.0,
                groups: groups.len() as u32,
                groups_used: 0,
                samples_dropped: 0,
                underpowered: false,
                observed_marginal: vec![0.0; m],
                expected_marginal: vec![0.0; m],
            };
            for (prefix, counts) in &groups {
                let probs = attachment_probabilities(f, prefix)?;
                let total: u64 = counts.iter().sum();
                for j in 0..m {
                    rep.observed_marginal[j] += counts[j] as f64;
                    rep.expected_marginal[j] += probs[j] * total as f64;
                }
                match pooled_chi_square(counts, &probs) {
                    Some((stat, df)) => {
                        rep.chi_square += stat;
                        rep.df += df;
                        rep.groups_used += 1;
                    }
                    None => rep.samples_dropped += total,
                }
            }
            let reps = trees.len() as f64;
            rep.observed_marginal.iter_mut().for_each(|x| *x /= reps);
            rep.expected_marginal.iter_mut().for_each(|x| *x /= reps);
            rep.p_value = chi_square_sf(rep.chi_square, rep.df as f64);
            rep.underpowered = rep.df == 0 || rep.samples_dropped as f64 > 0.5 * reps;
            steps.push(rep);
        }
        Ok(Self { weight: f.clone(), n, replicates: trees.len() as u64, steps })
    }
}

/// Pearson statistic with cells of expected count below 5 pooled together;
/// `None` when fewer than two cells survive.
fn pooled_chi_square(counts: &[u64], probs: &[f64]) -> Option<(f64, u32)> {
    let total: u64 = counts.iter().sum();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut pool_o, mut pool_e) = (0.0, 0.0);
    for (&c, &p) in counts.iter().zip(probs) {
        let e = p * total as f64;
        if e < MIN_EXPECTED {
            pool_o += c as f64;
            pool_e += e;
        } else {
            cells.push((c as f64, e));
        }
    }
    if pool_e > 0.0 {
        if pool_e >= MIN_EXPECTED || cells.is_empty() {
            cells.push((pool_o, pool_e));
        } else {
            // merge the leftover pool into the smallest surviving cell
            let idx = (0..cells.len()).min_by(|&a, &b| cells[a].1.total_cmp(&cells[b].1)).unwrap();
            cells[idx].0 += pool_o;
            cells[idx].1 += pool_e;
        }
    }
    if cells.len() < 2 || cells.iter().any(|c| c.1 < MIN_EXPECTED) {
        return None;
    }
    let stat = cells.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    Some((stat, cells.len() as u32 - 1))
}

pub fn validate_coupling(n: u32, reps: u64) -> Result<()> {
    if !(1..=8).contains(&n) {
        return Err(Error::InvalidParameter("coupling test supports 1 <= n <= 8".into()));
    }
    if reps < 10_000 {
        return Err(Error::InvalidParameter("coupling test needs at least 10^4 replicates".into()));
    }
    Ok(())
}

/// Skeleton parent array of one CMJ run with `λ_i = f(i - 1)`, stopped at
/// `n + 1` individuals.
pub fn coupling_replicate(rates: &RateSequence, n: u32, stream: &CounterRng) -> Result<Vec<u32>> {
    let g = simulate(rates, Stop::Count(n as u64 + 1), &SimOptions::default(), stream)?;
    Ok(skeleton(&g).parent)
}

/// Conditional chi-square comparison between CMJ skeletons and the
/// attachment law; replicate `r` uses `rng.stream(r)`.
pub fn coupling_test(f: &WeightFunction, n: u32, reps: u64, rng: &CounterRng) -> Result<CouplingReport> {
    validate_coupling(n, reps)?;
    let rates = f.to_rates();
    let trees = (0..reps)
        .map(|r| coupling_replicate(&rates, n, &rng.stream(r)))
        .collect::<Result<Vec<_>>>()?;
    CouplingReport::from_trees(f, n, &trees)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeHint {
    StarLike,
    PathLike,
    Mixed,
    Inconclusive,
}

/// Finite-size heuristics only; the star/path trichotomy concerns the
/// infinite tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeDiagnostics {
    /// `(n, max out-degree in T_n)`.
    pub max_degree_trajectory: Vec<(u64, u32)>,
    /// `(n, height of T_n)`.
    pub height_trajectory: Vec<(u64, u32)>,
    pub verdict_hint: ShapeHint,
}

/// Hint thresholds on max-degree / height at the final checkpoint.
pub const STAR_RATIO: f64 = 10.0;
pub const PATH_RATIO: f64 = 0.1;

pub fn shape_diagnostics(t: &PATree, checkpoints: &[u64]) -> Result<ShapeDiagnostics> {
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("checkpoints must be strictly ascending".into()));
    }
    let last = t.size() as u64 - 1;
    if checkpoints.last().is_some_and(|&c| c > last) {
        return Err(Error::InvalidParameter("checkpoint beyond the tree size".into()));
    }
    let mut deg = vec![0u32; t.size()];
    let mut depth = vec![0u32; t.size()];
    let (mut max_deg, mut height) = (0u32, 0u32);
    let mut out = ShapeDiagnostics {
        max_degree_trajectory: Vec::with_capacity(checkpoints.len()),
        height_trajectory: Vec::with_capacity(checkpoints.len()),
        verdict_hint: ShapeHint::Inconclusive,
    };
    let mut next = checkpoints.iter().peekable();
    for v in 0..t.size() {
        if v > 0 {
            let p = t.parent[v] as usize;
            deg[p] += 1;
            max_deg = max_deg.max(deg[p]);
            depth[v] = depth[p] + 1;
            height = height.max(depth[v]);
        }
        while next.peek().is_some_and(|&&c| c == v as u64) {
            out.max_degree_trajectory.push((v as u64, max_deg));
            out.height_trajectory.push((v as u64, height));
            next.next();
        }
    }
    out.verdict_hint = hint(&out);
    Ok(out)
}

fn hint(d: &ShapeDiagnostics) -> ShapeHint {
    let (Some(&(_, deg)), Some(&(_, h))) = (d.max_degree_trajectory.last(), d.height_trajectory.last()) else {
        return ShapeHint::Inconclusive;
    };
    if h == 0 {
        return ShapeHint::Inconclusive;
    }
    let ratio = deg as f64 / h as f64;
    if ratio > STAR_RATIO {
        ShapeHint::StarLike
    } else if ratio < PATH_RATIO {
        ShapeHint::PathLike
    } else {
        let grew = |tr: &[(u64, u32)]| tr.len() >= 2 && tr.last().unwrap().1 > tr[0].1;
        if grew(&d.max_degree_trajectory) && grew(&d.height_trajectory) {
            ShapeHint::Mixed
        } else {
            ShapeHint::Inconclusive
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_is_forced() {
        for seed in 0..20 {
            let t = grow(&WeightFunction::Power { p: 3.0 }, 1, &CounterRng::new(seed)).unwrap();
            assert_eq!(t.parent, vec![ROOT, 0]);
        }
    }

    #[test]
    fn second_step_probabilities() {
        let p = attachment_probabilities(&WeightFunction::Affine { shift: 1.0 }, &[0]).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15 && (p[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn incremental_denominator_is_exact() {
        for (f, seed) in [(WeightFunction::Affine { shift: 1.0 }, 1), (WeightFunction::Power { p: 2.0 }, 2)] {
            for kind in [SamplerKind::Linear, SamplerKind::Fenwick] {
                let f2 = f.clone();
                grow_with(&f, 1000, &CounterRng::new(seed), kind, |deg, total| {
                    let fresh: f64 = deg.iter().map(|&d| f2.eval(d as u64).unwrap()).sum();
                    assert_eq!(fresh, total);
                })
                .unwrap();
            }
        }
    }

    #[test]
    fn samplers_agree_on_integer_weights() {
        for seed in 0..10 {
            for f in [WeightFunction::Affine { shift: 1.0 }, WeightFunction::Power { p: 2.0 }, WeightFunction::Constant { c: 1.0 }] {
                let rng = CounterRng::new(seed);
                let a = grow_with(&f, 3000, &rng, SamplerKind::Linear, |_, _| {}).unwrap();
                let b = grow_with(&f, 3000, &rng, SamplerKind::Fenwick, |_, _| {}).unwrap();
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn constant_scale_invariance() {
        for seed in 0..10 {
            let rng = CounterRng::new(seed);
            let a = grow(&WeightFunction::Table { values: vec![1.0; 600] }, 500, &rng).unwrap();
            let b = grow(&WeightFunction::Table { values: vec![8.0; 600] }, 500, &rng).unwrap();
            let c = grow(&WeightFunction::Constant { c: 1.0 }, 500, &rng).unwrap();
            assert_eq!(a, b);
            assert_eq!(a, c);
        }
    }

    #[test]
    fn bad_weights_rejected() {
        assert_eq!(WeightFunction::Affine { shift: 0.0 }.eval(0), Err(Error::NonFiniteWeight(0)));
        assert!(grow(&WeightFunction::Table { values: vec![1.0, f64::NAN] }, 5, &CounterRng::new(0)).is_err());
    }

    #[test]
    fn coupled_rates() {
        let r = WeightFunction::Affine { shift: 1.0 }.to_rates();
        for i in 1..10u64 {
            assert!((r.rate_log2(i).unwrap().rate() - i as f64).abs() < 1e-12 * i as f64);
        }
        let r = WeightFunction::Power { p: 2.0 }.to_rates();
        assert!((r.rate_log2(3).unwrap().rate() - 9.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_shapes() {
        let d = shape_diagnostics(&PATree::path(100), &[10, 50, 100]).unwrap();
        assert_eq!(d.verdict_hint, ShapeHint::PathLike);
        assert_eq!(d.height_trajectory.last(), Some(&(100, 100)));
        assert_eq!(d.max_degree_trajectory.last(), Some(&(100, 1)));
        let d = shape_diagnostics(&PATree::star(100), &[10, 100]).unwrap();
        assert_eq!(d.verdict_hint, ShapeHint::StarLike);
        assert_eq!(d.max_degree_trajectory, vec![(10, 10), (100, 100)]);
        assert!(shape_diagnostics(&PATree::star(10), &[5, 3]).is_err());
        assert!(shape_diagnostics(&PATree::star(10), &[11]).is_err());
    }

    #[test]
    fn pooled_chi_square_edge_cases() {
        assert_eq!(pooled_chi_square(&[3, 1], &[0.5, 0.5]), None);
        let (s, df) = pooled_chi_square(&[50, 50], &[0.5, 0.5]).unwrap();
        assert_eq!((s, df), (0.0, 1));
        // tiny cells pooled with the smallest surviving cell
        let (_, df) = pooled_chi_square(&[90, 8, 1, 1], &[0.9, 0.08, 0.01, 0.01]).unwrap();
        assert_eq!(df, 1);
    }
}
