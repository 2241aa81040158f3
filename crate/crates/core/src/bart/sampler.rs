use std::cmp::Ordering;
use std::hash::{Hash, Hasher};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::Serialize;
use statrs::distribution::ContinuousCDF;

use super::config::TreeEnsembleConfig;
use super::design::Design;
use super::tree::Tree;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{rng_from, SamplerRng};

/// Affine map between the outcome and the internal scale `[-0.5, 0.5]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutcomeScaling {
    pub min: f64,
    pub range: f64,
}

impl OutcomeScaling {
    fn of(y: &[f64]) -> OutcomeScaling {
        let min = y.iter().copied().fold(f64::INFINITY, f64::min);
        let max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        OutcomeScaling {
            min,
            range: max - min,
        }
    }

    fn to_internal(&self, y: f64) -> f64 {
        (y - self.min) / self.range - 0.5
    }

    pub fn to_outcome(&self, s: f64) -> f64 {
        (s + 0.5) * self.range + self.min
    }
}

/// One posterior draw: the trees (leaf values on the internal scale) and the
/// residual variance on the outcome scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeEnsembleState {
    pub trees: Vec<Tree>,
    pub sigma2: f64,
}

impl TreeEnsembleState {
    /// Prediction on the outcome scale for a raw feature row.
    pub fn predict(&self, row: &[f64], design: &Design, scaling: &OutcomeScaling) -> f64 {
        let s: f64 = self.trees.iter().map(|t| t.predict(row, design)).sum();
        scaling.to_outcome(s)
    }
}

/// Backfitting sampler for the sum-of-trees model.
///
/// Alongside the training rows it tracks every subject's counterfactual
/// rows (one per arm), so posterior means of the potential outcomes are
/// accumulated without re-traversing stored trees. Subjects are put in a
/// canonical order first, which makes the result independent of input row
/// order.
pub struct SumOfTreesSampler {
    cfg: TreeEnsembleConfig,
    design: Design,
    scaling: OutcomeScaling,
    degenerate: bool,
    n: usize,
    arms: usize,
    width: usize,
    /// canonical position -> original row
    order: Vec<usize>,
    y: Vec<f64>,
    /// Cutpoint ranks of the counterfactual grid, row `i * arms + (a - 1)`.
    grid_ranks: Vec<u16>,
    train_grid: Vec<u32>,
    trees: Vec<Tree>,
    assign: Vec<Vec<u32>>,
    fit: Vec<f64>,
    sigma2: f64,
    tau2: f64,
    lambda: f64,
    resid: Vec<f64>,
    stat_n: Vec<usize>,
    stat_s: Vec<f64>,
    rng: SamplerRng,
}

fn canonical_cmp(ds: &Dataset, a: usize, b: usize) -> Ordering {
    ds.treatment()[a]
        .cmp(&ds.treatment()[b])
        .then_with(|| {
            ds.continuous_row(a)
                .iter()
                .zip(ds.continuous_row(b))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
        .then_with(|| ds.discrete_row(a).cmp(ds.discrete_row(b)))
        .then_with(|| ds.outcome()[a].total_cmp(&ds.outcome()[b]))
}

pub(crate) fn fingerprint(ds: &Dataset) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    ds.n().hash(&mut h);
    ds.arms().hash(&mut h);
    ds.treatment().hash(&mut h);
    for i in 0..ds.n() {
        for v in ds.continuous_row(i) {
            v.to_bits().hash(&mut h);
        }
        ds.discrete_row(i).hash(&mut h);
        ds.outcome()[i].to_bits().hash(&mut h);
    }
    h.finish()
}

/// Residual standard deviation of a least-squares fit of `y` on the design,
/// or the sample sd of `y` when the design is too wide.
fn rough_sigma(rows: &[Vec<f64>], y: &[f64]) -> f64 {
    let n = y.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64).sqrt();
    let p = rows.first().map_or(0, |r| r.len());
    if n <= p + 1 {
        return sd;
    }
    let x = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { rows[i][j - 1] });
    let yv = DVector::from_column_slice(y);
    let svd = x.clone().svd(true, true);
    let rank = svd.rank(1e-10 * svd.singular_values.max());
    match svd.solve(&yv, 1e-10) {
        Ok(beta) if n > rank => {
            let r = yv - x * beta;
            let s = (r.norm_squared() / (n - rank) as f64).sqrt();
            if s.is_finite() && s > 0.0 {
                s
            } else {
                sd
            }
        }
        _ => sd,
    }
}

#[inline]
fn leaf_loglik(n: usize, s: f64, sigma2: f64, tau2: f64) -> f64 {
    let denom = sigma2 + n as f64 * tau2;
    0.5 * (sigma2 / denom).ln() + tau2 * s * s / (2.0 * sigma2 * denom)
}

impl SumOfTreesSampler {
    pub fn new(ds: &Dataset, cfg: &TreeEnsembleConfig) -> Result<Self> {
        cfg.validate()?;
        if ds.n() < 2 {
            return Err(Error::Data("sum-of-trees fit needs at least 2 subjects".into()));
        }
        let n = ds.n();
        let arms = ds.arms();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| canonical_cmp(ds, a, b));
        let ds = ds.select_rows(&order);

        let design = Design::from_dataset(&ds, cfg.numcut);
        let width = design.width();
        let scaling = OutcomeScaling::of(ds.outcome());
        let degenerate = !(scaling.range > 0.0);
        if degenerate {
            log::warn!("outcome has zero variance; the fit predicts the constant");
        }
        let y: Vec<f64> = if degenerate {
            vec![0.0; n]
        } else {
            ds.outcome().iter().map(|&v| scaling.to_internal(v)).collect()
        };

        let mut grid_ranks = Vec::with_capacity(n * arms * width);
        for i in 0..n {
            for a in 1..=arms {
                grid_ranks.extend(design.ranks(&design.row(&ds, i, a)));
            }
        }
        let train_grid: Vec<u32> = (0..n)
            .map(|i| (i * arms + ds.treatment()[i] - 1) as u32)
            .collect();

        let m = cfg.trees;
        let ybar = y.iter().sum::<f64>() / n as f64;
        let trees = vec![Tree::stump(ybar / m as f64); m];
        let grid = n * arms;
        let assign = vec![vec![0u32; grid]; m];
        let fit = vec![ybar; grid];

        let tau = 0.5 / (cfg.leaf_k * (m as f64).sqrt());
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| design.row(&ds, i, ds.treatment()[i]))
            .collect();
        let sigma_hat = if degenerate { 1.0 } else { rough_sigma(&rows, &y) };
        let chi = statrs::distribution::ChiSquared::new(cfg.sigma_df)
            .map_err(|e| Error::Config(e.to_string()))?;
        let lambda = sigma_hat * sigma_hat * chi.inverse_cdf(1.0 - cfg.sigma_quantile) / cfg.sigma_df;

        Ok(SumOfTreesSampler {
            cfg: cfg.clone(),
            design,
            scaling,
            degenerate,
            n,
            arms,
            width,
            order,
            y,
            grid_ranks,
            train_grid,
            trees,
            assign,
            fit,
            sigma2: sigma_hat * sigma_hat,
            tau2: tau * tau,
            lambda,
            resid: vec![0.0; n],
            stat_n: Vec::new(),
            stat_s: Vec::new(),
            rng: rng_from(cfg.seed),
        })
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    pub fn scaling(&self) -> OutcomeScaling {
        self.scaling
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Residual variance on the outcome scale.
    pub fn sigma2(&self) -> f64 {
        if self.degenerate {
            f64::EPSILON * self.scaling.min.abs().max(1.0).powi(2)
        } else {
            self.sigma2 * self.scaling.range * self.scaling.range
        }
    }

    fn to_outcome(&self, s: f64) -> f64 {
        if self.degenerate {
            self.scaling.min
        } else {
            self.scaling.to_outcome(s)
        }
    }

    /// Current fit of the training rows, outcome scale, original row order.
    pub fn training_fit(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (c, &orig) in self.order.iter().enumerate() {
            out[orig] = self.to_outcome(self.fit[self.train_grid[c] as usize]);
        }
        out
    }

    /// Current counterfactual fit, outcome scale, `n × arms` in original order.
    pub fn grid_fit(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.arms];
        for (c, &orig) in self.order.iter().enumerate() {
            for a in 0..self.arms {
                out[orig * self.arms + a] = self.to_outcome(self.fit[c * self.arms + a]);
            }
        }
        out
    }

    pub fn state(&self) -> TreeEnsembleState {
        TreeEnsembleState {
            trees: self.trees.clone(),
            sigma2: self.sigma2(),
        }
    }

    fn p_split(&self, depth: u16) -> f64 {
        self.cfg.base * (1.0 + depth as f64).powf(-self.cfg.power)
    }

    fn split_log_prior(&self, depth: u16) -> f64 {
        let pd = self.p_split(depth);
        let pc = self.p_split(depth + 1);
        pd.ln() + 2.0 * (1.0 - pc).ln() - (1.0 - pd).ln()
    }

    /// (grow, prune, change) probabilities for a tree.
    fn move_probs(&self, has_nog: bool, has_growable: bool) -> (f64, f64, f64) {
        let p = self.cfg.proposal;
        match (has_nog, has_growable) {
            (false, true) => (1.0, 0.0, 0.0),
            (false, false) => (0.0, 0.0, 0.0),
            (true, true) => (p.grow, p.prune, p.change),
            (true, false) => {
                let s = p.prune + p.change;
                (0.0, p.prune / s, p.change / s)
            }
        }
    }

    /// One full sweep: every tree updated in turn, then σ².
    pub fn step(&mut self) {
        if self.degenerate {
            return;
        }
        for t in 0..self.trees.len() {
            self.update_tree(t);
        }
        let sse: f64 = (0..self.n)
            .map(|i| (self.y[i] - self.fit[self.train_grid[i] as usize]).powi(2))
            .sum();
        let chi = ChiSquared::new(self.cfg.sigma_df + self.n as f64).expect("positive dof");
        let draw: f64 = chi.sample(&mut self.rng);
        self.sigma2 = (self.cfg.sigma_df * self.lambda + sse) / draw;
    }

    fn update_tree(&mut self, t: usize) {
        let mut tree = std::mem::replace(&mut self.trees[t], Tree::stump(0.0));
        let mut assign = std::mem::take(&mut self.assign[t]);

        for (f, &a) in self.fit.iter_mut().zip(&assign) {
            *f -= tree.node(a).value;
        }
        for i in 0..self.n {
            self.resid[i] = self.y[i] - self.fit[self.train_grid[i] as usize];
        }

        let nogs = tree.nogs();
        let growable: Vec<u32> = tree
            .leaves()
            .into_iter()
            .filter(|&id| tree.can_split(id, &self.design))
            .collect();
        let (pg, pp, _) = self.move_probs(!nogs.is_empty(), !growable.is_empty());
        let u: f64 = self.rng.random();
        if u < pg {
            self.propose_grow(&mut tree, &mut assign, &growable, pg);
        } else if u < pg + pp {
            self.propose_prune(&mut tree, &mut assign, &nogs, pp);
        } else if !nogs.is_empty() {
            self.propose_change(&mut tree, &mut assign, &nogs, !growable.is_empty());
        }

        self.draw_leaves(&mut tree, &assign);
        for (f, &a) in self.fit.iter_mut().zip(&assign) {
            *f += tree.node(a).value;
        }
        self.trees[t] = tree;
        self.assign[t] = assign;
    }

    #[inline]
    fn rank(&self, grid_row: usize, var: u16) -> u16 {
        self.grid_ranks[grid_row * self.width + var as usize]
    }

    /// Training count and residual sum on each side of rule (var, cut) among
    /// rows currently in any of `nodes`.
    fn split_stats(&self, assign: &[u32], nodes: &[u32], var: u16, cut: u16) -> (usize, f64, usize, f64) {
        let (mut nl, mut sl, mut nr, mut sr) = (0, 0.0, 0, 0.0);
        for (i, &g) in self.train_grid.iter().enumerate() {
            let g = g as usize;
            if nodes.contains(&assign[g]) {
                if self.rank(g, var) <= cut {
                    nl += 1;
                    sl += self.resid[i];
                } else {
                    nr += 1;
                    sr += self.resid[i];
                }
            }
        }
        (nl, sl, nr, sr)
    }

    fn node_stats(&self, assign: &[u32], node: u32) -> (usize, f64) {
        let (mut n, mut s) = (0, 0.0);
        for (i, &g) in self.train_grid.iter().enumerate() {
            if assign[g as usize] == node {
                n += 1;
                s += self.resid[i];
            }
        }
        (n, s)
    }

    fn pick_rule(&mut self, tree: &Tree, node: u32) -> Option<(u16, u16)> {
        let vars = tree.splittable_vars(node, &self.design);
        if vars.is_empty() {
            return None;
        }
        let v = vars[self.rng.random_range(0..vars.len())];
        let (lo, hi) = tree.cut_range(node, v, self.design.n_cuts(v as usize));
        let c = self.rng.random_range(lo..hi) as u16;
        Some((v, c))
    }

    fn propose_grow(&mut self, tree: &mut Tree, assign: &mut [u32], growable: &[u32], pg: f64) {
        let eta = growable[self.rng.random_range(0..growable.len())];
        let Some((v, c)) = self.pick_rule(tree, eta) else {
            return;
        };
        let log_u = self.rng.random::<f64>().ln();
        let (nl, sl, nr, sr) = self.split_stats(assign, &[eta], v, c);
        if nl < self.cfg.min_leaf || nr < self.cfg.min_leaf {
            return;
        }
        let depth = tree.node(eta).depth;
        let ll = leaf_loglik(nl, sl, self.sigma2, self.tau2) + leaf_loglik(nr, sr, self.sigma2, self.tau2)
            - leaf_loglik(nl + nr, sl + sr, self.sigma2, self.tau2);
        let (l, r) = tree.split(eta, v, c);
        let nogs_after = tree.nogs().len();
        let growable_after = tree.leaves().iter().any(|&id| tree.can_split(id, &self.design));
        let (_, pp_after, _) = self.move_probs(true, growable_after);
        let log_r = self.split_log_prior(depth)
            + ll
            + pp_after.ln()
            - pg.ln()
            + (growable.len() as f64).ln()
            - (nogs_after as f64).ln();
        if log_u < log_r {
            for g in 0..assign.len() {
                if assign[g] == eta {
                    assign[g] = if self.rank(g, v) <= c { l } else { r };
                }
            }
        } else {
            tree.collapse(eta);
        }
    }

    fn propose_prune(&mut self, tree: &mut Tree, assign: &mut [u32], nogs: &[u32], pp: f64) {
        let eta = nogs[self.rng.random_range(0..nogs.len())];
        let log_u = self.rng.random::<f64>().ln();
        let node = tree.node(eta).clone();
        let (nl, sl) = self.node_stats(assign, node.left);
        let (nr, sr) = self.node_stats(assign, node.right);
        let ll = leaf_loglik(nl + nr, sl + sr, self.sigma2, self.tau2)
            - leaf_loglik(nl, sl, self.sigma2, self.tau2)
            - leaf_loglik(nr, sr, self.sigma2, self.tau2);
        tree.collapse(eta);
        let growable_after = tree
            .leaves()
            .into_iter()
            .filter(|&id| tree.can_split(id, &self.design))
            .count();
        let has_nog_after = !tree.nogs().is_empty();
        let (pg_after, _, _) = self.move_probs(has_nog_after, growable_after > 0);
        let log_r = -self.split_log_prior(node.depth) + ll + pg_after.ln() - pp.ln()
            + (nogs.len() as f64).ln()
            - (growable_after as f64).ln();
        if log_u < log_r {
            for a in assign.iter_mut() {
                if *a == node.left || *a == node.right {
                    *a = eta;
                }
            }
        } else {
            let restored = tree.split(eta, node.var, node.cut);
            debug_assert_eq!(restored, (node.left, node.right));
        }
    }

    fn propose_change(&mut self, tree: &mut Tree, assign: &mut [u32], nogs: &[u32], growable_before: bool) {
        let eta = nogs[self.rng.random_range(0..nogs.len())];
        let Some((v, c)) = self.pick_rule(tree, eta) else {
            return;
        };
        let log_u = self.rng.random::<f64>().ln();
        let node = tree.node(eta).clone();
        if (v, c) == (node.var, node.cut) {
            return;
        }
        let (l, r) = (node.left, node.right);
        let (ol, osl) = self.node_stats(assign, l);
        let (or, osr) = self.node_stats(assign, r);
        let (nl, sl, nr, sr) = self.split_stats(assign, &[l, r], v, c);
        if nl < self.cfg.min_leaf || nr < self.cfg.min_leaf {
            return;
        }
        let ll = leaf_loglik(nl, sl, self.sigma2, self.tau2) + leaf_loglik(nr, sr, self.sigma2, self.tau2)
            - leaf_loglik(ol, osl, self.sigma2, self.tau2)
            - leaf_loglik(or, osr, self.sigma2, self.tau2);
        {
            let n = tree.node_mut(eta);
            n.var = v;
            n.cut = c;
        }
        let growable_after = tree.leaves().iter().any(|&id| tree.can_split(id, &self.design));
        let (_, _, pc_before) = self.move_probs(true, growable_before);
        let (_, _, pc_after) = self.move_probs(true, growable_after);
        let log_r = ll + pc_after.ln() - pc_before.ln();
        if log_u < log_r {
            for g in 0..assign.len() {
                if assign[g] == l || assign[g] == r {
                    assign[g] = if self.rank(g, v) <= c { l } else { r };
                }
            }
        } else {
            let n = tree.node_mut(eta);
            n.var = node.var;
            n.cut = node.cut;
        }
    }

    fn draw_leaves(&mut self, tree: &mut Tree, assign: &[u32]) {
        let len = tree.arena_len();
        self.stat_n.clear();
        self.stat_n.resize(len, 0);
        self.stat_s.clear();
        self.stat_s.resize(len, 0.0);
        for (i, &g) in self.train_grid.iter().enumerate() {
            let id = assign[g as usize] as usize;
            self.stat_n[id] += 1;
            self.stat_s[id] += self.resid[i];
        }
        for id in tree.leaves() {
            let n = self.stat_n[id as usize] as f64;
            let s = self.stat_s[id as usize];
            let denom = self.sigma2 + n * self.tau2;
            let mean = self.tau2 * s / denom;
            let sd = (self.sigma2 * self.tau2 / denom).sqrt();
            let z: f64 = self.rng.sample(StandardNormal);
            tree.node_mut(id).value = mean + sd * z;
        }
    }
}

/// Posterior summary of a sum-of-trees fit.
#[derive(Debug, Clone)]
pub struct EnsemblePosterior {
    pub design: Design,
    pub scaling: OutcomeScaling,
    pub arms: usize,
    /// Residual variance per retained draw, outcome scale.
    pub sigma2: Vec<f64>,
    /// Per retained draw, the mean over subjects of each arm's prediction.
    pub arm_means: Vec<Vec<f64>>,
    /// Retained ensembles, when requested.
    pub states: Option<Vec<TreeEnsembleState>>,
    pub(crate) grid_mean: Vec<f64>,
    pub(crate) fingerprint: u64,
    degenerate: bool,
}

impl EnsemblePosterior {
    pub fn draws(&self) -> usize {
        self.sigma2.len()
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }
}

/// Runs the sampler and keeps `iterations - burn_in` posterior draws.
pub fn fit_sum_of_trees(ds: &Dataset, cfg: &TreeEnsembleConfig) -> Result<EnsemblePosterior> {
    if ds.n() < 10 {
        return Err(Error::Data(format!(
            "sum-of-trees fit needs at least 10 subjects, got {}",
            ds.n()
        )));
    }
    let mut sampler = SumOfTreesSampler::new(ds, cfg)?;
    let arms = ds.arms();
    let n = ds.n();
    let retained = cfg.retained();
    let mut sum = vec![0.0; n * arms];
    let mut sigma2 = Vec::with_capacity(retained);
    let mut arm_means = Vec::with_capacity(retained);
    let mut states = cfg.keep_trees.then(|| Vec::with_capacity(retained));
    for it in 0..cfg.iterations {
        sampler.step();
        if it < cfg.burn_in {
            continue;
        }
        let mut means = vec![0.0; arms];
        for c in 0..n {
            for a in 0..arms {
                let v = sampler.fit[c * arms + a];
                sum[c * arms + a] += v;
                means[a] += v;
            }
        }
        arm_means.push(means.iter().map(|m| sampler.to_outcome(m / n as f64)).collect());
        sigma2.push(sampler.sigma2());
        if let Some(s) = states.as_mut() {
            s.push(sampler.state());
        }
    }
    let mut grid_mean = vec![0.0; n * arms];
    for (c, &orig) in sampler.order.iter().enumerate() {
        for a in 0..arms {
            grid_mean[orig * arms + a] = sampler.to_outcome(sum[c * arms + a] / retained as f64);
        }
    }
    Ok(EnsemblePosterior {
        design: sampler.design.clone(),
        scaling: sampler.scaling,
        arms,
        sigma2,
        arm_means,
        states,
        grid_mean,
        fingerprint: fingerprint(ds),
        degenerate: sampler.degenerate,
    })
}
