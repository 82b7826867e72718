//! The separation experiment: a sequence no catalog strategy beats, on which
//! a randomized gambler built by the fireworks protocol succeeds for a
//! positive fraction of seeds.

use gamblers_core::catalog::Catalog;
use gamblers_core::diagonalization::{DeltaBuilder, DeltaResult, DiagError, GapSpec, StageRecord};
use gamblers_core::finite::FiniteMartingale;
use gamblers_core::fireworks::{
    dense_capital_set, fireworks_run, generic_martingale, DenseCapitalSet, Enumerator, FireworksError, FireworksParams,
    FireworksRun, MartingaleOrder,
};
use gamblers_core::martingale::{play_bits, Budget};
use gamblers_core::sequence::derive_seed;
use gamblers_core::Rat;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::config::{load_catalog, ConfigError, SeparationConfig};
use crate::output::record;

#[derive(Debug, Error)]
pub enum SeparationError {
    #[error("stage {stage} (code {code}): no estimation seed met its requirement within {rounds} rounds")]
    Inconclusive { stage: usize, code: usize, rounds: usize },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Diag(#[from] DiagError),
    #[error(transparent)]
    Fireworks(#[from] FireworksError),
}

/// Capital target `k_e = max(2, e)` for the sequence of code `e`.
pub fn capital_target(code: usize) -> Rat {
    Rat::int(code.max(2) as i64)
}

/// 1-based rank of the `1 − 2^{−e−1}` empirical quantile among `count`
/// samples.
pub fn quantile_rank(count: usize, code: usize) -> usize {
    let shift = (code + 1).min(100) as u32;
    let d = 1u128 << shift;
    let num = count as u128 * (d - 1);
    num.div_ceil(d).max(1) as usize
}

/// The empirical threshold `s_e`: the quantile order statistic, at least 1.
pub fn empirical_threshold(samples: &[usize], code: usize) -> Option<usize> {
    if samples.is_empty() {
        return None;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    let rank = quantile_rank(sorted.len(), code).min(sorted.len());
    Some(sorted[rank - 1].max(1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: usize,
    pub code: usize,
    pub sequence: String,
    pub sigma_len: usize,
    pub introduced: Option<String>,
    pub weight: Option<Rat>,
    pub target: Rat,
    pub estimation_runs: usize,
    pub met: usize,
    /// Chosen gap `s_e`.
    pub threshold: usize,
    /// Meeting seeds whose first hit is at most `s_e`.
    pub covered: usize,
    pub coherent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    pub id: String,
    pub weight: Rat,
    pub bound: Rat,
    pub max_capital: Option<Rat>,
    pub diverged_at: Option<usize>,
    pub within_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub seeds: usize,
    pub met_all: usize,
    pub mu_g: Rat,
    pub mu_g_approx: f64,
    pub target: Rat,
    pub reached: usize,
    /// Fraction of meeting seeds whose generic martingale exceeds the
    /// target on Δ.
    pub reached_fraction: Rat,
    pub reached_fraction_approx: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeparationReport {
    pub config: SeparationConfig,
    pub stages: Vec<StageReport>,
    pub tail_stages: Vec<StageRecord>,
    pub delta: DeltaResult,
    pub strategies: Vec<StrategyReport>,
    pub evaluation: EvaluationReport,
}

impl SeparationReport {
    pub fn catalog_bounded(&self) -> bool {
        self.strategies.iter().all(|s| s.within_bound)
    }

    pub fn thresholds_coherent(&self) -> bool {
        self.stages.iter().all(|s| s.coherent)
    }

    /// Stable JSONL-ready records.
    pub fn records(&self) -> Vec<Value> {
        #[derive(Serialize)]
        struct DeltaLine<'a> {
            length: usize,
            bits: String,
            tail_stages: &'a [StageRecord],
        }
        let mut out = vec![record("config", &self.config)];
        out.extend(self.stages.iter().map(|s| record("stage", s)));
        out.push(record(
            "delta",
            &DeltaLine {
                length: self.delta.bits.len(),
                bits: self.delta.bits.to_string(),
                tail_stages: &self.tail_stages,
            },
        ));
        out.extend(self.strategies.iter().map(|s| record("strategy", s)));
        out.push(record("evaluation", &self.evaluation));
        out
    }
}

fn params(cfg: &SeparationConfig, requirements: usize) -> FireworksParams {
    FireworksParams {
        thresholds: vec![cfg.counter_threshold; requirements],
        rounds: cfg.rounds,
        budget_growth: cfg.budget_growth,
    }
}

fn run_with(
    cfg: &SeparationConfig,
    reqs: &[DenseCapitalSet],
    seed: u64,
) -> Result<FireworksRun<FiniteMartingale>, FireworksError> {
    let refs: Vec<&dyn Enumerator<FiniteMartingale>> = reqs.iter().map(|w| w as &dyn Enumerator<_>).collect();
    fireworks_run(&MartingaleOrder, &refs, &params(cfg, reqs.len()), seed)
}

/// Runs the whole pipeline; a pure function of the config.
pub fn separation_experiment(cfg: &SeparationConfig) -> Result<SeparationReport, SeparationError> {
    cfg.validate()?;
    let catalog: Catalog = load_catalog(cfg.catalog.as_deref())?;
    let mut builder = DeltaBuilder::new(catalog.strategies.clone())?;
    let mut reqs: Vec<DenseCapitalSet> = Vec::new();
    let mut stages = Vec::new();
    for n in 0..cfg.stages {
        let pending = builder.begin_stage()?;
        let target = capital_target(pending.code);
        reqs.push(dense_capital_set(pending.sequence.clone(), target.clone()));
        let label = format!("estimate/{n}");
        let mut samples = Vec::new();
        for i in 0..cfg.estimation_seeds {
            let run = run_with(cfg, &reqs, derive_seed(cfg.master_seed, &label, i as u64))?;
            if run.statuses[n].is_met() {
                let hit = reqs[n]
                    .first_hit(run.final_condition())
                    .expect("a met requirement has a hit");
                samples.push(hit);
            }
        }
        let threshold = empirical_threshold(&samples, pending.code).ok_or(SeparationError::Inconclusive {
            stage: n,
            code: pending.code,
            rounds: cfg.rounds,
        })?;
        let covered = samples.iter().filter(|&&l| l <= threshold).count();
        let rec = builder.commit_stage(threshold)?;
        stages.push(StageReport {
            stage: n,
            code: rec.code,
            sequence: pending.sequence.id(),
            sigma_len: rec.sigma_len,
            introduced: rec.introduced.clone(),
            weight: rec.weight.clone(),
            target,
            estimation_runs: cfg.estimation_seeds,
            met: samples.len(),
            threshold,
            covered,
            coherent: covered >= quantile_rank(samples.len(), rec.code),
        });
    }
    let mut tail_stages = Vec::new();
    while !builder.catalog_exhausted() || builder.sigma().len() < cfg.depth {
        tail_stages.push(builder.stage(&GapSpec::Constant(cfg.tail_gap))?);
    }
    let delta = builder.finish();

    let strategies = delta
        .family
        .iter()
        .map(|(id, q)| {
            let d = catalog.strategy(id).expect("family members come from the catalog");
            let t = play_bits(&d, &delta.bits, "delta", Budget::UNLIMITED);
            let bound = q.recip();
            let max_capital = t.max_converged().cloned();
            StrategyReport {
                id: id.clone(),
                weight: q.clone(),
                within_bound: max_capital.as_ref().is_none_or(|m| m <= &bound),
                bound,
                max_capital,
                diverged_at: t.first_divergence(),
            }
        })
        .collect();

    let target = stages
        .iter()
        .map(|s| s.target.clone())
        .max()
        .expect("at least one stage");
    let mut met_all = 0;
    let mut reached = 0;
    for i in 0..cfg.evaluation_seeds {
        let run = run_with(cfg, &reqs, derive_seed(cfg.master_seed, "evaluate", i as u64))?;
        if !run.all_met() {
            continue;
        }
        met_all += 1;
        let g = generic_martingale(&run);
        let n = delta.bits.len().min(run.final_condition().length());
        let t = play_bits(&g, &delta.bits.prefix(n), "delta", Budget::UNLIMITED);
        if t.max_converged().is_some_and(|m| m > &target) {
            reached += 1;
        }
    }
    let frac = |a: usize, b: usize| {
        if b == 0 {
            Rat::zero()
        } else {
            Rat::frac(a as i64, b as i64)
        }
    };
    let mu_g = frac(met_all, cfg.evaluation_seeds);
    let reached_fraction = frac(reached, met_all);
    let evaluation = EvaluationReport {
        seeds: cfg.evaluation_seeds,
        met_all,
        mu_g_approx: mu_g.to_f64(),
        mu_g,
        target,
        reached,
        reached_fraction_approx: reached_fraction.to_f64(),
        reached_fraction,
    };
    Ok(SeparationReport {
        config: cfg.clone(),
        stages,
        tail_stages,
        delta,
        strategies,
        evaluation,
    })
}
