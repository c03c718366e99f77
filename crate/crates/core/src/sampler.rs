//! The sampling loop.
//!
//! Candidates are drawn from the proposal in batches. Each batch raises the
//! empirical supremum `C` to the largest observed log-ratio before any of its
//! candidates is accepted. A drifting lower reference `C_low` and any rise of
//! `C` flag the proposal for refinement, and the proposal is periodically
//! refit by weighted EM as accepted samples accumulate. A new proposal starts
//! a new epoch with `C` reset to its maximum log-ratio over every cached
//! point. After the run, every accepted sample is rechecked against the final
//! `C` of its epoch.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::init::{initialize, InitOptions, InitReport};
use crate::par::Execution;
use crate::points::Points;
use crate::proposal::{distinct_weighted, fit_em, open_unit, EmOptions, GmmProposal};
use crate::refine::{refine, RefineOptions, RefineResult};
use crate::stats::TestResult;
use crate::target::LogTarget;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    /// Number of samples to return.
    #[serde(rename = "T", alias = "target_count")]
    pub target_count: usize,
    pub seed: u64,
    pub n_base: f64,
    pub c_low_inflate: f64,
    pub accept_weight: f64,
    pub gmm_growth: f64,
    pub gmm_k_cap_divisor: f64,
    pub refine_steps: usize,
    pub refine_checkpoints: Vec<usize>,
    pub refine_lr: f64,
    /// Abort once target evaluations exceed this multiple of `T`.
    pub max_evals_per_sample: f64,
    pub init: InitOptions,
    pub em: EmOptions,
    pub execution: Execution,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            target_count: 10_000,
            seed: 0,
            n_base: 500.0,
            c_low_inflate: 1.05,
            accept_weight: 10.0,
            gmm_growth: 1.5,
            gmm_k_cap_divisor: 15.0,
            refine_steps: 800,
            refine_checkpoints: vec![100, 200, 400, 800],
            refine_lr: 0.1,
            max_evals_per_sample: 1e6,
            init: InitOptions::default(),
            em: EmOptions::default(),
            execution: Execution::default(),
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.target_count == 0 {
            return Err(Error::Config("T must be at least 1".into()));
        }
        let positive = [
            ("n_base", self.n_base),
            ("c_low_inflate", self.c_low_inflate),
            ("accept_weight", self.accept_weight),
            ("gmm_growth", self.gmm_growth),
            ("gmm_k_cap_divisor", self.gmm_k_cap_divisor),
            ("refine_lr", self.refine_lr),
            ("max_evals_per_sample", self.max_evals_per_sample),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn refine_options(&self) -> RefineOptions {
        RefineOptions {
            steps: self.refine_steps,
            checkpoints: self.refine_checkpoints.clone(),
            lr: self.refine_lr,
        }
    }
}

/// Candidates per batch: `ceil(n_base * max(1, ln(K + 1)))`.
pub fn batch_size(n_base: f64, k: usize) -> usize {
    (n_base * ((k as f64 + 1.0).ln()).max(1.0)).ceil() as usize
}

/// Components for a refit: `max(1, floor(min(log2 |A|, |A| / (d * divisor))))`.
pub fn refit_components(accepted: usize, d: usize, divisor: f64) -> usize {
    let a = accepted as f64;
    let k = a.log2().min(a / (d as f64 * divisor)).floor();
    if k.is_finite() && k >= 1.0 {
        k as usize
    } else {
        1
    }
}

/// Whether a refit is due at `accepted` samples.
pub fn refit_due(accepted: usize, at_last_fit: usize, k: usize, growth: f64) -> bool {
    accepted >= 1 && (accepted as f64 >= growth * at_last_fit as f64 || (accepted as f64).ln() > 2.0 * k as f64)
}

/// Acceptance decisions: `ln u_i <= ratio_i - c_hat_log`.
pub fn accept_mask(log_ratios: &[f64], u_log: &[f64], c_hat_log: f64) -> Vec<bool> {
    log_ratios.iter().zip(u_log).map(|(r, u)| *u <= r - c_hat_log).collect()
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Warnings {
    /// Draws from components with (near) zero mass in the domain.
    pub degenerate_draws: usize,
    /// Draws to which the proposal itself assigned zero density.
    pub zero_proposal_density: usize,
    pub refits_skipped: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub epoch: usize,
    pub size: usize,
    pub accepted: usize,
    /// Largest log-ratio in the batch.
    pub c_tilde_log: f64,
    /// Empirical supremum after the batch.
    pub c_hat_log: f64,
    pub refine_flag: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Epoch {
    pub proposal: GmmProposal,
    /// Supremum the epoch started from (`-inf` for the first).
    pub start_c_log: f64,
    /// Supremum when the epoch ended.
    pub final_c_log: f64,
    pub batches: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineRecord {
    /// Batches completed when refinement ran.
    pub after_batch: usize,
    pub epoch: usize,
    pub c_hat_log: f64,
    pub current_before: f64,
    pub current_after: f64,
    pub current_checkpoint: Option<usize>,
    pub refit_components: Option<usize>,
    pub refit_before: Option<f64>,
    pub refit_after: Option<f64>,
    pub switched: bool,
}

/// Everything the loop has seen. Points are cached in draw order.
#[derive(Clone, Debug)]
pub struct SamplerState {
    pub proposal: GmmProposal,
    pub points: Points,
    pub logf: Vec<f64>,
    pub u_log: Vec<f64>,
    pub epoch_of: Vec<usize>,
    /// Indices into `points` of accepted samples, in acceptance order.
    pub accepted: Vec<usize>,
    pub c_hat_log: f64,
    pub c_low_log: f64,
    pub accepted_at_last_fit: usize,
    pub epochs: Vec<Epoch>,
    pub batches: Vec<BatchRecord>,
    pub refinements: Vec<RefineRecord>,
    pub warnings: Warnings,
}

impl SamplerState {
    pub fn new(proposal: GmmProposal) -> Self {
        let d = proposal.dims();
        SamplerState {
            epochs: vec![Epoch {
                proposal: proposal.clone(),
                start_c_log: f64::NEG_INFINITY,
                final_c_log: f64::NEG_INFINITY,
                batches: 0,
            }],
            proposal,
            points: Points::new(d),
            logf: Vec::new(),
            u_log: Vec::new(),
            epoch_of: Vec::new(),
            accepted: Vec::new(),
            c_hat_log: f64::NEG_INFINITY,
            c_low_log: f64::INFINITY,
            accepted_at_last_fit: 0,
            batches: Vec::new(),
            refinements: Vec::new(),
            warnings: Warnings::default(),
        }
    }

    pub fn epoch(&self) -> usize {
        self.epochs.len() - 1
    }

    /// Starts a new epoch under `proposal` with supremum `c_log`.
    pub fn switch(&mut self, proposal: GmmProposal, c_log: f64) {
        self.proposal = proposal.clone();
        self.c_hat_log = c_log;
        self.c_low_log = c_log;
        self.epochs.push(Epoch {
            proposal,
            start_c_log: c_log,
            final_c_log: c_log,
            batches: 0,
        });
    }
}

/// Draws one batch, updates the suprema and accepts against the updated `C`.
pub fn batch_step<R: Rng + ?Sized>(st: &mut SamplerState, t: &LogTarget, cfg: &SamplerConfig, rng: &mut R) -> Result<BatchRecord> {
    let exec = cfg.execution;
    let b = batch_size(cfg.n_base, st.proposal.components());
    let draws = st.proposal.sample(rng, b);
    st.warnings.degenerate_draws += draws.degenerate;
    let u_log: Vec<f64> = (0..b).map(|_| open_unit(rng).ln()).collect();
    let logf = t.log_density_batch(&draws.points, exec)?;
    let logg = st.proposal.log_density_batch(&draws.points, exec);

    let mut ratios = Vec::with_capacity(b);
    for (lf, lg) in logf.iter().zip(&logg) {
        if *lg == f64::NEG_INFINITY {
            st.warnings.zero_proposal_density += 1;
            ratios.push(f64::NEG_INFINITY);
        } else {
            ratios.push(lf - lg);
        }
    }
    let c_tilde = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let refine_flag = c_tilde > st.c_hat_log || c_tilde > st.c_low_log;
    st.c_hat_log = st.c_hat_log.max(c_tilde);
    st.c_low_log = (st.c_low_log + cfg.c_low_inflate.ln()).min(c_tilde);

    let mask = accept_mask(&ratios, &u_log, st.c_hat_log);
    let epoch = st.epoch();
    let base = st.points.len();
    st.points.extend(&draws.points);
    st.logf.extend_from_slice(&logf);
    st.u_log.extend_from_slice(&u_log);
    st.epoch_of.extend(std::iter::repeat_n(epoch, b));
    let mut accepted = 0;
    for (i, ok) in mask.iter().enumerate() {
        if *ok {
            st.accepted.push(base + i);
            accepted += 1;
        }
    }
    let current = st.epochs.last_mut().expect("at least one epoch");
    current.final_c_log = st.c_hat_log;
    current.batches += 1;

    let rec = BatchRecord {
        epoch,
        size: b,
        accepted,
        c_tilde_log: c_tilde,
        c_hat_log: st.c_hat_log,
        refine_flag,
    };
    st.batches.push(rec.clone());
    Ok(rec)
}

/// Weighted EM refit over every cached point when one is due.
///
/// Weights are `exp(log f - max log f)`, times `accept_weight` for accepted
/// samples.
pub fn maybe_refit_gmm<R: Rng + ?Sized>(st: &mut SamplerState, cfg: &SamplerConfig, rng: &mut R) -> Option<GmmProposal> {
    let n_acc = st.accepted.len();
    if !refit_due(n_acc, st.accepted_at_last_fit, st.proposal.components(), cfg.gmm_growth) {
        return None;
    }
    st.accepted_at_last_fit = n_acc;
    let k = refit_components(n_acc, st.points.dims(), cfg.gmm_k_cap_divisor);
    let top = st.logf.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        st.warnings.refits_skipped += 1;
        return None;
    }
    let mut w: Vec<f64> = st.logf.iter().map(|lf| (lf - top).exp()).collect();
    for &i in &st.accepted {
        w[i] *= cfg.accept_weight;
    }
    if distinct_weighted(&st.points, &w, k) < k {
        st.warnings.refits_skipped += 1;
        return None;
    }
    match fit_em(&st.points, &w, k, st.proposal.domain(), cfg.em, cfg.execution, rng) {
        Ok(fit) => Some(fit.proposal),
        Err(_) => {
            st.warnings.refits_skipped += 1;
            None
        }
    }
}

/// Refines the current proposal, and the refit candidate when there is one,
/// and switches to the lowest resulting bound if it does not exceed `C`.
pub fn refine_and_switch(st: &mut SamplerState, candidate: Option<GmmProposal>, cfg: &SamplerConfig) -> bool {
    let opts = cfg.refine_options();
    let exec = cfg.execution;
    let cur = refine(&st.proposal, &st.points, &st.logf, st.c_hat_log, &opts, exec);
    let alt: Option<(usize, RefineResult)> =
        candidate.map(|g| (g.components(), refine(&g, &st.points, &st.logf, st.c_hat_log, &opts, exec)));

    let mut best: Option<&RefineResult> = cur.improved.then_some(&cur);
    if let Some((_, r)) = &alt {
        if r.improved && best.is_none_or(|b| r.achieved_log_ratio_max < b.achieved_log_ratio_max) {
            best = Some(r);
        }
    }
    let chosen = best
        .filter(|r| r.achieved_log_ratio_max <= st.c_hat_log && r.proposal.params() != st.proposal.params())
        .map(|r| (r.proposal.clone(), r.achieved_log_ratio_max));

    st.refinements.push(RefineRecord {
        after_batch: st.batches.len(),
        epoch: st.epoch(),
        c_hat_log: st.c_hat_log,
        current_before: cur.initial_log_ratio_max,
        current_after: cur.achieved_log_ratio_max,
        current_checkpoint: cur.checkpoint_chosen,
        refit_components: alt.as_ref().map(|a| a.0),
        refit_before: alt.as_ref().map(|a| a.1.initial_log_ratio_max),
        refit_after: alt.as_ref().map(|a| a.1.achieved_log_ratio_max),
        switched: chosen.is_some(),
    });
    match chosen {
        Some((g, c)) => {
            st.switch(g, c);
            true
        }
        None => false,
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub checked: usize,
    /// Positions in acceptance order of samples that fail the recheck.
    pub violations: Vec<usize>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Rechecks every accepted sample against the final supremum of its epoch.
pub fn audit(st: &SamplerState) -> AuditReport {
    let mut violations = Vec::new();
    for (pos, &i) in st.accepted.iter().enumerate() {
        let ep = &st.epochs[st.epoch_of[i]];
        let lg = ep.proposal.log_density(st.points.row(i));
        if st.u_log[i] > st.logf[i] - ep.final_c_log - lg {
            violations.push(pos);
        }
    }
    AuditReport {
        checked: st.accepted.len(),
        violations,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpochReport {
    #[serde(rename = "final_C_log")]
    pub final_c_log: f64,
    #[serde(rename = "start_C_log")]
    pub start_c_log: f64,
    pub batches: usize,
    pub proposal: GmmProposal,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    #[serde(rename = "T")]
    pub target_count: usize,
    pub seed: u64,
    /// `T / f_evals`, initialization included.
    pub acceptance_rate: f64,
    pub f_evals: u64,
    pub draws: usize,
    pub accepted_total: usize,
    pub init_report: InitReport,
    pub epochs: Vec<EpochReport>,
    pub batches: Vec<BatchRecord>,
    pub refinements: Vec<RefineRecord>,
    pub audit: AuditReport,
    pub warnings: Warnings,
    pub config: SamplerConfig,
    /// Distributional test against a reference sample, when one was run.
    pub test: Option<TestResult>,
    pub wall_time: f64,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    /// The first `T` accepted samples.
    pub samples: Points,
    pub report: RunReport,
    pub state: SamplerState,
}

/// Runs the sampler until `cfg.target_count` samples are accepted.
///
/// Evaluations are counted on a private handle of `t`, so the caller's
/// counter is left alone.
pub fn run(t: &LogTarget, cfg: &SamplerConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let clock = Instant::now();
    let t = t.fresh();
    let target_count = cfg.target_count;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (g0, init_report) = initialize(&t, &cfg.init, cfg.execution, &mut rng)?;
    let mut st = SamplerState::new(g0);
    let limit = cfg.max_evals_per_sample * target_count as f64;

    while st.accepted.len() < target_count {
        if t.evals() as f64 > limit {
            return Err(Error::Aborted {
                f_evals: t.evals(),
                accepted: st.accepted.len(),
            });
        }
        let rec = batch_step(&mut st, &t, cfg, &mut rng)?;
        if st.accepted.len() >= target_count {
            break;
        }
        let candidate = maybe_refit_gmm(&mut st, cfg, &mut rng);
        if rec.refine_flag || candidate.is_some() {
            refine_and_switch(&mut st, candidate, cfg);
        }
    }

    let samples = st.points.select(&st.accepted[..target_count]);
    let f_evals = t.evals();
    let report = RunReport {
        target_count,
        seed: cfg.seed,
        acceptance_rate: target_count as f64 / f_evals as f64,
        f_evals,
        draws: st.points.len(),
        accepted_total: st.accepted.len(),
        init_report,
        epochs: st
            .epochs
            .iter()
            .map(|e| EpochReport {
                final_c_log: e.final_c_log,
                start_c_log: e.start_c_log,
                batches: e.batches,
                proposal: e.proposal.clone(),
            })
            .collect(),
        batches: st.batches.clone(),
        refinements: st.refinements.clone(),
        audit: audit(&st),
        warnings: st.warnings.clone(),
        config: cfg.clone(),
        test: None,
        wall_time: clock.elapsed().as_secs_f64(),
    };
    Ok(RunOutput { samples, report, state: st })
}
