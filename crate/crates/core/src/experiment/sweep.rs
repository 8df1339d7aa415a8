//! Comparison grids: ModShift-Max against Gaussian and Laplace injection
//! at `β², λ² ∈ {0.1, 1}` and no protection, and the three shift schemes
//! against each other. Every mechanism runs on the same data and channel
//! noise for a given seed.

use serde::Serialize;

use crate::baselines::InjectionKind;
use crate::error::Result;
use crate::experiment::config::ExperimentConfig;
use crate::experiment::data::generate_data;
use crate::experiment::runner::{average_traces, run_with_data, RoundTrace, RunSummary};
use crate::rng::SeedTree;
use crate::scalar::Scalar;
use crate::shift::SchemeKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Figure {
    /// ModShift against noise injection.
    Injection,
    /// Shift schemes against each other.
    Schemes,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridEntry {
    pub label: String,
    pub figures: Vec<Figure>,
    pub scheme: SchemeKind,
    pub baseline: Option<(InjectionKind, f64)>,
}

impl GridEntry {
    fn shift(scheme: SchemeKind, figures: Vec<Figure>) -> Self {
        Self {
            label: scheme.name().into(),
            figures,
            scheme,
            baseline: None,
        }
    }

    fn injection(kind: InjectionKind, param_sq: f64) -> Self {
        Self {
            label: format!("{kind}_{param_sq}"),
            figures: vec![Figure::Injection],
            scheme: SchemeKind::None,
            baseline: Some((kind, param_sq)),
        }
    }

    /// `base` with this entry's mechanism and the given seed.
    pub fn configure(&self, base: &ExperimentConfig, seed: u64) -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            scheme: self.scheme,
            custom_gamma: None,
            random_agent_gammas: false,
            baseline_kind: None,
            baseline_beta_sq: None,
            baseline_lambda_sq: None,
            master_seed: seed,
            ..base.clone()
        };
        if let Some((kind, sq)) = self.baseline {
            cfg.baseline_kind = Some(kind);
            match kind {
                InjectionKind::Gaussian => cfg.baseline_beta_sq = Some(sq),
                InjectionKind::Laplace => cfg.baseline_lambda_sq = Some(sq),
            }
        }
        cfg
    }
}

/// Union of both grids; scheme-none and Max appear once, tagged with both figures.
pub fn default_grid() -> Vec<GridEntry> {
    let both = vec![Figure::Injection, Figure::Schemes];
    vec![
        GridEntry::shift(SchemeKind::Max, both.clone()),
        GridEntry::shift(SchemeKind::Mean, vec![Figure::Schemes]),
        GridEntry::shift(SchemeKind::Comp, vec![Figure::Schemes]),
        GridEntry::injection(InjectionKind::Gaussian, 1.0),
        GridEntry::injection(InjectionKind::Gaussian, 0.1),
        GridEntry::injection(InjectionKind::Laplace, 1.0),
        GridEntry::injection(InjectionKind::Laplace, 0.1),
        GridEntry::shift(SchemeKind::None, both),
    ]
}

#[derive(Debug, Clone, Serialize)]
pub struct EntryResult {
    pub label: String,
    pub figures: Vec<Figure>,
    pub runs: Vec<RunSummary>,
    pub mean_final_loss_eve: f64,
    pub mean_final_loss_bob: f64,
    pub mean_final_shift_vs_bob: f64,
    pub mean_final_shift_vs_wstar: f64,
    #[serde(skip)]
    pub traces: Vec<Vec<RoundTrace>>,
}

impl EntryResult {
    pub fn mean_traces(&self) -> Vec<RoundTrace> {
        average_traces(&self.traces)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub seeds: Vec<u64>,
    pub entries: Vec<EntryResult>,
}

impl SweepResult {
    pub fn entry(&self, label: &str) -> Option<&EntryResult> {
        self.entries.iter().find(|e| e.label == label)
    }
}

/// Seeds `base.master_seed, base.master_seed + 1, …`.
pub fn sweep_seeds(base: &ExperimentConfig, repeats: usize) -> Vec<u64> {
    (0..repeats.max(1) as u64).map(|i| base.master_seed.wrapping_add(i)).collect()
}

pub fn run_sweep<T: Scalar>(base: &ExperimentConfig, grid: &[GridEntry], repeats: usize) -> Result<SweepResult> {
    let seeds = sweep_seeds(base, repeats);
    let mut per_entry: Vec<(Vec<RunSummary>, Vec<Vec<RoundTrace>>)> = vec![Default::default(); grid.len()];
    for &seed in &seeds {
        let data_cfg = grid
            .first()
            .map(|e| e.configure(base, seed))
            .unwrap_or_else(|| base.clone());
        let data = generate_data::<T>(&data_cfg, &SeedTree::new(seed))?;
        for (entry, slot) in grid.iter().zip(per_entry.iter_mut()) {
            let out = run_with_data(&entry.configure(base, seed), &data, |_| {})?;
            slot.0.push(out.summary);
            slot.1.push(out.traces);
        }
    }
    let entries = grid
        .iter()
        .zip(per_entry)
        .map(|(entry, (runs, traces))| {
            let mean = |f: fn(&RunSummary) -> f64| runs.iter().map(f).sum::<f64>() / runs.len() as f64;
            EntryResult {
                label: entry.label.clone(),
                figures: entry.figures.clone(),
                mean_final_loss_eve: mean(|s| s.final_loss_eve),
                mean_final_loss_bob: mean(|s| s.final_loss_bob),
                mean_final_shift_vs_bob: mean(|s| s.final_shift_vs_bob),
                mean_final_shift_vs_wstar: mean(|s| s.final_shift_vs_wstar),
                runs,
                traces,
            }
        })
        .collect();
    Ok(SweepResult { seeds, entries })
}
