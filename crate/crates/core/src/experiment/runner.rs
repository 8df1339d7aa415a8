//! Round orchestration: local descent, privacy mechanism, both channels,
//! Bob's aggregation and Eve's reconstruction, with one trace row per round.

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::adversary::{alpha, eve_update, gammas_homogeneous, tamper_bound, tamper_test, EveState, TamperBoundInputs};
use crate::baselines::{bob_denoise, inject, InjectionConfig};
use crate::channel::{bob_receive_and_compensate, eve_observe, transmit, ChannelParams, Receiver, SecretLedger};
use crate::error::{ModShiftError, Result};
use crate::experiment::config::ExperimentConfig;
use crate::experiment::data::generate_data;
use crate::fedcore::{aggregate, compute_delta, local_descent, Delta, LocalDataset, ModelVector, QuadraticStats, TrainConfig};
use crate::rng::{NoiseStream, SeedTree, StreamLabel};
use crate::scalar::{distance, norm, Scalar};
use crate::shift::{apply_shift, make_gamma, validate_gamma, SchemeKind, ShiftScheme};
use crate::signal::Signal;

/// Per-round record; column order is the CSV header.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RoundTrace {
    pub round: usize,
    pub loss_bob: f64,
    pub loss_eve: f64,
    pub shift_vs_bob: f64,
    pub shift_vs_wstar: f64,
    pub bob_update_norm: f64,
    pub eve_update_norm: f64,
    pub tamper_bound: f64,
    /// Only populated when both links are noiseless.
    pub tamper_pass: Option<bool>,
    pub alpha: f64,
    pub secret_scalars: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mechanism: String,
    pub master_seed: u64,
    pub rounds: usize,
    pub final_loss_bob: f64,
    pub final_loss_eve: f64,
    pub final_shift_vs_bob: f64,
    pub final_shift_vs_wstar: f64,
    pub ledger_total: u64,
    pub tamper_pass_rate: Option<f64>,
    /// Rounds in which every agent used the same `γ`.
    pub homogeneous_gamma_rounds: usize,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone)]
pub struct RunOutput<T> {
    pub traces: Vec<RoundTrace>,
    pub summary: RunSummary,
    pub final_bob: ModelVector<T>,
    pub final_eve: ModelVector<T>,
}

/// Everything exchanged in one round, for callers that want to audit it.
#[derive(Debug, Clone)]
pub struct RoundRecord<'a, T> {
    pub round: usize,
    pub w_bob_before: &'a ModelVector<T>,
    pub w_bob_after: &'a ModelVector<T>,
    pub w_eve_after: &'a ModelVector<T>,
    pub deltas: &'a [Delta<T>],
    pub bob_received: &'a [Delta<T>],
    pub eve_observed: &'a [Vec<T>],
    /// Empty unless a shift scheme is active.
    pub gammas: &'a [Vec<T>],
    pub trace: &'a RoundTrace,
}

#[derive(Debug, Clone)]
pub enum Mechanism<T> {
    None,
    Shift {
        scheme: ShiftScheme<T>,
        /// Fixed per-agent vectors, overriding `scheme` when present.
        per_agent: Option<Vec<Vec<T>>>,
    },
    Inject(InjectionConfig),
}

impl<T: Scalar> Mechanism<T> {
    pub fn from_config(cfg: &ExperimentConfig, seeds: &SeedTree) -> Result<Self> {
        if let Some(b) = cfg.baseline()? {
            return Ok(Mechanism::Inject(b));
        }
        Ok(match cfg.scheme {
            SchemeKind::None => Mechanism::None,
            SchemeKind::Custom if cfg.random_agent_gammas => Mechanism::Shift {
                scheme: ShiftScheme::new(SchemeKind::Custom),
                per_agent: Some(
                    (0..cfg.agents)
                        .map(|k| random_valid_gamma(cfg.d, &mut seeds.stream(StreamLabel::Gamma, k, 0)))
                        .collect::<Result<_>>()?,
                ),
            },
            SchemeKind::Custom => {
                let g = cfg
                    .custom_gamma
                    .as_ref()
                    .ok_or_else(|| ModShiftError::Config("custom scheme needs custom_gamma".into()))?;
                Mechanism::Shift {
                    scheme: ShiftScheme::custom(g.iter().map(|&x| T::of(x)).collect())?,
                    per_agent: None,
                }
            }
            kind => Mechanism::Shift {
                scheme: ShiftScheme::new(kind),
                per_agent: None,
            },
        })
    }
}

/// A random `γ` with `γᵀ𝟙 = −1`: Gaussian entries of variance `1/d`
/// projected onto the constraint plane.
pub fn random_valid_gamma<T: Scalar>(d: usize, stream: &mut NoiseStream) -> Result<Vec<T>> {
    let scale = 1.0 / (d as f64).sqrt();
    let raw: Vec<f64> = (0..d).map(|_| stream.gaussian(scale)).collect();
    let offset = (raw.iter().sum::<f64>() + 1.0) / d as f64;
    let gamma: Vec<T> = raw.iter().map(|&r| T::of(r - offset)).collect();
    if !validate_gamma(&gamma) {
        return Err(ModShiftError::ConstraintViolation {
            sum: gamma.iter().map(|g| g.to_f64_lossy()).sum(),
        });
    }
    Ok(gamma)
}

pub fn run_experiment<T: Scalar>(cfg: &ExperimentConfig) -> Result<RunOutput<T>> {
    let seeds = SeedTree::new(cfg.master_seed);
    let data = generate_data::<T>(cfg, &seeds)?;
    run_with_data(cfg, &data, |_| {})
}

/// Runs `cfg` on pre-generated datasets (one per agent, ordered by id),
/// calling `observe` after every round.
pub fn run_with_data<T, F>(cfg: &ExperimentConfig, data: &[LocalDataset<T>], mut observe: F) -> Result<RunOutput<T>>
where
    T: Scalar,
    F: FnMut(&RoundRecord<'_, T>),
{
    cfg.validate()?;
    if data.len() != cfg.agents {
        return Err(ModShiftError::Config(format!(
            "{} datasets for {} agents",
            data.len(),
            cfg.agents
        )));
    }
    if let Some((k, ds)) = data.iter().enumerate().find(|(k, ds)| ds.agent_id() != *k || ds.dim() != cfg.d) {
        return Err(ModShiftError::Config(format!(
            "dataset at position {k} has agent id {} and dimension {}",
            ds.agent_id(),
            ds.dim()
        )));
    }

    let seeds = SeedTree::new(cfg.master_seed);
    let mechanism = Mechanism::<T>::from_config(cfg, &seeds)?;
    let counts: Vec<usize> = data.iter().map(LocalDataset::len).collect();
    let weights = TrainConfig::<T>::weights_from_counts(&counts);
    let train = TrainConfig::new(T::of(cfg.eta), cfg.local_epochs, cfg.rounds, weights.clone())?;
    let bob_link = ChannelParams::from_noise_var(T::of(cfg.channel_noise_var), Receiver::Bob)?;
    let eve_link = ChannelParams::from_noise_var(T::of(cfg.eve_noise_var()), Receiver::Eve)?;
    let pooled = QuadraticStats::pooled(data.iter().map(LocalDataset::stats))?;
    let w_star: Vec<T> = cfg.w_star()?.into_iter().map(T::of).collect();
    let noiseless = cfg.noiseless();

    let mut w_bob = ModelVector::<T>::zeros(cfg.d);
    let mut eve = EveState::new(ModelVector::<T>::zeros(cfg.d));
    let mut ledger = SecretLedger::new();
    let mut traces = Vec::with_capacity(cfg.rounds);
    let mut homogeneous_rounds = 0;

    for n in 0..cfg.rounds {
        let mut deltas = Vec::with_capacity(cfg.agents);
        let mut bob_rx = Vec::with_capacity(cfg.agents);
        let mut eve_rx = Vec::with_capacity(cfg.agents);
        let mut gammas = Vec::new();

        for ds in data {
            let k = ds.agent_id();
            let local = local_descent(&w_bob, ds, &train, n)?;
            let delta = compute_delta(&local, &w_bob, k, n)?;
            if !Float::is_finite(norm(&delta.values)) {
                return Err(ModShiftError::Divergence { agent: k, round: n });
            }
            let mut bob_noise = seeds.stream(StreamLabel::ChannelBob, k, n);
            let mut eve_noise = seeds.stream(StreamLabel::ChannelEve, k, n);

            let (bob, eve_obs) = match &mechanism {
                Mechanism::None => {
                    let sig = Signal::from_vector(delta.values.clone());
                    (
                        transmit(sig.clone(), &bob_link, &mut bob_noise).readout(),
                        transmit(sig, &eve_link, &mut eve_noise).readout(),
                    )
                }
                Mechanism::Shift { scheme, per_agent } => {
                    let gamma = match per_agent {
                        Some(g) => g[k].clone(),
                        None => make_gamma(scheme, &delta)?,
                    };
                    let shifted = apply_shift(&delta, &gamma)?;
                    let eve_obs = eve_observe(&shifted, &eve_link, &mut eve_noise)?;
                    let bob = bob_receive_and_compensate(
                        &shifted,
                        shifted.shift_scalar(),
                        &bob_link,
                        &mut bob_noise,
                        &mut ledger,
                    )?;
                    gammas.push(gamma);
                    (bob, eve_obs)
                }
                Mechanism::Inject(inj_cfg) => {
                    let mut inj_noise = seeds.stream(StreamLabel::Injection, k, n);
                    let inj = inject(&delta, inj_cfg, &mut inj_noise, &mut ledger);
                    let received = transmit(inj.perturbed.clone(), &bob_link, &mut bob_noise);
                    let bob = bob_denoise(received, &inj.noise)?;
                    (bob, transmit(inj.perturbed, &eve_link, &mut eve_noise).readout())
                }
            };
            bob_rx.push(Delta::new(bob, k, n)?);
            eve_rx.push(eve_obs);
            deltas.push(delta);
        }

        let w_next = aggregate(&w_bob, &bob_rx, &train.agent_weights)?;
        if !Float::is_finite(norm(w_next.as_slice())) {
            let agent = largest_delta(&deltas);
            return Err(ModShiftError::Divergence { agent, round: n });
        }
        eve = eve_update(eve, &eve_rx, &train.agent_weights)?;
        let bob_update = distance(w_next.as_slice(), w_bob.as_slice());
        let eve_update_norm = eve.last_update_norm().unwrap_or_else(T::zero);

        let homogeneous = gammas_homogeneous(&gammas);
        if !gammas.is_empty() && homogeneous {
            homogeneous_rounds += 1;
        }
        let gamma_norms: Vec<T> = if gammas.is_empty() {
            vec![T::zero(); cfg.agents]
        } else {
            gammas.iter().map(|g| norm(g)).collect()
        };
        let align = alpha(&deltas, &train.agent_weights)?;
        let inputs = TamperBoundInputs::new(bob_update, gamma_norms, align.value, homogeneous)?;
        let bound = tamper_bound(&inputs, cfg.d);
        let pass = noiseless.then(|| tamper_test(eve_update_norm, bound));
        if let Some(p) = pass {
            eve.record_tamper(p);
        }

        let trace = RoundTrace {
            round: n,
            loss_bob: pooled.loss(w_next.as_slice()).to_f64_lossy(),
            loss_eve: pooled.loss(eve.w_eve.as_slice()).to_f64_lossy(),
            shift_vs_bob: distance(eve.w_eve.as_slice(), w_next.as_slice()).to_f64_lossy(),
            shift_vs_wstar: distance(eve.w_eve.as_slice(), &w_star).to_f64_lossy(),
            bob_update_norm: bob_update.to_f64_lossy(),
            eve_update_norm: eve_update_norm.to_f64_lossy(),
            tamper_bound: bound.to_f64_lossy(),
            tamper_pass: pass,
            alpha: align.value.to_f64_lossy(),
            secret_scalars: ledger.for_round(n),
        };
        observe(&RoundRecord {
            round: n,
            w_bob_before: &w_bob,
            w_bob_after: &w_next,
            w_eve_after: &eve.w_eve,
            deltas: &deltas,
            bob_received: &bob_rx,
            eve_observed: &eve_rx,
            gammas: &gammas,
            trace: &trace,
        });
        traces.push(trace);
        w_bob = w_next;
    }

    let last = traces.last().expect("rounds >= 1");
    let tamper_pass_rate = (!eve.tamper_flags.is_empty()).then(|| {
        eve.tamper_flags.iter().filter(|&&p| p).count() as f64 / eve.tamper_flags.len() as f64
    });
    let summary = RunSummary {
        mechanism: cfg.mechanism_label(),
        master_seed: cfg.master_seed,
        rounds: cfg.rounds,
        final_loss_bob: last.loss_bob,
        final_loss_eve: last.loss_eve,
        final_shift_vs_bob: last.shift_vs_bob,
        final_shift_vs_wstar: last.shift_vs_wstar,
        ledger_total: ledger.total(),
        tamper_pass_rate,
        homogeneous_gamma_rounds: homogeneous_rounds,
        config: cfg.clone(),
    };
    Ok(RunOutput {
        traces,
        summary,
        final_bob: w_bob,
        final_eve: eve.w_eve,
    })
}

fn largest_delta<T: Scalar>(deltas: &[Delta<T>]) -> usize {
    deltas
        .iter()
        .map(|d| (d.agent_id, norm(&d.values)))
        .fold((0, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best })
        .0
}

/// Column-wise mean of several runs' traces (same round count).
/// `tamper_pass` becomes true only if every run passed that round.
pub fn average_traces(runs: &[Vec<RoundTrace>]) -> Vec<RoundTrace> {
    let Some(first) = runs.first() else {
        return Vec::new();
    };
    let r = runs.len() as f64;
    (0..first.len())
        .map(|i| {
            let col = |f: fn(&RoundTrace) -> f64| runs.iter().map(|t| f(&t[i])).sum::<f64>() / r;
            let passes: Option<Vec<bool>> = runs.iter().map(|t| t[i].tamper_pass).collect();
            RoundTrace {
                round: first[i].round,
                loss_bob: col(|t| t.loss_bob),
                loss_eve: col(|t| t.loss_eve),
                shift_vs_bob: col(|t| t.shift_vs_bob),
                shift_vs_wstar: col(|t| t.shift_vs_wstar),
                bob_update_norm: col(|t| t.bob_update_norm),
                eve_update_norm: col(|t| t.eve_update_norm),
                tamper_bound: col(|t| t.tamper_bound),
                tamper_pass: passes.map(|p| p.iter().all(|&x| x)),
                alpha: col(|t| t.alpha),
                secret_scalars: first[i].secret_scalars,
            }
        })
        .collect()
}
