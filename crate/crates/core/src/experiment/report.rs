//! Diagnostics that need no training: the FIM spectrum report and the
//! configuration invariant check.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::baselines::inject;
use crate::channel::{bob_receive_and_compensate, transmit_vector, ChannelParams, Receiver, SecretLedger};
use crate::error::{ModShiftError, Result};
use crate::experiment::config::ExperimentConfig;
use crate::experiment::data::generate_data;
use crate::experiment::runner::Mechanism;
use crate::fedcore::{mse_gradient, mse_loss, Delta, LocalDataset, ModelVector};
use crate::fim::{
    build_fim, characteristic_via_mdl, closed_form_eigenvalues, is_singular, normalized_fim, numeric_eigenvalues,
    FimContext, SINGULAR_REL_TOL,
};
use crate::rng::{NoiseStream, SeedTree, StreamLabel};
use crate::scalar::norm;
use crate::shift::{apply_shift, make_gamma, shift_matrix_rank_deficiency, validate_gamma, SchemeKind, ShiftScheme};

#[derive(Debug, Clone, Serialize)]
pub struct FimReport {
    pub scheme: SchemeKind,
    pub d: usize,
    pub h: f64,
    pub sigma: f64,
    pub prefactor: f64,
    pub gamma: Vec<f64>,
    /// Absent when the gradient violates `γᵀ𝟙 = −1`.
    pub closed_form: Option<Vec<f64>>,
    pub numeric: Vec<f64>,
    pub max_rel_error: Option<f64>,
    pub singular: bool,
    pub rank_deficiency: usize,
}

/// Spectrum of Eve's FIM for `scheme`. Max draws its difference vector from
/// `seed`; `none` reports the unshifted `c·I`.
pub fn fim_report(
    scheme: SchemeKind,
    d: usize,
    h: f64,
    sigma: f64,
    seed: u64,
    custom_gamma: Option<Vec<f64>>,
) -> Result<FimReport> {
    if d < 2 {
        return Err(ModShiftError::Config("d must be >= 2".into()));
    }
    let gamma = match scheme {
        SchemeKind::None => vec![0.0; d],
        SchemeKind::Custom => {
            let g = custom_gamma.ok_or_else(|| ModShiftError::Config("custom scheme needs --gamma".into()))?;
            make_gamma(&ShiftScheme::custom(g)?, &Delta::new(vec![0.0; d], 0, 0)?)?
        }
        kind => {
            let mut stream = SeedTree::new(seed).stream(StreamLabel::Validation, 0, 0);
            let delta = Delta::new((0..d).map(|_| stream.standard_normal()).collect(), 0, 0)?;
            make_gamma(&ShiftScheme::new(kind), &delta)?
        }
    };
    let ctx = FimContext::new(gamma.clone(), h, sigma)?;
    let fim = build_fim(&ctx);
    let numeric = numeric_eigenvalues(&fim);
    let closed_form = closed_form_eigenvalues(&ctx).ok();
    let max_rel_error = closed_form.as_ref().map(|c| spectrum_rel_error(c, &numeric));
    Ok(FimReport {
        scheme,
        d,
        h,
        sigma,
        prefactor: ctx.prefactor(),
        closed_form,
        max_rel_error,
        singular: is_singular(&fim, SINGULAR_REL_TOL),
        rank_deficiency: shift_matrix_rank_deficiency(&gamma, d)?,
        numeric,
        gamma,
    })
}

/// `max_i |a_i − b_i| / max_i |b_i|` for two ascending spectra.
pub fn spectrum_rel_error(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub mechanism: String,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail,
        });
    }
}

/// Checks the invariants a configuration relies on without training it:
/// shift constraint, FIM singularity and spectrum, rank law, the
/// determinant-lemma route, exact compensation at the server, the secret
/// channel cost of one round, and the analytic gradient on agent 0's data.
pub fn validate_config(cfg: &ExperimentConfig) -> Result<ValidationReport> {
    cfg.validate()?;
    let seeds = SeedTree::new(cfg.master_seed);
    let mechanism = Mechanism::<f64>::from_config(cfg, &seeds)?;
    let mut report = ValidationReport {
        mechanism: cfg.mechanism_label(),
        checks: Vec::new(),
    };
    let d = cfg.d;
    let mut stream = seeds.stream(StreamLabel::Validation, 0, 0);
    let delta = Delta::new((0..d).map(|_| stream.standard_normal()).collect(), 0, 0)?;

    if let Mechanism::Shift { scheme, per_agent } = &mechanism {
        let gammas: Vec<Vec<f64>> = match per_agent {
            Some(g) => g.clone(),
            None => vec![make_gamma(scheme, &delta)?],
        };
        let all_valid = gammas.iter().all(|g| validate_gamma(g));
        report.push("gamma_constraint", all_valid, format!("{} vector(s) checked", gammas.len()));

        let mut worst_rel = 0.0_f64;
        let mut singular = true;
        let mut rank_ok = true;
        let mut mdl_ok = true;
        for g in &gammas {
            let ctx = FimContext::new(g.clone(), 1.0, cfg.eve_noise_var().sqrt().max(1e-3))?;
            let fim = build_fim(&ctx);
            let numeric = numeric_eigenvalues(&fim);
            let closed = closed_form_eigenvalues(&ctx)?;
            worst_rel = worst_rel.max(spectrum_rel_error(&closed, &numeric));
            singular &= is_singular(&fim, SINGULAR_REL_TOL);
            rank_ok &= shift_matrix_rank_deficiency(g, d)? == 1;
            let lambda = 0.37;
            let dense = (normalized_fim(g) - DMatrix::identity(d, d) * lambda).determinant();
            let via = characteristic_via_mdl(g, lambda)?;
            mdl_ok &= (dense - via).abs() <= 1e-8 * dense.abs().max(via.abs()).max(1.0)
                && characteristic_via_mdl(g, 0.0)?.abs() < 1e-10 * (1.0 + norm(g)).powi(4);
        }
        report.push("fim_singular", singular, format!("rel tol {SINGULAR_REL_TOL}"));
        report.push("fim_closed_form", worst_rel < 1e-9, format!("max rel error {worst_rel:e}"));
        report.push("shift_rank_deficiency", rank_ok, "rank(I + 1 gamma^T) = d - 1".into());
        report.push("determinant_lemma", mdl_ok, "dense vs 3x3 route".into());

        let link = ChannelParams::from_noise_var(cfg.channel_noise_var.max(0.1), Receiver::Bob)?;
        let shifted = apply_shift(&delta, &gammas[0])?;
        let mut ledger = SecretLedger::new();
        let comp = bob_receive_and_compensate(&shifted, shifted.shift_scalar(), &link, &mut NoiseStream::from_seed(7), &mut ledger)?;
        let plain = transmit_vector(&delta.values, &link, &mut NoiseStream::from_seed(7))?;
        report.push("bob_compensation_exact", comp == plain, "compensated vs unshifted, same noise".into());
    } else {
        let ctx = FimContext::new(vec![0.0; d], 1.0, 1.0)?;
        let singular = is_singular(&build_fim(&ctx), SINGULAR_REL_TOL);
        report.push("fim_regular_without_shift", !singular, "c I has full rank".into());
    }

    let mut ledger = SecretLedger::new();
    let per_agent = match &mechanism {
        Mechanism::None => 0,
        Mechanism::Shift { .. } => 1,
        Mechanism::Inject(inj) => {
            inject(&delta, inj, &mut NoiseStream::from_seed(3), &mut ledger);
            ledger.total()
        }
    };
    let expected = match &mechanism {
        Mechanism::None => 0,
        Mechanism::Shift { .. } => 1,
        Mechanism::Inject(_) => d as u64,
    };
    report.push(
        "secret_channel_cost",
        per_agent == expected,
        format!("{per_agent} scalar(s) per agent per round; run total {}", expected * (cfg.agents * cfg.rounds) as u64),
    );

    let probe = ExperimentConfig {
        agents: 1,
        ..cfg.clone()
    };
    let data: Vec<LocalDataset<f64>> = generate_data(&probe, &seeds)?;
    let w = ModelVector::new((0..d).map(|i| 0.5 * i as f64 - 1.0).collect())?;
    let fd_err = gradient_fd_error(&w, &data[0])?;
    report.push("gradient_finite_difference", fd_err < 1e-6, format!("max rel error {fd_err:e}"));
    Ok(report)
}

/// Largest relative deviation between the analytic gradient and central
/// differences with step `1e-5 · max(1, |w_i|)`.
pub fn gradient_fd_error(w: &ModelVector<f64>, data: &LocalDataset<f64>) -> Result<f64> {
    let grad = mse_gradient(w, data)?;
    let scale = norm(grad.as_slice()).max(1.0);
    let mut worst = 0.0_f64;
    for i in 0..w.dim() {
        let h = 1e-5 * w.as_slice()[i].abs().max(1.0);
        let mut plus = w.as_slice().to_vec();
        let mut minus = plus.clone();
        plus[i] += h;
        minus[i] -= h;
        let fd = (mse_loss(&ModelVector::new(plus)?, data)? - mse_loss(&ModelVector::new(minus)?, data)?) / (2.0 * h);
        worst = worst.max((fd - grad.as_slice()[i]).abs() / scale);
    }
    Ok(worst)
}
