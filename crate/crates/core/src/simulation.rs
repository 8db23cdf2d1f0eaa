//! Seeded Monte Carlo runs: generate clean Gaussian data, contaminate it,
//! then score detections and measure covariance discrepancies.

use rayon::prelude::*;
use serde::Serialize;

use crate::cellhandler::handle_row;
use crate::error::{Error, Result};
use crate::estimator::{di_estimate, DiConfig};
use crate::evalkit::{
    contaminate_with, discrepancy, gaussian_sample, gen_a09, gen_randcorr_with, score_flags,
    substream, ContaminationMode, ContaminationSpec, ScoreReport, Stream,
};
use crate::model::CovModel;
use crate::numkit::SymMatrix;
use crate::table::DataTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceKind {
    A09,
    RandCorr,
}

impl CovarianceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CovarianceKind::A09 => "a09",
            CovarianceKind::RandCorr => "randcorr",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub covariance: CovarianceKind,
    pub d: usize,
    pub n: usize,
    pub reps: usize,
    pub epsilon: f64,
    pub gamma: f64,
    pub mode: ContaminationMode,
    pub seed: u64,
    pub di: DiConfig,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::input("at least one replication is required"));
        }
        if self.d < 2 && self.covariance == CovarianceKind::RandCorr {
            return Err(Error::input("random correlation matrices need d >= 2"));
        }
        if self.d == 0 || self.n <= self.d {
            return Err(Error::Shape(format!(
                "simulation needs n > d >= 1, got n = {}, d = {}",
                self.n, self.d
            )));
        }
        self.spec(0).validate()?;
        self.di.validate()
    }

    fn spec(&self, seed: u64) -> ContaminationSpec {
        ContaminationSpec {
            epsilon: self.epsilon,
            gamma: self.gamma,
            mode: self.mode,
            seed,
        }
    }
}

/// One generated data set.
#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub sigma: SymMatrix,
    pub clean: DataTable,
    pub data: DataTable,
    pub truth: Vec<bool>,
}

/// Data of replication `rep`. The covariance, the clean sample and the
/// contamination positions each come from their own substream.
pub fn generate(config: &SimulationConfig, rep: usize) -> Result<SimulatedData> {
    let rep = rep as u64;
    let sigma = match config.covariance {
        CovarianceKind::A09 => gen_a09(config.d),
        CovarianceKind::RandCorr => gen_randcorr_with(
            config.d,
            1.0,
            &mut substream(config.seed, rep, Stream::Matrix),
        )?,
    };
    let clean = gaussian_sample(
        config.n,
        &sigma,
        &mut substream(config.seed, rep, Stream::Data),
    )?;
    let spec = config.spec(config.seed);
    let c = contaminate_with(
        &clean,
        &sigma,
        &spec,
        &mut substream(config.seed, rep, Stream::Positions),
    )?;
    Ok(SimulatedData {
        sigma,
        clean,
        data: c.data,
        truth: c.truth,
    })
}

/// Which model produced a set of flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// The generating model.
    TrueModel,
    /// The starting model of the DI iterations.
    Initial,
    /// The converged DI model with column capping.
    Di,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::TrueModel, Variant::Initial, Variant::Di];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::TrueModel => "true",
            Variant::Initial => "initial",
            Variant::Di => "di",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Replication {
    pub rep: usize,
    /// Scores in the order of [`Variant::ALL`].
    pub scores: Vec<ScoreReport>,
    pub discrepancy_initial: f64,
    pub discrepancy_di: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl Replication {
    pub fn score(&self, v: Variant) -> &ScoreReport {
        &self.scores[Variant::ALL.iter().position(|&x| x == v).unwrap()]
    }
}

/// Flags every row with `handle_row` under `model`.
pub fn flag_mask(data: &DataTable, model: &CovModel, q: f64) -> Result<Vec<bool>> {
    let d = data.n_cols();
    let rows: Vec<_> = (0..data.n_rows())
        .into_par_iter()
        .map(|i| handle_row(data.row(i), model, q))
        .collect::<Result<_>>()?;
    let mut mask = vec![false; data.n_rows() * d];
    for (i, det) in rows.iter().enumerate() {
        for j in det.flagged_observed() {
            mask[i * d + j] = true;
        }
    }
    Ok(mask)
}

fn expand_mask(mask: &[bool], kept: &[usize], n: usize, d: usize) -> Vec<bool> {
    let dk = kept.len();
    let mut out = vec![false; n * d];
    for i in 0..n {
        for (k, &j) in kept.iter().enumerate() {
            out[i * d + j] = mask[i * dk + k];
        }
    }
    out
}

pub fn run_replication(config: &SimulationConfig, rep: usize) -> Result<Replication> {
    let sim = generate(config, rep)?;
    let (n, d) = (config.n, config.d);
    let q = config.di.cutoff()?;
    let truth_model = CovModel::new(vec![0.0; d], sim.sigma.clone())?;
    let true_mask = flag_mask(&sim.data, &truth_model, q)?;

    let fit = di_estimate(&sim.data, &config.di)?;
    let kept = sim.data.select_columns(&fit.columns);
    let initial_mask = expand_mask(
        &flag_mask(&kept, &fit.initial_model, q)?,
        &fit.columns,
        n,
        d,
    );
    let di_mask = expand_mask(&fit.flags.mask(fit.columns.len()), &fit.columns, n, d);

    let target = sim.sigma.submatrix(&fit.columns);
    Ok(Replication {
        rep,
        scores: vec![
            score_flags(&true_mask, &sim.truth)?,
            score_flags(&initial_mask, &sim.truth)?,
            score_flags(&di_mask, &sim.truth)?,
        ],
        discrepancy_initial: discrepancy(fit.initial_model.sigma(), &target)?,
        discrepancy_di: discrepancy(fit.model.sigma(), &target)?,
        iterations: fit.iterations,
        converged: fit.converged,
    })
}

#[derive(Debug, Clone)]
pub struct SimulationOutcome {
    pub replications: Vec<Replication>,
}

fn fmt_or_na(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x}"))
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

impl SimulationOutcome {
    /// Mean recall of a variant over the replications where it is defined.
    pub fn mean_recall(&self, v: Variant) -> Option<f64> {
        mean(
            self.replications
                .iter()
                .map(|r| r.score(v))
                .filter(|s| s.n_true > 0)
                .map(|s| s.recall),
        )
    }

    pub fn mean_discrepancy(&self) -> (f64, f64) {
        let k = self.replications.len() as f64;
        let a = self
            .replications
            .iter()
            .map(|r| r.discrepancy_initial)
            .sum::<f64>()
            / k;
        let b = self
            .replications
            .iter()
            .map(|r| r.discrepancy_di)
            .sum::<f64>()
            / k;
        (a, b)
    }

    /// `rep,variant,recall,precision,f_score,n_true,n_flagged,n_correct`, with
    /// `NA` for undefined metrics and a `mean` row per variant.
    pub fn scores_csv(&self) -> String {
        let mut out =
            String::from("rep,variant,recall,precision,f_score,n_true,n_flagged,n_correct\n");
        for r in &self.replications {
            for (v, s) in Variant::ALL.iter().zip(&r.scores) {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    r.rep,
                    v.as_str(),
                    fmt_or_na((s.n_true > 0).then_some(s.recall)),
                    fmt_or_na((s.n_flagged > 0).then_some(s.precision)),
                    fmt_or_na((s.n_true > 0 && s.n_flagged > 0).then_some(s.f_score)),
                    s.n_true,
                    s.n_flagged,
                    s.n_correct
                ));
            }
        }
        for (k, v) in Variant::ALL.iter().enumerate() {
            let scores: Vec<&ScoreReport> =
                self.replications.iter().map(|r| &r.scores[k]).collect();
            let avg =
                |f: &dyn Fn(&ScoreReport) -> Option<f64>| mean(scores.iter().filter_map(|s| f(s)));
            let avg_count = |f: &dyn Fn(&ScoreReport) -> usize| {
                scores.iter().map(|s| f(s) as f64).sum::<f64>() / scores.len() as f64
            };
            out.push_str(&format!(
                "mean,{},{},{},{},{},{},{}\n",
                v.as_str(),
                fmt_or_na(avg(&|s| (s.n_true > 0).then_some(s.recall))),
                fmt_or_na(avg(&|s| (s.n_flagged > 0).then_some(s.precision))),
                fmt_or_na(avg(
                    &|s| (s.n_true > 0 && s.n_flagged > 0).then_some(s.f_score)
                )),
                avg_count(&|s| s.n_true),
                avg_count(&|s| s.n_flagged),
                avg_count(&|s| s.n_correct)
            ));
        }
        out
    }

    /// `rep,initial,di,iterations,converged` plus a `mean` row.
    pub fn discrepancy_csv(&self) -> String {
        let mut out = String::from("rep,initial,di,iterations,converged\n");
        for r in &self.replications {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.rep, r.discrepancy_initial, r.discrepancy_di, r.iterations, r.converged
            ));
        }
        let (a, b) = self.mean_discrepancy();
        let iters = self
            .replications
            .iter()
            .map(|r| r.iterations as f64)
            .sum::<f64>()
            / self.replications.len() as f64;
        let conv = self.replications.iter().filter(|r| r.converged).count() as f64
            / self.replications.len() as f64;
        out.push_str(&format!("mean,{a},{b},{iters},{conv}\n"));
        out
    }
}

/// Runs all replications in parallel; output order follows the replication index.
pub fn run_simulation(config: &SimulationConfig) -> Result<SimulationOutcome> {
    config.validate()?;
    let replications = (0..config.reps)
        .into_par_iter()
        .map(|rep| run_replication(config, rep))
        .collect::<Result<Vec<_>>>()?;
    Ok(SimulationOutcome { replications })
}
