//! Run configuration: a JSON file whose values are overridden by flags, then
//! resolved against defaults into the effective settings for one command.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use survey_core::{CvConfig, FitConfig, Init, Schedule, SurveyError, SurveyScale, SweepConfig, SweepMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    R2,
    R5,
    R100,
    Pc,
}

impl From<Scale> for SurveyScale {
    fn from(s: Scale) -> Self {
        match s {
            Scale::R2 => SurveyScale::R2,
            Scale::R5 => SurveyScale::R5,
            Scale::R100 => SurveyScale::R100,
            Scale::Pc => SurveyScale::Pc,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Individual,
    Aggregate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InitArg {
    Spectral,
    Gaussian,
}

/// Settings shared by every command. Each one can also be given in the
/// `--config` JSON file under the same snake_case name.
#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunArgs {
    /// JSON file with default values for any of these flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Ratings CSV (respondent_id,item_id,value,elapsed_ms).
    #[arg(long)]
    pub ratings: Option<PathBuf>,
    /// Comparisons CSV (respondent_id,item_left,item_right,winner,elapsed_ms).
    #[arg(long)]
    pub comparisons: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub scale: Option<Scale>,
    /// Fitted model JSON (embed).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 1 runs serially. Defaults to the machine's parallelism.
    #[arg(long)]
    pub threads: Option<usize>,

    /// Latent rank.
    #[arg(long)]
    pub k: Option<usize>,
    /// Frobenius penalty weight.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub max_sweeps: Option<usize>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long, value_enum)]
    pub init: Option<InitArg>,
    #[arg(long)]
    pub step_size: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,

    /// Sweep sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Subsamples per sweep size.
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,

    /// Cross-validation ranks, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub k_grid: Option<Vec<usize>>,
    /// Cross-validation penalties, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub gamma_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub holdout_fraction: Option<f64>,
    #[arg(long)]
    pub repeats: Option<usize>,

    /// Simulated respondents.
    #[arg(long)]
    pub respondents: Option<usize>,
    /// Simulated items.
    #[arg(long)]
    pub items: Option<usize>,
    #[arg(long)]
    pub true_rank: Option<usize>,
    #[arg(long)]
    pub noise_sd: Option<f64>,
    #[arg(long)]
    pub ratings_per_respondent: Option<usize>,
    #[arg(long)]
    pub heldout_per_respondent: Option<usize>,
    /// Give every simulated respondent the same sign on the first latent axis.
    #[arg(long)]
    pub consistent: Option<bool>,

    /// Queries per timing block (summarize).
    #[arg(long)]
    pub block_size: Option<usize>,
}

macro_rules! overlay {
    ($flags:expr, $file:expr, $($field:ident),+ $(,)?) => {
        $( if $flags.$field.is_none() { $flags.$field = $file.$field; } )+
    };
}

impl RunArgs {
    /// Fills every flag left unset from the config file, if one was given.
    pub fn merged(mut self) -> Result<Self, SurveyError> {
        let Some(path) = self.config.clone() else { return Ok(self) };
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(&path).map_err(|source| SurveyError::Io { path: shown.clone(), source })?;
        let file: RunArgs = serde_json::from_str(&text).map_err(|e| SurveyError::Malformed {
            path: shown,
            line: e.line() as u64,
            message: e.to_string(),
        })?;
        overlay!(
            self,
            file,
            ratings,
            comparisons,
            scale,
            model,
            out,
            seed,
            threads,
            k,
            gamma,
            max_sweeps,
            rel_tol,
            init,
            step_size,
            epochs,
            batch_size,
            sizes,
            draws,
            mode,
            k_grid,
            gamma_grid,
            holdout_fraction,
            repeats,
            respondents,
            items,
            true_rank,
            noise_sd,
            ratings_per_respondent,
            heldout_per_respondent,
            consistent,
            block_size,
        );
        Ok(self)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SimulateSettings {
    pub respondents: usize,
    pub items: usize,
    pub true_rank: usize,
    pub noise_sd: f64,
    pub ratings_per_respondent: usize,
    pub heldout_per_respondent: usize,
    pub consistent: bool,
}

/// Every setting a run depends on, with defaults applied. Its hash names the
/// output files; the thread count and output directory are left out because
/// they do not change any result.
#[derive(Clone, Debug, Serialize)]
pub struct Resolved {
    pub command: &'static str,
    pub seed: u64,
    pub scale: Option<SurveyScale>,
    pub ratings: Option<PathBuf>,
    pub comparisons: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub fit: FitConfig,
    pub schedule: Schedule,
    pub sweep: Option<SweepConfig>,
    pub cv: Option<CvConfig>,
    pub simulate: Option<SimulateSettings>,
    pub block_size: Option<usize>,
}

impl Resolved {
    pub fn new(command: &'static str, a: &RunArgs) -> Self {
        let seed = a.seed.unwrap_or(0);
        let fit_default = FitConfig::default();
        let fit = FitConfig {
            k: a.k.unwrap_or(fit_default.k),
            gamma: a.gamma.unwrap_or(fit_default.gamma),
            max_sweeps: a.max_sweeps.unwrap_or(fit_default.max_sweeps),
            rel_tol: a.rel_tol.unwrap_or(fit_default.rel_tol),
            seed,
            init_scale: None,
            init: match a.init {
                Some(InitArg::Gaussian) => Init::Gaussian,
                Some(InitArg::Spectral) | None => Init::Spectral,
            },
        };
        let sd = Schedule::default();
        let schedule = Schedule {
            step_size: a.step_size.unwrap_or(sd.step_size),
            epochs: a.epochs.unwrap_or(sd.epochs),
            batch_size: a.batch_size.unwrap_or(sd.batch_size),
        };
        let sweep = (command == "sweep").then(|| {
            let d = SweepConfig::default();
            SweepConfig {
                sizes: a.sizes.clone().unwrap_or(d.sizes),
                draws: a.draws.unwrap_or(d.draws),
                fit: fit.clone(),
                schedule: schedule.clone(),
                mode: match a.mode {
                    Some(Mode::Aggregate) => SweepMode::Aggregate,
                    Some(Mode::Individual) | None => SweepMode::Individual,
                },
                seed,
            }
        });
        let cv = (command == "cv").then(|| {
            let d = CvConfig::default();
            CvConfig {
                k_grid: a.k_grid.clone().unwrap_or(d.k_grid),
                gamma_grid: a.gamma_grid.clone().unwrap_or(d.gamma_grid),
                holdout_fraction: a.holdout_fraction.unwrap_or(d.holdout_fraction),
                repeats: a.repeats.unwrap_or(d.repeats),
                seed,
                max_sweeps: a.max_sweeps.unwrap_or(d.max_sweeps),
                rel_tol: a.rel_tol.unwrap_or(d.rel_tol),
            }
        });
        let simulate = (command == "simulate").then(|| SimulateSettings {
            respondents: a.respondents.unwrap_or(50),
            items: a.items.unwrap_or(100),
            true_rank: a.true_rank.unwrap_or(3),
            noise_sd: a.noise_sd.unwrap_or(0.5),
            ratings_per_respondent: a.ratings_per_respondent.unwrap_or(80),
            heldout_per_respondent: a.heldout_per_respondent.unwrap_or(20),
            consistent: a.consistent.unwrap_or(false),
        });
        Resolved {
            command,
            seed,
            scale: a.scale.map(Into::into),
            ratings: a.ratings.clone(),
            comparisons: a.comparisons.clone(),
            model: a.model.clone(),
            fit,
            schedule,
            sweep,
            cv,
            simulate,
            block_size: (command == "summarize").then(|| a.block_size.unwrap_or(8)),
        }
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("settings serialize");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// `<command>.s<seed>-<hash8>`: the stem shared by every file of a run.
    pub fn stem(&self) -> String {
        format!("{}.s{}-{}", self.command, self.seed, &self.hash()[..8])
    }
}

pub fn digest_file(path: &Path) -> Result<String, SurveyError> {
    let bytes = std::fs::read(path).map_err(|source| SurveyError::Io { path: path.display().to_string(), source })?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}
