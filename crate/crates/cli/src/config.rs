//! The experiment document: one TOML file per experiment.
//!
//! ```toml
//! schema_version = 1
//! kind = "downsampling"        # single | downsampling | distill | isocompute
//! seed = 7                     # master seed: model init, keep draws, teacher
//! parallelism = 2              # optional, default 1
//! output_dir = "out/ds"        # optional, --out wins
//!
//! [stream]                     # synthetic stream; omitted keys use defaults
//! base_ctr = 0.004
//!
//! [trial]                      # trial template (every field of TrialConfig
//! hash = { dim = 4096, salt = 1 }   # except `stream` and `seed`)
//! arch = { kind = "linear" }
//! hist_start = 0
//! hist_end = 2_000_000
//! online_end = 3_000_000
//!
//! [downsampling]               # section named after `kind`
//! rates = [1.0, 0.1]
//! cutoff = 1_000_000
//! reference_start = 0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use ctrlab_core::output::SCHEMA_VERSION;
use ctrlab_core::sweep::{derive_seed, DistillSpec, DownsamplingSpec};
use ctrlab_core::{IsoComputeSpec, StreamSpec, TrialConfig};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Single,
    Downsampling,
    Distill,
    Isocompute,
}

impl Kind {
    pub fn section(&self) -> &'static str {
        match self {
            Kind::Single => "single",
            Kind::Downsampling => "downsampling",
            Kind::Distill => "distill",
            Kind::Isocompute => "isocompute",
        }
    }
}

/// Parameters of a `single` experiment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SingleSpec {
    /// When set, an unsampled, undistilled run starting here is used as the
    /// baseline for relative metrics and convergence detection.
    #[serde(default)]
    pub baseline_start: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum KindSpec {
    Single(SingleSpec),
    Downsampling(DownsamplingSpec),
    Distill(DistillSpec),
    Isocompute(IsoComputeSpec),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    schema_version: u32,
    kind: Kind,
    seed: u64,
    #[serde(default)]
    parallelism: Option<usize>,
    #[serde(default)]
    output_dir: Option<PathBuf>,
    #[serde(default)]
    stream: StreamSpec,
    trial: toml::Table,
    #[serde(default)]
    single: Option<toml::Table>,
    #[serde(default)]
    downsampling: Option<toml::Table>,
    #[serde(default)]
    distill: Option<toml::Table>,
    #[serde(default)]
    isocompute: Option<toml::Table>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentFile {
    pub kind: Kind,
    pub seed: u64,
    pub parallelism: usize,
    pub output_dir: Option<PathBuf>,
    /// Trial template with the stream and master seed filled in.
    pub trial: TrialConfig,
    pub spec: KindSpec,
}

impl ExperimentFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let src = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&src, path)
    }

    /// Parses and fully validates a document; `path` is only used in
    /// diagnostics.
    pub fn parse(src: &str, path: &Path) -> Result<Self, CliError> {
        let raw: RawFile = toml::from_str(src).map_err(|e| parse_error(src, path, "", &e))?;
        if raw.schema_version != SCHEMA_VERSION {
            return Err(CliError::config(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", raw.schema_version),
            ));
        }
        let parallelism = raw.parallelism.unwrap_or(1);
        if parallelism == 0 {
            return Err(CliError::config("parallelism", "must be >= 1"));
        }

        let mut trial_table = raw.trial;
        for reserved in ["stream", "seed"] {
            if trial_table.contains_key(reserved) {
                return Err(CliError::config(
                    format!("trial.{reserved}"),
                    format!("set `{reserved}` at the top level, not inside [trial]"),
                ));
            }
        }
        trial_table.insert(
            "stream".into(),
            toml::Value::try_from(&raw.stream).expect("stream spec serialises"),
        );
        trial_table.insert("seed".into(), toml::Value::Integer(0));
        let trial: TrialConfig = toml::Value::Table(trial_table)
            .try_into()
            .map_err(|e| parse_error(src, path, "trial", &e))?;

        let sections = [
            (Kind::Single, raw.single),
            (Kind::Downsampling, raw.downsampling),
            (Kind::Distill, raw.distill),
            (Kind::Isocompute, raw.isocompute),
        ];
        let mut own = None;
        for (kind, table) in sections {
            match (kind == raw.kind, table) {
                (true, t) => own = Some(t),
                (false, Some(_)) => {
                    return Err(CliError::config(
                        kind.section(),
                        format!("section not used by kind `{}`", raw.kind.section()),
                    ))
                }
                (false, None) => {}
            }
        }
        let own = own.flatten();
        let section = raw.kind.section();
        let spec = match raw.kind {
            Kind::Single => KindSpec::Single(match own {
                Some(t) => section_into(src, path, section, t)?,
                None => SingleSpec::default(),
            }),
            kind => {
                let mut t = own.ok_or_else(|| CliError::config(section, "missing section"))?;
                match kind {
                    Kind::Downsampling => KindSpec::Downsampling(section_into(src, path, section, t)?),
                    Kind::Isocompute => KindSpec::Isocompute(section_into(src, path, section, t)?),
                    _ => {
                        if let Some(toml::Value::Table(teacher)) = t.get_mut("teacher") {
                            if teacher.contains_key("seed") {
                                return Err(CliError::config(
                                    "distill.teacher.seed",
                                    "the teacher seed derives from the top-level seed",
                                ));
                            }
                        }
                        KindSpec::Distill(section_into(src, path, section, t)?)
                    }
                }
            }
        };

        let mut exp = ExperimentFile {
            kind: raw.kind,
            seed: raw.seed,
            parallelism,
            output_dir: raw.output_dir,
            trial,
            spec,
        };
        exp.set_seed(raw.seed);
        exp.validate()?;
        Ok(exp)
    }

    /// Re-derives every seed from `seed`.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.trial.seed = seed;
        if let KindSpec::Distill(d) = &mut self.spec {
            d.teacher.seed = derive_seed(seed, "teacher");
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.trial.validate().map_err(trial_key)?;
        match &self.spec {
            KindSpec::Single(s) => {
                if self.trial.distill.enabled() {
                    return Err(CliError::config(
                        "trial.distill",
                        "distillation needs kind = \"distill\", which trains the teacher",
                    ));
                }
                if let Some(b) = s.baseline_start {
                    if b > self.trial.hist_start {
                        return Err(CliError::config(
                            "single.baseline_start",
                            "the baseline must start no later than the trial",
                        ));
                    }
                }
            }
            KindSpec::Downsampling(d) => {
                if d.rates.is_empty() || d.rates.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) {
                    return Err(CliError::config("downsampling.rates", "rates must lie in (0, 1]"));
                }
                if !d.rates.contains(&1.0) {
                    return Err(CliError::config("downsampling.rates", "must include the baseline rate 1.0"));
                }
                if d.cutoff < self.trial.hist_start || d.cutoff > self.trial.hist_end {
                    return Err(CliError::config("downsampling.cutoff", "must lie inside the historical range"));
                }
                if d.reference_start > self.trial.hist_start {
                    return Err(CliError::config(
                        "downsampling.reference_start",
                        "the reference must start no later than the trials",
                    ));
                }
            }
            KindSpec::Distill(d) => {
                if d.start_dates.is_empty() || d.schedules.is_empty() {
                    return Err(CliError::config("distill", "needs start_dates and schedules"));
                }
                for &s in &d.start_dates {
                    if s >= self.trial.hist_end {
                        return Err(CliError::config("distill.start_dates", format!("{s} is not before hist_end")));
                    }
                }
                let earliest = *d.start_dates.iter().min().expect("nonempty");
                d.teacher.check_against_student(self.trial.param_count(), earliest)?;
                for schedule in &d.schedules {
                    ctrlab_core::DistillPolicy {
                        alpha: d.alpha,
                        schedule: *schedule,
                    }
                    .validate()
                    .map_err(|e| rekey(e, "distill"))?;
                }
            }
            KindSpec::Isocompute(s) => {
                if s.sizes.len() < 3 {
                    // budget problems are reported first; this is checked again at run time
                    ctrlab_core::sweep::plan_iso(s, &self.trial, 0)?;
                    return Err(CliError::config("isocompute.sizes", "a sweep needs at least 3 sizes"));
                }
            }
        }
        Ok(())
    }

    /// Resolved document echoed into every output directory. Parallelism
    /// and the output location are omitted so outputs do not depend on
    /// them.
    pub fn echo(&self) -> serde_json::Value {
        let spec = match &self.spec {
            KindSpec::Single(s) => json!(s),
            KindSpec::Downsampling(s) => json!(s),
            KindSpec::Distill(s) => json!(s),
            KindSpec::Isocompute(s) => json!(s),
        };
        json!({
            "schema_version": SCHEMA_VERSION,
            "kind": self.kind,
            "seed": self.seed,
            "trial": self.trial,
            self.kind.section(): spec,
        })
    }
}

fn section_into<T: serde::de::DeserializeOwned>(
    src: &str,
    path: &Path,
    section: &str,
    table: toml::Table,
) -> Result<T, CliError> {
    toml::Value::Table(table)
        .try_into()
        .map_err(|e| parse_error(src, path, section, &e))
}

fn trial_key(e: ctrlab_core::Error) -> CliError {
    rekey(e, "trial")
}

/// Qualifies a core validation key with the document section it lives in;
/// stream keys already name their top-level table.
fn rekey(e: ctrlab_core::Error, section: &str) -> CliError {
    match e {
        ctrlab_core::Error::InvalidConfig { key, reason } => {
            let key = if key.starts_with("stream.") || key.starts_with(&format!("{section}.")) {
                key
            } else {
                format!("{section}.{key}")
            };
            CliError::Config { key, reason }
        }
        other => CliError::Core(other),
    }
}

fn parse_error(src: &str, path: &Path, section: &str, e: &toml::de::Error) -> CliError {
    let message = e.message().to_string();
    let field = backticked(&message);
    let key = match (&field, section) {
        (Some(f), "") => Some(f.clone()),
        (Some(f), s) => Some(format!("{s}.{f}")),
        (None, "") => None,
        (None, s) => Some(s.to_string()),
    };
    let line = match e.span() {
        Some(span) => Some(src[..span.start.min(src.len())].matches('\n').count() + 1),
        None => field.as_deref().and_then(|f| locate_key(src, f)),
    };
    CliError::Parse {
        path: path.to_path_buf(),
        message,
        key,
        line,
    }
}

/// First backtick-quoted word of a serde message, which names the
/// offending field in unknown-field and missing-field errors.
fn backticked(message: &str) -> Option<String> {
    let start = message.find('`')? + 1;
    let len = message[start..].find('`')?;
    Some(message[start..start + len].to_string())
}

/// 1-based line of the first `key = ...` assignment in `src`.
fn locate_key(src: &str, key: &str) -> Option<usize> {
    src.lines().position(|l| {
        l.trim_start()
            .strip_prefix(key)
            .is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}
