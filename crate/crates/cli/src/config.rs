//! Experiment configuration: JSON file layered under command-line flags.

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context};
use lae_core::io::MotionSpec;
use lae_core::metrics::DEFAULT_ATTRIBUTES;
use lae_core::schedule::{read_trace, LatencyModel};
use lae_core::trackers::{
    ExternalTracker, ImageFiles, SyntheticConfig, SyntheticTracker, TemplateTracker, Tracker, DEFAULT_SEARCH_SCALE,
    DEFAULT_TIMEOUT,
};
use lae_core::{GroundTruthSequence, Mode};
use serde::{Deserialize, Serialize};

/// Every field optional so a file, the flags and the defaults can be layered.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    /// Directory holding `dataset.json`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    /// Inline synthetic sequences, used when no dataset is given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<Vec<MotionSpec>>,
    /// `synthetic`, `template` or `external:COMMAND ARGS`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tracker: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modes: Option<Vec<Mode>>,
    /// `constant:SECONDS`, `trace:PATH`, `random:MEAN,STD` or `wallclock`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latency: Option<String>,
    /// Frame-0 processing time; defaults to the per-frame latency.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_latency: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search_scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timeout_secs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attributes: Option<Vec<String>>,
}

impl ConfigFile {
    /// Reads a config file, resolving its relative paths against the file's directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: Self = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.rebase(base);
        Ok(cfg)
    }

    /// Makes relative dataset and trace paths relative to `base`.
    pub fn rebase(&mut self, base: &Path) {
        if let Some(d) = &self.dataset {
            if d.is_relative() {
                self.dataset = Some(base.join(d));
            }
        }
        if let Some(spec) = &self.latency {
            if let Some(p) = spec.strip_prefix("trace:") {
                if Path::new(p).is_relative() {
                    self.latency = Some(format!("trace:{}", base.join(p).display()));
                }
            }
        }
    }

    /// Values set in `over` win.
    pub fn overlay(self, over: ConfigFile) -> ConfigFile {
        ConfigFile {
            dataset: over.dataset.or(self.dataset),
            synthetic: over.synthetic.or(self.synthetic),
            tracker: over.tracker.or(self.tracker),
            modes: over.modes.or(self.modes),
            latency: over.latency.or(self.latency),
            init_latency: over.init_latency.or(self.init_latency),
            seed: over.seed.or(self.seed),
            jobs: over.jobs.or(self.jobs),
            noise_sigma: over.noise_sigma.or(self.noise_sigma),
            search_radius: over.search_radius.or(self.search_radius),
            search_scale: over.search_scale.or(self.search_scale),
            timeout_secs: over.timeout_secs.or(self.timeout_secs),
            attributes: over.attributes.or(self.attributes),
        }
    }

    pub fn defaults() -> ConfigFile {
        let synth = SyntheticConfig::default();
        ConfigFile {
            dataset: None,
            synthetic: None,
            tracker: Some("synthetic".into()),
            modes: Some(vec![Mode::LaeBare, Mode::LaePvt]),
            latency: Some(format!("constant:{}", 5.0 / 30.0)),
            init_latency: None,
            seed: Some(0),
            jobs: Some(1),
            noise_sigma: Some(synth.noise_sigma),
            search_radius: Some(synth.search_radius),
            search_scale: Some(DEFAULT_SEARCH_SCALE),
            timeout_secs: Some(DEFAULT_TIMEOUT.as_secs_f64()),
            attributes: Some(DEFAULT_ATTRIBUTES.iter().map(|s| s.to_string()).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Dataset(PathBuf),
    Synthetic(Vec<MotionSpec>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrackerKind {
    Synthetic { noise_sigma: f64, search_radius: f64 },
    Template { search_scale: f64 },
    External { command: String, timeout: Duration },
}

#[derive(Debug, Clone, PartialEq)]
pub enum LatencySpec {
    Constant { seconds: f64 },
    Trace { path: PathBuf },
    Random { mean: f64, std: f64 },
    WallClock,
}

impl LatencySpec {
    pub fn parse(spec: &str) -> anyhow::Result<Self> {
        let (kind, arg) = spec.split_once(':').unwrap_or((spec, ""));
        let num = |s: &str| -> anyhow::Result<f64> {
            s.trim()
                .parse()
                .with_context(|| format!("bad number {s:?} in latency {spec:?}"))
        };
        Ok(match kind {
            "constant" => LatencySpec::Constant { seconds: num(arg)? },
            "trace" if !arg.is_empty() => LatencySpec::Trace { path: arg.into() },
            "random" => {
                let Some((m, s)) = arg.split_once(',') else {
                    bail!("random latency needs MEAN,STD (got {spec:?})");
                };
                LatencySpec::Random {
                    mean: num(m)?,
                    std: num(s)?,
                }
            }
            "wallclock" if arg.is_empty() => LatencySpec::WallClock,
            _ => bail!("unknown latency {spec:?}; expected constant:S, trace:PATH, random:MEAN,STD or wallclock"),
        })
    }

    /// Latency model for one sequence; random draws are seeded per sequence.
    pub fn model(&self, init: Option<f64>, seed: u64) -> anyhow::Result<LatencyModel> {
        let model = match self {
            LatencySpec::Constant { seconds } => LatencyModel::Constant {
                seconds: *seconds,
                init: init.unwrap_or(*seconds),
            },
            LatencySpec::Trace { path } => {
                let mut times = read_trace(path)?;
                if let (Some(init), Some(first)) = (init, times.first_mut()) {
                    *first = init;
                }
                LatencyModel::Trace(times)
            }
            LatencySpec::Random { mean, std } => LatencyModel::SeededRandom {
                mean: *mean,
                std: *std,
                seed,
                init,
            },
            LatencySpec::WallClock => LatencyModel::WallClock,
        };
        model.validate()?;
        Ok(model)
    }
}

/// Fully resolved settings for `run`.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub source: Source,
    pub tracker: TrackerKind,
    pub modes: Vec<Mode>,
    pub latency: LatencySpec,
    pub init_latency: Option<f64>,
    pub seed: u64,
    pub jobs: usize,
    pub attributes: Vec<String>,
    /// The layered configuration the experiment was resolved from.
    pub file: ConfigFile,
}

impl Experiment {
    pub fn resolve(layers: ConfigFile) -> anyhow::Result<Self> {
        let cfg = ConfigFile::defaults().overlay(layers);
        let source = match (&cfg.dataset, &cfg.synthetic) {
            (Some(d), _) => Source::Dataset(d.clone()),
            (None, Some(s)) if !s.is_empty() => Source::Synthetic(s.clone()),
            _ => bail!("no sequences: set a dataset directory or synthetic specs"),
        };
        let tracker_spec = cfg.tracker.clone().expect("defaulted");
        let tracker = match tracker_spec.as_str() {
            "synthetic" => TrackerKind::Synthetic {
                noise_sigma: cfg.noise_sigma.expect("defaulted"),
                search_radius: cfg.search_radius.expect("defaulted"),
            },
            "template" => TrackerKind::Template {
                search_scale: cfg.search_scale.expect("defaulted"),
            },
            other => match other.strip_prefix("external:") {
                Some(cmd) if !cmd.trim().is_empty() => TrackerKind::External {
                    command: cmd.trim().to_string(),
                    timeout: Duration::from_secs_f64(cfg.timeout_secs.expect("defaulted")),
                },
                _ => bail!("unknown tracker {other:?}; expected synthetic, template or external:COMMAND"),
            },
        };
        let modes = cfg.modes.clone().expect("defaulted");
        if modes.is_empty() {
            bail!("no modes selected");
        }
        let latency = LatencySpec::parse(cfg.latency.as_deref().expect("defaulted"))?;
        let jobs = cfg.jobs.expect("defaulted").max(1);
        Ok(Self {
            source,
            tracker,
            modes,
            latency,
            init_latency: cfg.init_latency,
            seed: cfg.seed.expect("defaulted"),
            jobs,
            attributes: cfg.attributes.clone().expect("defaulted"),
            file: cfg,
        })
    }

    pub fn tracker_label(&self) -> String {
        match &self.tracker {
            TrackerKind::Synthetic { .. } => "synthetic".into(),
            TrackerKind::Template { .. } => "template".into(),
            TrackerKind::External { command, .. } => {
                let program = command.split_whitespace().next().unwrap_or("external");
                let stem = Path::new(program).file_stem().map(|s| s.to_string_lossy().into_owned());
                format!("external:{}", stem.unwrap_or_else(|| program.to_string()))
            }
        }
    }

    pub fn make_tracker(&self, seq: &GroundTruthSequence, seed: u64) -> anyhow::Result<Box<dyn Tracker + Send>> {
        Ok(match &self.tracker {
            TrackerKind::Synthetic {
                noise_sigma,
                search_radius,
            } => Box::new(SyntheticTracker::new(
                seq.boxes.clone(),
                SyntheticConfig {
                    noise_sigma: *noise_sigma,
                    search_radius: *search_radius,
                    seed,
                },
            )),
            TrackerKind::Template { search_scale } => {
                if seq.frame_paths.is_none() {
                    bail!("template tracker needs image frames; sequence {} has none", seq.name);
                }
                Box::new(TemplateTracker::new(Box::new(ImageFiles), *search_scale))
            }
            TrackerKind::External { command, timeout } => {
                Box::new(ExternalTracker::from_command_line(command, *timeout)?)
            }
        })
    }
}

/// Seed for the `index`-th sequence, shared by all of its modes.
pub fn sequence_seed(seed: u64, index: usize) -> u64 {
    // splitmix64 step
    let mut z = seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn latency_specs() {
        assert_eq!(
            LatencySpec::parse("constant:0.066").unwrap(),
            LatencySpec::Constant { seconds: 0.066 }
        );
        assert_eq!(
            LatencySpec::parse("random:0.1,0.02").unwrap(),
            LatencySpec::Random { mean: 0.1, std: 0.02 }
        );
        assert_eq!(LatencySpec::parse("wallclock").unwrap(), LatencySpec::WallClock);
        assert_eq!(
            LatencySpec::parse("trace:a/b.txt").unwrap(),
            LatencySpec::Trace { path: "a/b.txt".into() }
        );
        for bad in ["constant:x", "random:0.1", "trace:", "fast", "wallclock:1"] {
            assert!(LatencySpec::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn flags_beat_file_beat_defaults() {
        let file = ConfigFile {
            synthetic: Some(vec![MotionSpec::linear("a", 5, [0., 0., 5., 5.], [1., 0., 0., 0.])]),
            seed: Some(5),
            latency: Some("constant:0.1".into()),
            ..Default::default()
        };
        let flags = ConfigFile {
            seed: Some(9),
            ..Default::default()
        };
        let exp = Experiment::resolve(file.overlay(flags)).unwrap();
        assert_eq!(exp.seed, 9);
        assert_eq!(exp.latency, LatencySpec::Constant { seconds: 0.1 });
        assert_eq!(exp.modes, vec![Mode::LaeBare, Mode::LaePvt]);
        assert_eq!(exp.jobs, 1);
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let mut c = ConfigFile {
            dataset: Some("data".into()),
            latency: Some("trace:t.txt".into()),
            ..Default::default()
        };
        c.rebase(Path::new("/x/y"));
        assert_eq!(c.dataset.unwrap(), PathBuf::from("/x/y/data"));
        assert_eq!(c.latency.unwrap(), "trace:/x/y/t.txt");
    }

    #[test]
    fn seeds_differ_per_sequence() {
        assert_ne!(sequence_seed(0, 0), sequence_seed(0, 1));
        assert_eq!(sequence_seed(3, 2), sequence_seed(3, 2));
    }

    #[test]
    fn tracker_specs() {
        let base = ConfigFile {
            synthetic: Some(vec![MotionSpec::linear("a", 5, [0., 0., 5., 5.], [1., 0., 0., 0.])]),
            ..Default::default()
        };
        let with = |t: &str| {
            Experiment::resolve(base.clone().overlay(ConfigFile {
                tracker: Some(t.into()),
                ..Default::default()
            }))
        };
        assert_eq!(
            with("external:/bin/trk --fast").unwrap().tracker_label(),
            "external:trk"
        );
        assert!(with("external:").is_err());
        assert!(with("siamrpn").is_err());
    }
}
