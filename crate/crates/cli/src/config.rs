//! `--config` file: TOML with `schema = 1`.

use std::path::{Path, PathBuf};
use std::time::Duration;

use autopatch_core::pipeline::PipelineConfig;
use autopatch_core::provider::{GatewayConfig, RetryPolicy, SamplingProfile};
use autopatch_core::Error;
use serde::Deserialize;

pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema: u32,
    pub kb: Option<PathBuf>,
    pub model_file: Option<PathBuf>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub provider: ProviderSection,
    #[serde(default)]
    pub pipeline: PipelineSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderSection {
    pub base_url: Option<String>,
    pub chat_model: Option<String>,
    pub embed_model: Option<String>,
    pub profile: Option<String>,
    pub timeout_secs: Option<u64>,
    pub retries: Option<u32>,
    pub max_in_flight: Option<usize>,
    pub per_minute: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSection {
    pub max_loops: Option<usize>,
    pub reprompts: Option<u32>,
    pub fuzzy_threshold: Option<f64>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: ConfigFile = toml::from_str(text).map_err(|e| e.message().to_string())?;
        if cfg.schema != 1 {
            return Err(format!("unsupported schema {} (expected 1)", cfg.schema));
        }
        Ok(cfg)
    }
}

/// Provider settings after flags, environment and file have been merged.
#[derive(Debug, Clone)]
pub struct ProviderSettings {
    pub base_url: String,
    pub timeout: Duration,
    pub gateway: GatewayConfig,
}

pub fn parse_profile(name: &str) -> Result<SamplingProfile, Error> {
    SamplingProfile::parse(name).ok_or_else(|| Error::Usage(format!("unknown provider profile `{name}`")))
}

impl ProviderSection {
    /// `profile` is the command-line or environment value, which wins over the file.
    pub fn settings(&self, profile: Option<&str>) -> Result<ProviderSettings, Error> {
        let mut g = GatewayConfig::default();
        if let Some(m) = &self.chat_model {
            g.chat_model = m.clone();
        }
        if let Some(m) = &self.embed_model {
            g.embed_model = m.clone();
        }
        match profile.or(self.profile.as_deref()) {
            Some(p) => g.agent_profile = parse_profile(p)?,
            None => {}
        }
        if let Some(r) = self.retries {
            g.retry = RetryPolicy { retries: r, ..RetryPolicy::default() };
        }
        if let Some(n) = self.max_in_flight {
            if n == 0 {
                return Err(Error::Config("provider.max_in_flight must be positive".into()));
            }
            g.max_in_flight = n;
        }
        if let Some(n) = self.per_minute {
            g.per_minute = n;
        }
        Ok(ProviderSettings {
            base_url: self.base_url.clone().unwrap_or_else(|| DEFAULT_BASE_URL.to_string()),
            timeout: Duration::from_secs(self.timeout_secs.unwrap_or(60)),
            gateway: g,
        })
    }
}

impl PipelineSection {
    pub fn settings(&self, max_loops: Option<usize>) -> Result<PipelineConfig, Error> {
        let mut p = PipelineConfig::default();
        if let Some(n) = max_loops.or(self.max_loops) {
            p.max_loops = n;
        }
        if let Some(n) = self.reprompts {
            p.reprompts = n;
        }
        if let Some(t) = self.fuzzy_threshold {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::Config(format!("pipeline.fuzzy_threshold {t} outside (0, 1]")));
            }
            p.fuzzy_threshold = t;
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_and_unknown_keys() {
        assert!(ConfigFile::parse("schema = 1\n[pipeline]\nmax_loops = 4\n").is_ok());
        assert!(ConfigFile::parse("schema = 2\n").unwrap_err().contains("schema"));
        assert!(ConfigFile::parse("schema = 1\nbogus = true\n").is_err());
        assert!(ConfigFile::parse("kb = \"x\"\n").is_err());
    }

    #[test]
    fn flag_beats_file() {
        let f = ConfigFile::parse("schema = 1\n[pipeline]\nmax_loops = 4\n[provider]\nprofile = \"generation\"\n").unwrap();
        assert_eq!(f.pipeline.settings(Some(2)).unwrap().max_loops, 2);
        assert_eq!(f.pipeline.settings(None).unwrap().max_loops, 4);
        assert_eq!(f.provider.settings(Some("agent")).unwrap().gateway.agent_profile, SamplingProfile::Agent);
        assert_eq!(f.provider.settings(None).unwrap().gateway.agent_profile, SamplingProfile::Generation);
    }
}
