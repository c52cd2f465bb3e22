use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{ChannelModel, FadingModel, GainVariation};
use crate::error::{Error, Result};
use crate::fec::ConvCodeSpec;
use crate::macode::MacCodeSpec;
use crate::profile::Profile;

/// One sweep: every profile at every user-C SNR, `trials` independent runs of `slots`
/// slots each.
///
/// Stored as a flat TOML table; every key is optional and falls back to the default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub profiles: Vec<Profile>,
    pub snr_a_db: f64,
    pub snr_b_db: f64,
    /// Sweep points for user C.
    pub snr_c_db: Vec<f64>,
    /// Payload bits of one BPSK-sized MAC packet.
    pub payload_bits: usize,
    /// Packets needed per message, for users A, B, C.
    pub data_packets: [usize; 3],
    /// Distinct coded packets per message, for users A, B, C.
    pub total_packets: [usize; 3],
    pub slots: u64,
    pub trials: usize,
    pub seed: u64,
    pub fading: FadingModel,
    pub gain_variation: GainVariation,
    pub llr_clip: f64,
    /// CSV destination; the manifest is written next to it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            profiles: Profile::ALL.to_vec(),
            snr_a_db: 8.0,
            snr_b_db: 8.0,
            snr_c_db: (8..=14).map(f64::from).collect(),
            payload_bits: 64,
            data_packets: [8, 16, 32],
            total_packets: [16, 32, 64],
            slots: 1000,
            trials: 10,
            seed: 1,
            fading: FadingModel::Rayleigh,
            gain_variation: GainVariation::Block,
            llr_clip: ConvCodeSpec::STANDARD.llr_clip,
            out: None,
        }
    }
}

fn field(field: &str, reason: impl Into<String>) -> Error {
    Error::Config { field: field.to_string(), reason: reason.into() }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| field("<file>", e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        if self.profiles.is_empty() {
            return Err(field("profiles", "at least one profile is required"));
        }
        if self.snr_c_db.is_empty() {
            return Err(field("snr_c_db", "at least one sweep point is required"));
        }
        for (name, v) in [("snr_a_db", self.snr_a_db), ("snr_b_db", self.snr_b_db)] {
            if !v.is_finite() {
                return Err(field(name, format!("{v} is not finite")));
            }
        }
        if let Some(v) = self.snr_c_db.iter().find(|v| !v.is_finite()) {
            return Err(field("snr_c_db", format!("{v} is not finite")));
        }
        if self.slots == 0 {
            return Err(field("slots", "must be at least 1"));
        }
        if self.trials == 0 {
            return Err(field("trials", "must be at least 1"));
        }
        if !(self.llr_clip > 0.0) {
            return Err(field("llr_clip", "must be positive"));
        }
        for user in 0..3 {
            MacCodeSpec::with_total(self.data_packets[user], self.total_packets[user], self.payload_bits).map_err(|e| {
                let name = if self.payload_bits == 0 || self.payload_bits % 8 != 0 { "payload_bits" } else { "data_packets" };
                field(name, format!("user {user}: {e}"))
            })?;
        }
        Ok(())
    }

    pub fn mac_specs(&self) -> Vec<MacCodeSpec> {
        (0..3)
            .map(|u| MacCodeSpec::with_total(self.data_packets[u], self.total_packets[u], self.payload_bits).expect("validated"))
            .collect()
    }

    pub fn code(&self) -> ConvCodeSpec {
        ConvCodeSpec::STANDARD.with_llr_clip(self.llr_clip)
    }

    pub fn channel(&self) -> ChannelModel {
        ChannelModel { fading: self.fading, variation: self.gain_variation }
    }

    /// SHA-256 over the canonical JSON encoding of every field.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}
