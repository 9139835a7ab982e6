//! Per-dataset settings from the published evaluation.

use serde::{Deserialize, Serialize};

use crate::protocol::ProtocolConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// CMU MoBo: 40x40, one gallery walk of 50 frames, equalized.
    Mobo,
    /// YouTube Celebrity: 30x30, five folds, three gallery clips of 20 frames, equalized.
    Ytc,
    /// UCSD/Honda: 20x20, one gallery video of 50 frames, equalized and standardized.
    Honda,
    /// ETH-80: 32x32, five whole gallery sets, standardized.
    Eth80,
    /// Library defaults; tune through flags or `--config`.
    Custom,
}

impl Preset {
    pub fn config(self) -> ProtocolConfig {
        let base = ProtocolConfig::default();
        match self {
            Preset::Mobo => ProtocolConfig {
                dims: (40, 40),
                alpha: 0.2,
                gallery_sets_per_class: 1,
                gallery_images_per_set: Some(50),
                equalize: true,
                ..base
            },
            Preset::Ytc => ProtocolConfig {
                dims: (30, 30),
                alpha: 10.5,
                gallery_sets_per_class: 3,
                gallery_images_per_set: Some(20),
                equalize: true,
                folds: Some(5),
                repeats: 5,
                ..base
            },
            Preset::Honda => ProtocolConfig {
                dims: (20, 20),
                alpha: 0.2,
                gallery_sets_per_class: 1,
                gallery_images_per_set: Some(50),
                equalize: true,
                standardize: true,
                ..base
            },
            Preset::Eth80 => ProtocolConfig {
                dims: (32, 32),
                alpha: 0.2,
                gallery_sets_per_class: 5,
                gallery_images_per_set: None,
                standardize: true,
                ..base
            },
            Preset::Custom => base,
        }
    }
}
