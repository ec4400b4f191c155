//! Seeded synthetic instances.
//!
//! Every item draws from its own ChaCha8 stream (`seed`, stream = item
//! index), so a dataset is reproducible item by item and can be generated in
//! parallel.

use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::LogNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::InstanceFile;
use crate::slots::SlotAuctionInstance;
use crate::valuation::{OutcomeSpace, ValuationMatrix};

/// Random stream for item `index` of a dataset generated from `seed`.
pub fn item_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    UniformGeneral,
    SlotLognormal,
    GeminiLike,
}

impl Preset {
    pub const ALL: [Preset; 3] = [
        Preset::UniformGeneral,
        Preset::SlotLognormal,
        Preset::GeminiLike,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::UniformGeneral => "uniform-general",
            Preset::SlotLognormal => "slot-lognormal",
            Preset::GeminiLike => "gemini-like",
        }
    }

    /// Generator settings of the slot presets.
    pub fn slot_config(self) -> Option<SlotGenConfig> {
        match self {
            Preset::UniformGeneral => None,
            Preset::SlotLognormal => Some(SlotGenConfig::default()),
            // shallower click decay and tighter scores; every auction ends
            // up with gamma* <= 1 / (1 - 0.6) = 2.5
            Preset::GeminiLike => Some(SlotGenConfig {
                decay: 0.3..=0.6,
                score_sigma: 0.6,
                ..SlotGenConfig::default()
            }),
        }
    }

    fn item(self, rng: &mut ChaCha8Rng) -> InstanceFile {
        match self.slot_config() {
            Some(config) => InstanceFile::slot(random_slot_instance(rng, &config)),
            None => {
                let n = rng.random_range(2..=5);
                let k = rng.random_range(2..=5);
                let rows = (0..n)
                    .map(|_| (0..k).map(|_| rng.random::<f64>()).collect())
                    .collect();
                InstanceFile::general(
                    OutcomeSpace::numbered(k).expect("k >= 2"),
                    ValuationMatrix::new(rows).expect("uniform draws are valid values"),
                )
                .expect("labels match columns")
            }
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown preset {s:?}; expected one of uniform-general, slot-lognormal, gemini-like"
                ))
            })
    }
}

/// `count` instances with ids `<preset>-000000`, ... and the seed recorded.
pub fn generate(preset: Preset, count: usize, seed: u64) -> Vec<InstanceFile> {
    (0..count)
        .into_par_iter()
        .map(|k| {
            let mut rng = item_rng(seed, k as u64);
            preset
                .item(&mut rng)
                .with_id(format!("{}-{k:06}", preset.name()))
                .with_seed(seed)
        })
        .collect()
}

/// Separable slot instances: slot effects decay geometrically from a
/// top slot effect in `[0.6, 1]`, ad effects are uniform on `[0.5, 1.5]`,
/// and scores `ad_effect * bid` are log-normal.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotGenConfig {
    pub bidders: RangeInclusive<usize>,
    pub slots: RangeInclusive<usize>,
    /// Ratio between consecutive slot effects.
    pub decay: RangeInclusive<f64>,
    pub score_sigma: f64,
}

impl Default for SlotGenConfig {
    fn default() -> Self {
        Self {
            bidders: 3..=12,
            slots: 1..=4,
            decay: 0.6..=0.6,
            score_sigma: 1.0,
        }
    }
}

fn uniform(rng: &mut impl Rng, range: &RangeInclusive<f64>) -> f64 {
    if range.start() >= range.end() {
        *range.start()
    } else {
        rng.random_range(range.clone())
    }
}

pub fn random_slot_instance(rng: &mut impl Rng, config: &SlotGenConfig) -> SlotAuctionInstance {
    let n = rng.random_range(config.bidders.clone());
    let m = rng.random_range(config.slots.clone()).min(n);
    let ratio = uniform(rng, &config.decay);
    let top = rng.random_range(0.6..=1.0);
    let slot_effects: Vec<f64> = (0..m).map(|j| top * ratio.powi(j as i32)).collect();
    let ad_effects: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..=1.5)).collect();
    let scores = LogNormal::new(0.0, config.score_sigma).expect("sigma is finite and >= 0");
    let bids = ad_effects
        .iter()
        .map(|beta| rng.sample(scores) / beta)
        .collect();
    SlotAuctionInstance::new(slot_effects, ad_effects, bids, None)
        .expect("generated parameters satisfy the instance invariants")
}

/// `bidders x outcomes` values in `[lo, hi]` with every pair of entries at
/// least `gap` apart.
pub fn gapped_matrix(
    rng: &mut impl Rng,
    bidders: usize,
    outcomes: usize,
    lo: f64,
    hi: f64,
    gap: f64,
) -> Result<ValuationMatrix> {
    let count = bidders * outcomes;
    let slack = hi - lo - gap * count.saturating_sub(1) as f64;
    if count == 0 || slack < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "{count} values {gap} apart do not fit in [{lo}, {hi}]"
        )));
    }
    let mut offsets: Vec<f64> = (0..count).map(|_| rng.random_range(0.0..=slack)).collect();
    offsets.sort_by(f64::total_cmp);
    let mut values: Vec<f64> = offsets
        .iter()
        .enumerate()
        .map(|(k, x)| lo + x + gap * k as f64)
        .collect();
    values.shuffle(rng);
    ValuationMatrix::new(values.chunks(outcomes).map(<[f64]>::to_vec).collect())
}

/// Values meeting the separation condition at `gamma`: each bidder's
/// distinct values shrink by a factor of at most `gamma / (gamma + 1)` from
/// one level to the next. Outcomes may share a level and some get 0.
pub fn separated_matrix(
    rng: &mut impl Rng,
    bidders: usize,
    outcomes: usize,
    gamma: f64,
) -> Result<ValuationMatrix> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "gamma must be > 0, got {gamma}"
        )));
    }
    let d = gamma / (gamma + 1.0);
    let rows = (0..bidders)
        .map(|_| {
            let mut levels = vec![rng.random_range(0.5..=1.5)];
            for _ in 1..outcomes {
                let last = *levels.last().expect("non-empty");
                levels.push(last * d * rng.random_range(0.2..=0.95));
            }
            levels.push(0.0);
            (0..outcomes)
                .map(|_| levels[rng.random_range(0..levels.len())])
                .collect()
        })
        .collect();
    ValuationMatrix::new(rows)
}

/// Slot effects with `alpha_{j+1} <= gamma / (gamma + 1) * alpha_j`.
pub fn separated_slot_effects(rng: &mut impl Rng, slots: usize, gamma: f64) -> Vec<f64> {
    let d = gamma / (gamma + 1.0);
    let mut alpha = vec![rng.random_range(0.6..=1.0)];
    for _ in 1..slots {
        let last = *alpha.last().expect("non-empty");
        alpha.push(last * d * rng.random_range(0.3..=0.95));
    }
    alpha
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{dataset_to_jsonl, Instance};
    use crate::robustness::separation_condition;

    #[test]
    fn presets_are_deterministic() {
        for preset in Preset::ALL {
            let a = dataset_to_jsonl(&generate(preset, 20, 42));
            let b = dataset_to_jsonl(&generate(preset, 20, 42));
            assert_eq!(a, b);
            assert_ne!(a, dataset_to_jsonl(&generate(preset, 20, 43)));
        }
        assert!(generate(Preset::GeminiLike, 0, 1).is_empty());
    }

    #[test]
    fn preset_names_round_trip() {
        for preset in Preset::ALL {
            assert_eq!(preset.name().parse::<Preset>().unwrap(), preset);
        }
        assert!("gemini".parse::<Preset>().is_err());
    }

    #[test]
    fn slot_presets_respect_ranges() {
        for file in generate(Preset::SlotLognormal, 200, 9) {
            let Instance::Slot(inst) = file.instance else {
                panic!("expected slot instance");
            };
            assert!((3..=12).contains(&inst.bidders()));
            assert!((1..=4).contains(&inst.slots()));
        }
    }

    #[test]
    fn gapped_values_are_gapped() {
        let mut rng = item_rng(5, 0);
        let m = gapped_matrix(&mut rng, 4, 4, 0.1, 1.0, 0.05).unwrap();
        let mut all: Vec<f64> = m.rows().iter().flatten().copied().collect();
        all.sort_by(f64::total_cmp);
        assert!(all.windows(2).all(|w| w[1] - w[0] >= 0.05 - 1e-12));
        assert!(all[0] >= 0.1 && all[15] <= 1.0);
        assert!(gapped_matrix(&mut rng, 5, 5, 0.0, 1.0, 0.05).is_err());
    }

    #[test]
    fn separated_values_pass_the_check() {
        let mut rng = item_rng(3, 0);
        for gamma in [0.5, 1.0, 3.0] {
            let m = separated_matrix(&mut rng, 4, 5, gamma).unwrap();
            assert!(separation_condition(&m, gamma).unwrap().passed());
        }
    }
}
