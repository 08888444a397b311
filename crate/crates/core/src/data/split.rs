use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Train / validation / test partition of the nodes, each sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub k: f64,
    pub seed: u64,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitSpec {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("split serializes")
    }
}

/// SplitMix64 finalizer applied to `master + stream * golden`.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent seeds expanded from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStreams {
    pub split: u64,
    pub init: u64,
}

impl SeedStreams {
    pub fn new(master: u64) -> Self {
        Self {
            split: derive_seed(master, 0),
            init: derive_seed(master, 1),
        }
    }
}

/// Per class, `round_half_even(k * size)` (at least one) nodes go to
/// training. The remaining nodes are pooled, shuffled and halved, with the
/// odd one going to test.
pub fn stratified_split(labels: &[usize], classes: usize, k: f64, seed: u64) -> Result<SplitSpec> {
    if !(k > 0.0 && k < 1.0) {
        return Err(Error::param("k", format!("must lie in (0, 1), got {k}")));
    }
    let mut members = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        if l >= classes {
            return Err(Error::UnknownLabel { label: l, classes });
        }
        members[l].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut rest = Vec::new();
    for (class, nodes) in members.iter_mut().enumerate() {
        let size = nodes.len();
        let take = ((k * size as f64).round_ties_even() as usize).max(1);
        if size < 3 || take + 2 > size {
            return Err(Error::ClassTooSmall { class, size });
        }
        nodes.shuffle(&mut rng);
        train.extend_from_slice(&nodes[..take]);
        rest.extend_from_slice(&nodes[take..]);
    }
    rest.sort_unstable();
    rest.shuffle(&mut rng);
    let half = rest.len() / 2;
    let mut validation = rest[..half].to_vec();
    let mut test = rest[half..].to_vec();
    train.sort_unstable();
    validation.sort_unstable();
    test.sort_unstable();
    Ok(SplitSpec {
        k,
        seed,
        train,
        validation,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_two_class_counts() {
        let labels: Vec<usize> = (0..100).map(|i| i % 2).collect();
        let s = stratified_split(&labels, 2, 0.1, 3).unwrap();
        assert_eq!(s.train.len(), 10);
        assert_eq!(s.train.iter().filter(|&&i| labels[i] == 0).count(), 5);
        assert_eq!(s.validation.len(), 45);
        assert_eq!(s.test.len(), 45);
        assert_eq!(s, stratified_split(&labels, 2, 0.1, 3).unwrap());
    }

    #[test]
    fn odd_remainder_goes_to_test() {
        let labels = vec![0; 12];
        let s = stratified_split(&labels, 1, 0.1, 0).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (1, 5, 6));
    }

    #[test]
    fn tiny_class_rejected() {
        let labels = vec![0, 0, 0, 0, 1, 1];
        assert!(matches!(
            stratified_split(&labels, 2, 0.2, 0),
            Err(Error::ClassTooSmall { class: 1, size: 2 })
        ));
    }

    #[test]
    fn seed_streams_differ() {
        let s = SeedStreams::new(0);
        assert_ne!(s.split, s.init);
        assert_ne!(derive_seed(1, 0), derive_seed(0, 0));
    }
}
