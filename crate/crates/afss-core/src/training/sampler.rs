//! Balanced batch sampling: every mini-batch holds exactly half real and
//! half fake records, drawn without replacement from per-class pools that
//! are reshuffled each epoch. The epoch ends when either pool runs dry; a
//! leftover partial batch is dropped.

use rand::Rng;

use crate::error::{Error, Result};
use crate::manifest::Label;

/// One epoch's batches as indices into the caller's record slice.
pub fn balanced_batches(
    labels: &[Label],
    batch_size: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 || batch_size % 2 != 0 {
        return Err(Error::Config(format!(
            "batch_size must be even and positive, got {batch_size}"
        )));
    }
    let mut reals: Vec<usize> = Vec::new();
    let mut fakes: Vec<usize> = Vec::new();
    for (i, label) in labels.iter().enumerate() {
        match label {
            Label::Real => reals.push(i),
            Label::Fake => fakes.push(i),
        }
    }
    if reals.is_empty() || fakes.is_empty() {
        return Err(Error::Config(format!(
            "balanced sampling needs both classes, got {} real / {} fake",
            reals.len(),
            fakes.len()
        )));
    }

    shuffle(&mut reals, rng);
    shuffle(&mut fakes, rng);

    let half = batch_size / 2;
    let n_batches = reals.len().min(fakes.len()) / half;
    let mut batches = Vec::with_capacity(n_batches);
    for b in 0..n_batches {
        let mut batch = Vec::with_capacity(batch_size);
        batch.extend_from_slice(&reals[b * half..(b + 1) * half]);
        batch.extend_from_slice(&fakes[b * half..(b + 1) * half]);
        batches.push(batch);
    }
    Ok(batches)
}

/// Expected batches per epoch: floor(min(n_real, n_fake) / (batch_size/2)).
pub fn batches_per_epoch(n_real: usize, n_fake: usize, batch_size: usize) -> usize {
    n_real.min(n_fake) / (batch_size / 2)
}

fn shuffle(v: &mut [usize], rng: &mut impl Rng) {
    for i in (1..v.len()).rev() {
        let j = rng.random_range(0..=i);
        v.swap(i, j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use std::collections::BTreeSet;

    fn labels(n_real: usize, n_fake: usize) -> Vec<Label> {
        let mut v = vec![Label::Real; n_real];
        v.extend(std::iter::repeat_n(Label::Fake, n_fake));
        v
    }

    fn class_counts(batch: &[usize], labels: &[Label]) -> (usize, usize) {
        let real = batch.iter().filter(|&&i| labels[i] == Label::Real).count();
        (real, batch.len() - real)
    }

    #[test]
    fn hundred_per_class_at_batch_twelve_gives_sixteen_batches() {
        let l = labels(100, 100);
        let mut rng = RngStream::for_epoch(1, 0, "sampler");
        let batches = balanced_batches(&l, 12, &mut rng).unwrap();
        assert_eq!(batches.len(), 16);
        for b in &batches {
            assert_eq!(class_counts(b, &l), (6, 6));
        }
        // 16 batches consume 96 per class; 4 + 4 records go unused.
        let used: BTreeSet<usize> = batches.iter().flatten().copied().collect();
        assert_eq!(used.len(), 192);
    }

    #[test]
    fn minority_class_caps_the_epoch() {
        let l = labels(50, 100);
        let mut rng = RngStream::for_epoch(1, 0, "sampler");
        let batches = balanced_batches(&l, 12, &mut rng).unwrap();
        assert_eq!(batches.len(), 8);
        assert_eq!(batches_per_epoch(50, 100, 12), 8);
    }

    #[test]
    fn no_duplicate_record_within_an_epoch() {
        let l = labels(37, 61);
        let mut rng = RngStream::for_epoch(3, 2, "sampler");
        let batches = balanced_batches(&l, 6, &mut rng).unwrap();
        let flat: Vec<usize> = batches.iter().flatten().copied().collect();
        let unique: BTreeSet<usize> = flat.iter().copied().collect();
        assert_eq!(flat.len(), unique.len());
    }

    #[test]
    fn epochs_reshuffle_but_keys_reproduce() {
        let l = labels(40, 40);
        let run = |epoch: usize| {
            let mut rng = RngStream::for_epoch(9, epoch, "sampler");
            balanced_batches(&l, 8, &mut rng).unwrap()
        };
        assert_eq!(run(0), run(0));
        assert_ne!(run(0), run(1));
    }

    #[test]
    fn single_class_or_odd_batch_is_rejected() {
        let mut rng = RngStream::for_epoch(1, 0, "sampler");
        assert!(balanced_batches(&labels(10, 0), 4, &mut rng).is_err());
        assert!(balanced_batches(&labels(0, 10), 4, &mut rng).is_err());
        assert!(balanced_batches(&labels(5, 5), 3, &mut rng).is_err());
        assert!(balanced_batches(&labels(5, 5), 0, &mut rng).is_err());
    }

    #[test]
    fn random_configurations_always_balance() {
        use rand::Rng;
        let mut meta = RngStream::for_sample(5, "sampler", "configs");
        for _ in 0..20 {
            let n_real = meta.random_range(1..200);
            let n_fake = meta.random_range(1..200);
            let batch_size = 2 * meta.random_range(1..8usize);
            let l = labels(n_real, n_fake);
            let mut rng = RngStream::for_epoch(5, 0, "sampler");
            let batches = balanced_batches(&l, batch_size, &mut rng).unwrap();
            assert_eq!(
                batches.len(),
                batches_per_epoch(n_real, n_fake, batch_size),
                "n_real={n_real} n_fake={n_fake} bs={batch_size}"
            );
            for b in &batches {
                let (r, f) = class_counts(b, &l);
                assert_eq!(r, batch_size / 2);
                assert_eq!(f, batch_size / 2);
            }
        }
    }
}
