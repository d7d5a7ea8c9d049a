use super::{DatasetManifest, ManifestError, Region};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const TRAIN_FRACTION: f64 = 0.75;

/// Scan-level train/test split, stratified by region. Each region keeps
/// `round(train_fraction * n)` scans for training. Patch records pick up the
/// split of their scan.
pub fn split_dataset(
    manifest: &DatasetManifest,
    train_fraction: f64,
    seed: u64,
) -> Result<DatasetManifest, ManifestError> {
    if manifest.scans.len() < 4 {
        return Err(ManifestError::Split(format!(
            "need at least 4 scans to split, found {}",
            manifest.scans.len()
        )));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(ManifestError::Split(format!(
            "train fraction {train_fraction} must lie strictly between 0 and 1"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for region in Region::ALL {
        let mut ids: Vec<String> = manifest
            .scans
            .iter()
            .filter(|s| s.region == region)
            .map(|s| s.scan_id.clone())
            .collect();
        ids.sort();
        ids.shuffle(&mut rng);
        let k = (train_fraction * ids.len() as f64).round() as usize;
        test.extend(ids.split_off(k));
        train.extend(ids);
    }
    let mut out = manifest.clone();
    out.splits.clear();
    out.splits.insert("train".into(), train);
    out.splits.insert("test".into(), test);
    out.assign_patch_splits();
    out.canonicalize();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::{ScanRecord, Split};
    use proptest::prelude::*;

    fn manifest(cervical: usize, lumbar: usize) -> DatasetManifest {
        let scan = |i: usize, region| ScanRecord {
            scan_id: format!("s{i:04}"),
            image_path: format!("{i}.pgm").into(),
            region,
            width: 10,
            height: 10,
            vertebrae: vec![],
            osteophytes: vec![],
            mask_paths: None,
        };
        let scans = (0..cervical)
            .map(|i| scan(i, Region::Cervical))
            .chain((cervical..cervical + lumbar).map(|i| scan(i, Region::Lumbar)))
            .collect();
        DatasetManifest::new(scans)
    }

    fn count(m: &DatasetManifest, split: &str, region: Region) -> usize {
        m.splits[split]
            .iter()
            .filter(|id| m.scan(id).unwrap().region == region)
            .count()
    }

    #[test]
    fn stratified_counts() {
        let m = split_dataset(&manifest(60, 40), TRAIN_FRACTION, 1).unwrap();
        assert_eq!(count(&m, "train", Region::Cervical), 45);
        assert_eq!(count(&m, "train", Region::Lumbar), 30);
        assert_eq!(count(&m, "test", Region::Cervical), 15);
        assert_eq!(count(&m, "test", Region::Lumbar), 10);
        m.validate().unwrap();
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let base = manifest(60, 40);
        let a = split_dataset(&base, TRAIN_FRACTION, 7).unwrap();
        let b = split_dataset(&base, TRAIN_FRACTION, 7).unwrap();
        let c = split_dataset(&base, TRAIN_FRACTION, 8).unwrap();
        assert_eq!(a.splits, b.splits);
        assert_ne!(a.splits, c.splits);
        assert_eq!(a.splits["train"].len(), c.splits["train"].len());
    }

    #[test]
    fn too_few_scans() {
        assert!(matches!(
            split_dataset(&manifest(2, 1), TRAIN_FRACTION, 0),
            Err(ManifestError::Split(_))
        ));
    }

    #[test]
    fn split_of_matches_lists() {
        let m = split_dataset(&manifest(8, 4), TRAIN_FRACTION, 3).unwrap();
        for id in &m.splits["train"] {
            assert_eq!(m.split_of(id), Some(Split::Train));
        }
        for id in &m.splits["test"] {
            assert_eq!(m.split_of(id), Some(Split::Test));
        }
    }

    proptest! {
        #[test]
        fn splits_partition_scans(c in 0usize..30, l in 0usize..30, seed in any::<u64>()) {
            prop_assume!(c + l >= 4);
            let base = manifest(c, l);
            let m = split_dataset(&base, TRAIN_FRACTION, seed).unwrap();
            let mut all: Vec<&String> = m.splits.values().flatten().collect();
            all.sort();
            let n = all.len();
            all.dedup();
            prop_assert_eq!(all.len(), n);
            prop_assert_eq!(n, c + l);
            let expect = (0.75 * c as f64).round() as usize + (0.75 * l as f64).round() as usize;
            prop_assert_eq!(m.splits["train"].len(), expect);
        }
    }
}
