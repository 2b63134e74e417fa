use sha2::{Digest, Sha256};

use crate::config::{DatasetSpec, ExperimentConfig};
use crate::data::{
    dirichlet_partition, inject_attribute, inject_closed_set, inject_open_set, make_blobs, read_csv,
    split_train_val_test, spread_stds, ClientChunk, Dataset, NoiseKind,
};
use crate::error::Result;
use crate::seed::{self, Stream};

/// Everything a run needs besides the model: noisy client chunks, the
/// server's clean validation set and the test set.
#[derive(Debug, Clone, PartialEq)]
pub struct FederatedData {
    pub clients: Vec<ClientChunk>,
    pub val: Dataset,
    pub test: Dataset,
    /// Original ids of the classes left after open-set noise.
    pub kept_classes: Option<Vec<usize>>,
}

impl FederatedData {
    pub fn dim(&self) -> usize {
        self.test.dim()
    }

    pub fn num_classes(&self) -> usize {
        self.test.num_classes()
    }

    /// SHA-256 over every chunk, flag, validation and test row.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        let mut feed = |ds: &Dataset| {
            h.update((ds.len() as u64).to_le_bytes());
            h.update((ds.dim() as u64).to_le_bytes());
            h.update((ds.num_classes() as u64).to_le_bytes());
            for v in ds.features() {
                h.update(v.to_le_bytes());
            }
            for &y in ds.labels() {
                h.update((y as u64).to_le_bytes());
            }
        };
        for c in &self.clients {
            feed(&c.dataset);
        }
        feed(&self.val);
        feed(&self.test);
        for c in &self.clients {
            h.update((c.client_id as u64).to_le_bytes());
            h.update(c.clean_flags.iter().map(|&f| f as u8).collect::<Vec<_>>());
        }
        hex::encode(h.finalize())
    }
}

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    match &cfg.dataset {
        DatasetSpec::Blobs {
            num_blobs,
            dim,
            samples_per_blob,
            std_min,
            std_max,
            stds,
        } => {
            let stds = stds.clone().unwrap_or_else(|| spread_stds(*num_blobs, *std_min, *std_max));
            let s = seed::derive(cfg.seed, Stream::Dataset, 0, 0);
            make_blobs(*num_blobs, *dim, &stds, *samples_per_blob, s)
        }
        DatasetSpec::Csv { path, num_classes } => read_csv(path, *num_classes),
    }
}

/// Dataset, stratified split, Dirichlet partition, then noise.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<FederatedData> {
    let base = load_dataset(cfg)?;
    let splits = split_train_val_test(
        &base,
        cfg.val_frac,
        cfg.test_frac,
        seed::derive(cfg.seed, Stream::Split, 0, 0),
    )?;
    let chunks = dirichlet_partition(
        &splits.train,
        cfg.num_clients,
        cfg.dirichlet_alpha,
        seed::derive(cfg.seed, Stream::Partition, 0, 0),
    )?;
    let noise_seed = |client: usize| seed::derive(cfg.seed, Stream::Noise, client as u64, 0);
    let spec = cfg.noise;
    let mut data = FederatedData {
        clients: chunks,
        val: splits.val,
        test: splits.test,
        kept_classes: None,
    };
    match spec.kind {
        NoiseKind::None => {}
        NoiseKind::ClosedSet => {
            data.clients = data
                .clients
                .iter()
                .map(|c| inject_closed_set(c, spec.ratio, noise_seed(c.client_id)))
                .collect::<Result<_>>()?;
        }
        NoiseKind::Attribute => {
            data.clients = data
                .clients
                .iter()
                .map(|c| inject_attribute(c, spec.ratio, spec.severity, noise_seed(c.client_id)))
                .collect::<Result<_>>()?;
        }
        NoiseKind::OpenSet => {
            let out = inject_open_set(&data.clients, &data.test, &data.val, spec.ratio, noise_seed(usize::MAX))?;
            data.clients = out.chunks;
            data.test = out.test;
            data.val = out.val;
            data.kept_classes = Some(out.kept_classes);
        }
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(noise: &str) -> ExperimentConfig {
        let text = format!(
            "num_clients = 5\nseed = 3\n[dataset]\nkind = \"blobs\"\nnum_blobs = 4\ndim = 3\nsamples_per_blob = 60\n{noise}"
        );
        ExperimentConfig::parse(&text).unwrap()
    }

    #[test]
    fn prepared_data_is_deterministic() {
        let a = prepare_data(&cfg("")).unwrap();
        let b = prepare_data(&cfg("")).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.fingerprint(), b.fingerprint());
        let total: usize = a.clients.iter().map(ClientChunk::len).sum();
        assert_eq!(total + a.val.len() + a.test.len(), 240);
    }

    #[test]
    fn noise_changes_the_fingerprint() {
        let clean = prepare_data(&cfg("")).unwrap();
        let noisy = prepare_data(&cfg("[noise]\nkind = \"closed_set\"\nratio = 0.4\n")).unwrap();
        assert_ne!(clean.fingerprint(), noisy.fingerprint());
        assert_eq!(clean.val, noisy.val);
        let noisy_rows: usize = noisy.clients.iter().map(ClientChunk::noisy_count).sum();
        assert!(noisy_rows > 0);
    }

    #[test]
    fn open_set_shrinks_the_label_space() {
        let d = prepare_data(&cfg("[noise]\nkind = \"open_set\"\nratio = 0.5\n")).unwrap();
        assert_eq!(d.num_classes(), 2);
        assert_eq!(d.kept_classes.as_ref().unwrap().len(), 2);
    }
}
