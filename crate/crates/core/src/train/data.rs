//! In-memory training set with a sample order that depends only on
//! `(seed, epoch)`, so any step of a run can be reproduced without replaying
//! the ones before it.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::TrainConfig;
use crate::autodiff::{Shape, Tensor4};
use crate::error::{Error, Result};
use crate::imaging::augment::{transform_planes, NUM_TRANSFORMS};
use crate::imaging::dataset::{check_prepared, hr_dir, list_images};
use crate::imaging::{extract_patches, load_image, SamplePair};

pub struct TrainingData {
    pairs: Vec<SamplePair>,
    augment: bool,
    seed: u64,
    cached: Option<(usize, Vec<usize>)>,
}

impl TrainingData {
    pub fn new(pairs: Vec<SamplePair>, augment: bool, seed: u64) -> Result<Self> {
        let first = pairs
            .first()
            .ok_or_else(|| Error::Data("training set is empty".into()))?;
        let dims = first.target.dims();
        if pairs.iter().any(|p| p.target.dims() != dims || p.input.dims() != dims) {
            return Err(Error::Data("training pairs must all share one size".into()));
        }
        Ok(TrainingData {
            pairs,
            augment,
            seed,
            cached: None,
        })
    }

    /// Patches cut from every HR image of a prepared dataset.
    pub fn from_config(config: &TrainConfig) -> Result<Self> {
        let root = &config.dataset_root;
        check_prepared(root, config.scale)?;
        let mut pairs = Vec::new();
        for (i, path) in list_images(&hr_dir(root))?.iter().enumerate() {
            let hr = load_image(path)?.mod_crop(config.scale)?;
            let seed = config.seed.wrapping_add(i as u64);
            pairs.extend(extract_patches(&hr, config.scale, config.patch_size, config.patch_stride, Some(seed))?);
        }
        if pairs.is_empty() {
            return Err(Error::Data(format!(
                "no {}px patches could be cut from {}",
                config.patch_size,
                hr_dir(root).display()
            )));
        }
        Self::new(pairs, config.augment, config.seed)
    }

    pub fn pairs(&self) -> &[SamplePair] {
        &self.pairs
    }

    /// Samples per epoch: every pair, times eight when augmenting.
    pub fn epoch_len(&self) -> usize {
        self.pairs.len() * if self.augment { NUM_TRANSFORMS } else { 1 }
    }

    fn permutation(&self, epoch: usize) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(epoch as u64);
        let mut order: Vec<usize> = (0..self.epoch_len()).collect();
        order.shuffle(&mut rng);
        order
    }

    /// Sample id at global position `index` of the infinite sample stream.
    pub fn sample_at(&mut self, index: usize) -> usize {
        let len = self.epoch_len();
        let epoch = index / len;
        if self.cached.as_ref().map(|(e, _)| *e) != Some(epoch) {
            self.cached = Some((epoch, self.permutation(epoch)));
        }
        self.cached.as_ref().expect("just cached").1[index % len]
    }

    fn sample_planes(&self, id: usize) -> Result<(Vec<f32>, Vec<f32>, usize, usize)> {
        let (pair, k) = if self.augment {
            (&self.pairs[id / NUM_TRANSFORMS], id % NUM_TRANSFORMS)
        } else {
            (&self.pairs[id], 0)
        };
        let (h, w) = pair.target.dims();
        let (x, th, tw) = transform_planes(pair.input.data(), 3, h, w, k)?;
        let (y, _, _) = transform_planes(pair.target.data(), 3, h, w, k)?;
        Ok((x, y, th, tw))
    }

    /// Input and target batches for stream positions `start..start + size`.
    pub fn batch(&mut self, start: usize, size: usize) -> Result<(Tensor4, Tensor4)> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut hw = (0, 0);
        for i in start..start + size {
            let id = self.sample_at(i);
            let (x, y, h, w) = self.sample_planes(id)?;
            xs.extend(x);
            ys.extend(y);
            hw = (h, w);
        }
        let shape = Shape::new(size, 3, hw.0, hw.1);
        Ok((Tensor4::from_vec(shape, xs)?, Tensor4::from_vec(shape, ys)?))
    }
}
