//! Named image datasets below a data directory.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use hypernet::data::{DataLayout, ImageDataset};

use crate::{ExperimentError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageSource {
    Mnist,
    FashionMnist,
    Cifar10,
}

impl ImageSource {
    pub fn name(self) -> &'static str {
        match self {
            ImageSource::Mnist => "mnist",
            ImageSource::FashionMnist => "fashion-mnist",
            ImageSource::Cifar10 => "cifar10",
        }
    }

    /// Hidden width of `f` and `e` in the rotation experiment.
    pub fn rotation_hidden(self) -> usize {
        match self {
            ImageSource::Cifar10 => 100,
            _ => 50,
        }
    }

    pub fn load(self, data_dir: &Path, train: bool) -> Result<ImageDataset> {
        let layout = DataLayout::new(data_dir);
        Ok(match self {
            ImageSource::Cifar10 => layout.load_cifar10(train)?,
            other => layout.load_idx(other.name(), train)?,
        })
    }

    /// The first `n` images of a split, failing if fewer exist.
    pub fn load_n(self, data_dir: &Path, train: bool, n: usize) -> Result<ImageDataset> {
        let ds = self.load(data_dir, train)?;
        if ds.len() < n {
            return Err(ExperimentError::Invalid(format!(
                "{} {} split has {} images, {n} requested",
                self.name(),
                if train { "train" } else { "test" },
                ds.len()
            )));
        }
        Ok(ds.take(n))
    }
}

impl FromStr for ImageSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mnist" => Ok(ImageSource::Mnist),
            "fashion-mnist" => Ok(ImageSource::FashionMnist),
            "cifar10" => Ok(ImageSource::Cifar10),
            _ => Err(format!("unknown dataset {s:?} (mnist, fashion-mnist, cifar10)")),
        }
    }
}

impl fmt::Display for ImageSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
