//! Where each command reads and writes inside the output directory.

use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lcfn_core::evaluation::SplitData;
use lcfn_core::io::{self, read_eigen_cache, Side};
use lcfn_core::spectral::TruncatedBases;
use lcfn_core::InteractionSet;

pub struct Layout {
    pub root: PathBuf,
}

/// Fails with a message naming the command that produces `path`.
pub fn require(path: &Path, producer: &str) -> Result<()> {
    if !path.exists() {
        bail!("missing {}; run `lcfn {producer}` first", path.display());
    }
    Ok(())
}

impl Layout {
    pub fn new(root: PathBuf) -> Self {
        Self { root }
    }

    pub fn dir(&self, name: &str) -> Result<PathBuf> {
        let d = self.root.join(name);
        fs::create_dir_all(&d).with_context(|| format!("creating {}", d.display()))?;
        Ok(d)
    }

    pub fn dataset(&self, file: &str) -> PathBuf {
        self.root.join("dataset").join(file)
    }

    pub fn split(&self, file: &str) -> PathBuf {
        self.root.join("split").join(file)
    }

    pub fn eigen(&self, side: Side) -> PathBuf {
        self.root.join("eigen").join(format!("{side}.lcfb"))
    }

    pub fn pretrained(&self) -> PathBuf {
        self.root.join("pretrain").join("mf.ckpt")
    }

    pub fn trained(&self) -> PathBuf {
        self.root.join("train").join("model.ckpt")
    }

    pub fn id_maps(&self) -> Result<(Vec<String>, Vec<String>)> {
        let (users, items) = (self.dataset("users.txt"), self.dataset("items.txt"));
        require(&users, "ingest")?;
        require(&items, "ingest")?;
        Ok((io::read_ids(&users)?, io::read_ids(&items)?))
    }

    pub fn read_split_part(&self, name: &str) -> Result<InteractionSet> {
        let (users, items) = self.id_maps()?;
        let path = self.split(&format!("{name}.tsv"));
        require(&path, "split")?;
        Ok(io::read_interactions(&path, &users, &items)?)
    }

    pub fn read_split(&self, seed: u64) -> Result<SplitData> {
        Ok(SplitData::from_parts(
            self.read_split_part("train")?,
            self.read_split_part("validation")?,
            self.read_split_part("test")?,
            seed,
        )?)
    }

    /// Digest of the training split, which the eigen caches are keyed on.
    pub fn train_digest(&self) -> Result<String> {
        let path = self.split("train.tsv");
        require(&path, "split")?;
        Ok(io::digest_file(&path)?)
    }

    /// Loads both caches and checks they match the training split and, if
    /// given, the cutoff ratio `f`.
    pub fn read_bases(&self, f: Option<f64>) -> Result<TruncatedBases> {
        let digest = self.train_digest()?;
        let load = |side| -> Result<_> {
            let path = self.eigen(side);
            require(&path, "eigen")?;
            let file = BufReader::new(File::open(&path)?);
            let (header, basis) = read_eigen_cache(file, Some(&digest))
                .with_context(|| format!("loading {}; rerun `lcfn eigen`", path.display()))?;
            match f {
                Some(f) if header.cutoff_ratio != f => bail!(
                    "{} holds F = {}, but F = {f} was requested; run `lcfn eigen --cutoff {f}`",
                    path.display(),
                    header.cutoff_ratio
                ),
                _ => Ok((header.cutoff_ratio, basis)),
            }
        };
        let (fu, user) = load(Side::User)?;
        let (fi, item) = load(Side::Item)?;
        if fu != fi {
            bail!("user and item caches disagree on F ({fu} vs {fi}); rerun `lcfn eigen`");
        }
        Ok(TruncatedBases::new(user, item, fu)?)
    }
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

/// Exclusive claim on an output directory, released on drop.
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        let path = root.join(".lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => bail!(
                "{} is in use by another lcfn process (delete {} if it is stale)",
                root.display(),
                path.display()
            ),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
