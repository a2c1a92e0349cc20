//! Labeled 24x24 training sets: PGM directory loading, a deterministic
//! synthetic generator for desk-scale runs, and content hashing so every
//! node can verify it trained on identical bytes.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::imaging::{Image, IntegralImage};
use crate::{Error, Result, WINDOW};

/// One training window, already converted to its integral image. Raw pixels
/// are dropped at load time; nothing downstream needs them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingExample {
    pub image: IntegralImage,
    /// 1 = positive (object present), 0 = negative.
    pub label: u8,
}

/// Class counts of a training set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetStats {
    pub positives: u32,
    pub negatives: u32,
}

impl DatasetStats {
    pub fn total(&self) -> u32 {
        self.positives + self.negatives
    }
}

/// Where a dataset comes from. Cluster jobs ship this reference (plus a
/// content hash) instead of the images themselves; every node loads the
/// data locally and proves it has the same bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetRef {
    /// Deterministic synthetic data; fully portable across machines.
    Synth { seed: u64, positives: u32, negatives: u32 },
    /// Directories of P5 PGM files; must exist on every node.
    Pgm { positives: PathBuf, negatives: PathBuf },
}

impl fmt::Display for DatasetRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetRef::Synth {
                seed,
                positives,
                negatives,
            } => write!(f, "synth:{seed},{positives},{negatives}"),
            DatasetRef::Pgm {
                positives,
                negatives,
            } => write!(f, "pgm:{},{}", positives.display(), negatives.display()),
        }
    }
}

impl FromStr for DatasetRef {
    type Err = String;

    /// Parses the compact CLI form: `synth:SEED,POS,NEG` or `pgm:POS_DIR,NEG_DIR`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| format!("malformed dataset reference {s:?}"))?;
        match kind {
            "synth" => {
                let parts: Vec<&str> = rest.split(',').collect();
                if parts.len() != 3 {
                    return Err(format!("synth reference needs SEED,POS,NEG, got {rest:?}"));
                }
                let nums: Vec<u64> = parts
                    .iter()
                    .map(|p| p.parse::<u64>().map_err(|e| format!("{p:?}: {e}")))
                    .collect::<std::result::Result<_, _>>()?;
                Ok(DatasetRef::Synth {
                    seed: nums[0],
                    positives: nums[1] as u32,
                    negatives: nums[2] as u32,
                })
            }
            "pgm" => {
                let (pos, neg) = rest
                    .split_once(',')
                    .ok_or_else(|| format!("pgm reference needs POS_DIR,NEG_DIR, got {rest:?}"))?;
                Ok(DatasetRef::Pgm {
                    positives: PathBuf::from(pos),
                    negatives: PathBuf::from(neg),
                })
            }
            other => Err(format!("unknown dataset kind {other:?}")),
        }
    }
}

/// An immutable, order-stable training set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    source: DatasetRef,
    examples: Vec<TrainingExample>,
    stats: DatasetStats,
    hash: String,
}

impl Dataset {
    /// Builds a dataset directly from in-memory examples, recomputing the
    /// stats and content hash. Useful for derived sets (label-noised
    /// copies, subsets) that no reference can describe; note such a set
    /// hashes differently from whatever `source` loads.
    pub fn from_parts(source: DatasetRef, examples: Vec<TrainingExample>) -> Dataset {
        let positives = examples.iter().filter(|e| e.label == 1).count() as u32;
        let negatives = examples.len() as u32 - positives;
        assert!(positives >= 1 && negatives >= 1, "both classes required");
        let hash = hash_examples(&examples);
        Dataset {
            source,
            examples,
            stats: DatasetStats {
                positives,
                negatives,
            },
            hash,
        }
    }

    pub fn examples(&self) -> &[TrainingExample] {
        &self.examples
    }

    pub fn stats(&self) -> DatasetStats {
        self.stats
    }

    pub fn source(&self) -> &DatasetRef {
        &self.source
    }

    /// SHA-256 over labels and integral-image bytes in example order.
    pub fn content_hash(&self) -> &str {
        &self.hash
    }

    /// One-line text summary for bench reports.
    pub fn manifest(&self) -> String {
        format!(
            "{} n={} ({} positive, {} negative) sha256={}",
            self.source,
            self.stats.total(),
            self.stats.positives,
            self.stats.negatives,
            self.hash
        )
    }
}

/// Loads the dataset a reference points at.
pub fn load(source: &DatasetRef) -> Result<Dataset> {
    match source {
        DatasetRef::Synth {
            seed,
            positives,
            negatives,
        } => Ok(synth(*seed, *positives, *negatives)),
        DatasetRef::Pgm {
            positives,
            negatives,
        } => load_dir(positives, negatives),
    }
}

/// Loads every PGM in `positives_dir` (label 1) and `negatives_dir`
/// (label 0). Examples are ordered by label descending, then by file name
/// lexicographically — never by filesystem enumeration order — so example
/// index `i` means the same image on every node.
///
/// Fails atomically: any unreadable, non-PGM, or non-24x24 file aborts the
/// whole load with an error naming the file.
pub fn load_dir(positives_dir: &Path, negatives_dir: &Path) -> Result<Dataset> {
    let mut examples = Vec::new();
    let positives = load_class(positives_dir, 1, &mut examples)?;
    if positives == 0 {
        return Err(Error::EmptyClass { class: "positive" });
    }
    let negatives = load_class(negatives_dir, 0, &mut examples)?;
    if negatives == 0 {
        return Err(Error::EmptyClass { class: "negative" });
    }
    let stats = DatasetStats {
        positives,
        negatives,
    };
    let hash = hash_examples(&examples);
    Ok(Dataset {
        source: DatasetRef::Pgm {
            positives: positives_dir.to_path_buf(),
            negatives: negatives_dir.to_path_buf(),
        },
        examples,
        stats,
        hash,
    })
}

fn load_class(dir: &Path, label: u8, out: &mut Vec<TrainingExample>) -> Result<u32> {
    let mut files: Vec<PathBuf> = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::DatasetFile {
        path: dir.to_path_buf(),
        reason: e.to_string(),
    })?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::DatasetFile {
            path: dir.to_path_buf(),
            reason: e.to_string(),
        })?;
        if entry.path().is_file() {
            files.push(entry.path());
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    let mut count = 0u32;
    for path in files {
        let image = load_pgm(&path)?;
        if image.width() != WINDOW || image.height() != WINDOW {
            return Err(Error::DatasetFile {
                path,
                reason: format!(
                    "expected 24x24, got {}x{}",
                    image.width(),
                    image.height()
                ),
            });
        }
        out.push(TrainingExample {
            image: IntegralImage::from_image(&image),
            label,
        });
        count += 1;
    }
    Ok(count)
}

/// Reads one binary (P5) PGM file with maxval <= 255.
pub fn load_pgm(path: &Path) -> Result<Image> {
    let bytes = std::fs::read(path).map_err(|e| Error::DatasetFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    parse_pgm(&bytes).map_err(|reason| Error::DatasetFile {
        path: path.to_path_buf(),
        reason,
    })
}

fn parse_pgm(bytes: &[u8]) -> std::result::Result<Image, String> {
    let mut pos = 0usize;

    // Header tokens are separated by whitespace; '#' starts a comment that
    // runs to end of line.
    let mut next_token = |bytes: &[u8]| -> std::result::Result<String, String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated PGM header".to_string());
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    let magic = next_token(bytes)?;
    if magic != "P5" {
        return Err(format!("not a binary PGM (magic {magic:?}, expected \"P5\")"));
    }
    let width: u32 = next_token(bytes)?
        .parse()
        .map_err(|e| format!("bad width: {e}"))?;
    let height: u32 = next_token(bytes)?
        .parse()
        .map_err(|e| format!("bad height: {e}"))?;
    let maxval: u32 = next_token(bytes)?
        .parse()
        .map_err(|e| format!("bad maxval: {e}"))?;
    if maxval == 0 || maxval > 255 {
        return Err(format!("unsupported maxval {maxval} (must be 1..=255)"));
    }
    if width == 0 || height == 0 {
        return Err("zero image dimension".to_string());
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err("missing separator before raster data".to_string());
    }
    pos += 1;
    let expected = width as usize * height as usize;
    let raster = &bytes[pos..];
    if raster.len() < expected {
        return Err(format!(
            "raster truncated: expected {expected} bytes, found {}",
            raster.len()
        ));
    }
    Ok(Image::new(width, height, raster[..expected].to_vec()))
}

/// Generates a deterministic synthetic dataset: positives are a bright
/// centered block on a dark noisy background, negatives are uniform noise.
/// Some Haar feature separates the classes by a wide margin, so boosting
/// converges almost immediately — exactly what fast tests need.
pub fn synth(seed: u64, positives: u32, negatives: u32) -> Dataset {
    assert!(positives >= 1 && negatives >= 1, "both classes required");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = WINDOW;
    let block = 6..18u32; // centered 12x12 block
    let mut examples = Vec::with_capacity((positives + negatives) as usize);
    for _ in 0..positives {
        let mut pixels = Vec::with_capacity((side * side) as usize);
        for y in 0..side {
            for x in 0..side {
                let bright = block.contains(&x) && block.contains(&y);
                pixels.push(if bright {
                    rng.gen_range(170..=250u16) as u8
                } else {
                    rng.gen_range(0..=70u16) as u8
                });
            }
        }
        examples.push(TrainingExample {
            image: IntegralImage::from_image(&Image::new(side, side, pixels)),
            label: 1,
        });
    }
    for _ in 0..negatives {
        let pixels = (0..side * side).map(|_| rng.gen::<u8>()).collect();
        examples.push(TrainingExample {
            image: IntegralImage::from_image(&Image::new(side, side, pixels)),
            label: 0,
        });
    }
    let stats = DatasetStats {
        positives,
        negatives,
    };
    let hash = hash_examples(&examples);
    Dataset {
        source: DatasetRef::Synth {
            seed,
            positives,
            negatives,
        },
        examples,
        stats,
        hash,
    }
}

fn hash_examples(examples: &[TrainingExample]) -> String {
    let mut hasher = Sha256::new();
    for ex in examples {
        hasher.update([ex.label]);
        hasher.update(ex.image.width().to_le_bytes());
        hasher.update(ex.image.height().to_le_bytes());
        for s in ex.image.sums() {
            hasher.update(s.to_le_bytes());
        }
    }
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}
