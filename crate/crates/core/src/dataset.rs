//! Class-per-directory image datasets: stratified splitting, augmentation
//! balancing and the JSON manifest that records both.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::io::{is_image_path, load_image};
use crate::imaging::{augment, AugmentOp, ImageGrid};
use crate::rng::{substream, Rng, Stream};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitName {
    Train,
    Valid,
    Test,
}

impl SplitName {
    pub const ALL: [SplitName; 3] = [SplitName::Train, SplitName::Valid, SplitName::Test];

    pub fn name(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Valid => "valid",
            SplitName::Test => "test",
        }
    }
}

impl std::str::FromStr for SplitName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SplitName::ALL
            .into_iter()
            .find(|n| n.name() == s)
            .ok_or_else(|| Error::domain(format!("unknown split '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ratios {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl Default for Ratios {
    fn default() -> Self {
        Self {
            train: 0.7,
            valid: 0.1,
            test: 0.2,
        }
    }
}

impl Ratios {
    pub fn as_array(&self) -> [f64; 3] {
        [self.train, self.valid, self.test]
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.as_array();
        if r.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::Config(vec![format!(
                "split ratios must be non-negative, got {r:?}"
            )]));
        }
        let sum: f64 = r.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(vec![format!(
                "split ratios must sum to 1, got {sum}"
            )]));
        }
        Ok(())
    }
}

/// Largest-remainder apportionment of `n` items. Ties in the remainder go to
/// the earlier split.
pub fn split_counts(n: usize, ratios: &Ratios) -> [usize; 3] {
    let r = ratios.as_array();
    let exact: Vec<f64> = r.iter().map(|x| x * n as f64).collect();
    let mut counts: [usize; 3] = [0; 3];
    for (c, e) in counts.iter_mut().zip(&exact) {
        *c = e.floor() as usize;
    }
    let mut left = n - counts.iter().sum::<usize>();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Shuffles `0..n` and cuts it by [`split_counts`].
pub fn split_indices(n: usize, ratios: &Ratios, rng: &mut Rng) -> [Vec<usize>; 3] {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let [a, b, _] = split_counts(n, ratios);
    [
        idx[..a].to_vec(),
        idx[a..a + b].to_vec(),
        idx[a + b..].to_vec(),
    ]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Provenance {
    Original,
    /// Produced by applying `op` to the original at `source`.
    Augmented {
        op: AugmentOp,
        source: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sample {
    /// Path relative to the dataset root, `/`-separated.
    pub path: String,
    pub class: usize,
    pub provenance: Provenance,
}

impl Sample {
    pub fn is_original(&self) -> bool {
        self.provenance == Provenance::Original
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub version: u32,
    pub classes: Vec<String>,
    pub seed: u64,
    pub ratios: Ratios,
    pub train: Vec<Sample>,
    pub valid: Vec<Sample>,
    pub test: Vec<Sample>,
}

impl DatasetManifest {
    pub fn split(&self, name: SplitName) -> &[Sample] {
        match name {
            SplitName::Train => &self.train,
            SplitName::Valid => &self.valid,
            SplitName::Test => &self.test,
        }
    }

    fn split_mut(&mut self, name: SplitName) -> &mut Vec<Sample> {
        match name {
            SplitName::Train => &mut self.train,
            SplitName::Valid => &mut self.valid,
            SplitName::Test => &mut self.test,
        }
    }

    pub fn class_counts(&self, name: SplitName) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len()];
        for s in self.split(name) {
            counts[s.class] += 1;
        }
        counts
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |d: String| {
            Err(Error::Format {
                what: "manifest",
                detail: d,
            })
        };
        if self.version != MANIFEST_VERSION {
            return bad(format!("unsupported version {}", self.version));
        }
        if self.classes.is_empty() {
            return bad("no classes".into());
        }
        self.ratios.validate().or_else(|e| bad(e.to_string()))?;
        let mut seen = HashSet::new();
        for name in SplitName::ALL {
            for s in self.split(name) {
                if s.class >= self.classes.len() {
                    return bad(format!(
                        "sample '{}' has class {} of {}",
                        s.path,
                        s.class,
                        self.classes.len()
                    ));
                }
                if !seen.insert(s.path.as_str()) {
                    return bad(format!("sample '{}' listed twice", s.path));
                }
                if name == SplitName::Test && !s.is_original() {
                    return bad(format!("augmented sample '{}' in test split", s.path));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text).map_err(|e| Error::Format {
            what: "manifest",
            detail: e.to_string(),
        })?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }
}

fn sorted_entries(dir: &Path) -> Result<Vec<std::fs::DirEntry>> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::io(dir, e))?;
    entries.sort_by_key(|e| e.file_name());
    Ok(entries)
}

/// Lists `root/<class>/<image>` as (class names, relative paths per class).
pub fn scan_tree(root: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut classes = Vec::new();
    let mut files = Vec::new();
    for entry in sorted_entries(root)? {
        if !entry.path().is_dir() {
            continue;
        }
        let class = entry.file_name().to_string_lossy().into_owned();
        let mut images = Vec::new();
        for f in sorted_entries(&entry.path())? {
            let p = f.path();
            if p.is_file() && is_image_path(&p) {
                images.push(format!("{class}/{}", f.file_name().to_string_lossy()));
            }
        }
        classes.push(class);
        files.push(images);
    }
    if classes.is_empty() {
        return Err(Error::Dataset(format!(
            "no class directories under {}",
            root.display()
        )));
    }
    let empty: Vec<&str> = classes
        .iter()
        .zip(&files)
        .filter(|(_, f)| f.is_empty())
        .map(|(c, _)| c.as_str())
        .collect();
    if !empty.is_empty() {
        return Err(Error::Dataset(format!(
            "classes without images: {}",
            empty.join(", ")
        )));
    }
    Ok((classes, files))
}

/// Per-class stratified split of already-listed files.
pub fn split_files(
    classes: Vec<String>,
    files: &[Vec<String>],
    ratios: &Ratios,
    seed: u64,
) -> Result<DatasetManifest> {
    ratios.validate()?;
    let mut rng = substream(seed, Stream::Split);
    let mut m = DatasetManifest {
        version: MANIFEST_VERSION,
        classes,
        seed,
        ratios: *ratios,
        train: Vec::new(),
        valid: Vec::new(),
        test: Vec::new(),
    };
    for (class, paths) in files.iter().enumerate() {
        if paths.is_empty() {
            return Err(Error::Dataset(format!(
                "class '{}' has no samples",
                m.classes[class]
            )));
        }
        let parts = split_indices(paths.len(), ratios, &mut rng);
        for (name, idx) in SplitName::ALL.into_iter().zip(parts) {
            let mut idx = idx;
            idx.sort_unstable();
            m.split_mut(name).extend(idx.into_iter().map(|i| Sample {
                path: paths[i].clone(),
                class,
                provenance: Provenance::Original,
            }));
        }
    }
    Ok(m)
}

/// Scans `root` and splits every class with the seeded generator.
pub fn split(root: &Path, ratios: &Ratios, seed: u64) -> Result<DatasetManifest> {
    let (classes, files) = scan_tree(root)?;
    split_files(classes, &files, ratios, seed)
}

fn augmented_path(source: &str, op: AugmentOp, n: usize) -> String {
    let stem = source.rsplit_once('.').map_or(source, |(s, _)| s);
    format!("{stem}__{op}_{n}.png")
}

/// Oversamples every minority class of `target` up to the majority count.
///
/// Sources are drawn from a seeded shuffle of the class's originals (reshuffled
/// whenever it runs out) and the operation cycles through
/// [`AugmentOp::CYCLE`].
pub fn balance(
    manifest: &DatasetManifest,
    target: SplitName,
    seed: u64,
) -> Result<DatasetManifest> {
    if target == SplitName::Test {
        return Err(Error::Dataset("the test split is never augmented".into()));
    }
    let counts = manifest.class_counts(target);
    let empty: Vec<&str> = manifest
        .classes
        .iter()
        .zip(&counts)
        .filter(|(_, &n)| n == 0)
        .map(|(c, _)| c.as_str())
        .collect();
    if !empty.is_empty() {
        return Err(Error::Dataset(format!(
            "cannot balance classes with no samples: {}",
            empty.join(", ")
        )));
    }
    let mut out = manifest.clone();
    let majority = counts.iter().copied().max().unwrap_or(0);
    let mut rng = substream(seed, Stream::Balance);
    let mut taken: HashSet<String> = SplitName::ALL
        .iter()
        .flat_map(|&n| manifest.split(n))
        .map(|s| s.path.clone())
        .collect();
    for (class, &n) in counts.iter().enumerate() {
        let originals: Vec<&Sample> = manifest
            .split(target)
            .iter()
            .filter(|s| s.class == class && s.is_original())
            .collect();
        if n >= majority {
            continue;
        }
        if originals.is_empty() {
            return Err(Error::Dataset(format!(
                "class '{}' has no original samples to augment",
                manifest.classes[class]
            )));
        }
        let mut deck: Vec<usize> = Vec::new();
        for j in 0..majority - n {
            if deck.is_empty() {
                deck = (0..originals.len()).collect();
                deck.shuffle(&mut rng);
                deck.reverse();
            }
            let source = originals[deck.pop().expect("deck refilled")];
            let op = AugmentOp::CYCLE[j % AugmentOp::CYCLE.len()];
            let mut k = j;
            let mut path = augmented_path(&source.path, op, k);
            while taken.contains(&path) {
                k += majority;
                path = augmented_path(&source.path, op, k);
            }
            taken.insert(path.clone());
            out.split_mut(target).push(Sample {
                path,
                class,
                provenance: Provenance::Augmented {
                    op,
                    source: source.path.clone(),
                },
            });
        }
    }
    Ok(out)
}

/// Loads a sample, applying its augmentation to the original on the fly.
pub fn load_sample(root: &Path, sample: &Sample) -> Result<ImageGrid> {
    match &sample.provenance {
        Provenance::Original => load_image(&root.join(&sample.path)),
        Provenance::Augmented { op, source } => Ok(augment(&load_image(&root.join(source))?, *op)),
    }
}

/// Per-class counts of every split, keyed by class name.
pub fn count_table(m: &DatasetManifest) -> BTreeMap<String, [usize; 3]> {
    let per: Vec<Vec<usize>> = SplitName::ALL.iter().map(|&s| m.class_counts(s)).collect();
    m.classes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.clone(), [per[0][i], per[1][i], per[2][i]]))
        .collect()
}
