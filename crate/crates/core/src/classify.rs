//! Random-forest keyphrase classifier over `[prev; cur; next]` token embeddings.

use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{snap_spans, Document, KeyClass};
use crate::embed::{context_concat, EmbeddingTable};
use crate::error::{Error, Result};

pub const CLASS_COUNT: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub n_trees: usize,
    /// 0 means unlimited.
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// `None` means `floor(sqrt(feature_dim))`.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            n_trees: 200,
            max_depth: 0,
            min_samples_split: 2,
            features_per_split: None,
            bootstrap: true,
            seed: 42,
        }
    }
}

impl ClassifierConfig {
    pub fn resolved_features_per_split(&self, n_features: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| (n_features as f64).sqrt().floor() as usize)
            .clamp(1, n_features.max(1))
    }
}

/// A tree node in flat storage. Leaves have `feature == -1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub feature: i32,
    pub threshold: f32,
    pub left: i32,
    pub right: i32,
    pub counts: [u32; CLASS_COUNT],
}

impl Node {
    fn leaf(counts: [u32; CLASS_COUNT]) -> Self {
        Node {
            feature: -1,
            threshold: 0.0,
            left: -1,
            right: -1,
            counts,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.feature < 0
    }
}

/// Structured view of a node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TreeNode {
    Internal {
        feature_index: usize,
        threshold: f32,
        left: usize,
        right: usize,
    },
    Leaf {
        class_counts: [u32; CLASS_COUNT],
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Root is node 0.
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn node(&self, i: usize) -> TreeNode {
        let n = &self.nodes[i];
        if n.is_leaf() {
            TreeNode::Leaf {
                class_counts: n.counts,
            }
        } else {
            TreeNode::Internal {
                feature_index: n.feature as usize,
                threshold: n.threshold,
                left: n.left as usize,
                right: n.right as usize,
            }
        }
    }

    /// Class counts of the leaf reached by `x`.
    pub fn leaf_counts(&self, x: ArrayView1<'_, f32>) -> [u32; CLASS_COUNT] {
        let mut i = 0usize;
        loop {
            let n = &self.nodes[i];
            if n.is_leaf() {
                return n.counts;
            }
            i = if x[n.feature as usize] <= n.threshold {
                n.left as usize
            } else {
                n.right as usize
            };
        }
    }

    pub fn predict(&self, x: ArrayView1<'_, f32>) -> KeyClass {
        KeyClass::plurality(&self.leaf_counts(x))
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            let n = &t.nodes[i];
            if n.is_leaf() {
                0
            } else {
                1 + go(t, n.left as usize).max(go(t, n.right as usize))
            }
        }
        go(self, 0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub config: ClassifierConfig,
    pub n_features: usize,
    pub trees: Vec<Tree>,
}

fn gini(counts: &[usize; CLASS_COUNT], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

fn midpoint(lo: f32, hi: f32) -> f32 {
    let m = ((lo as f64 + hi as f64) / 2.0) as f32;
    if m >= hi || m < lo {
        lo
    } else {
        m
    }
}

struct Split {
    feature: usize,
    threshold: f32,
    impurity: f64,
}

struct TreeBuilder<'a> {
    x: ArrayView2<'a, f32>,
    y: &'a [usize],
    config: &'a ClassifierConfig,
    per_split: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
    scratch: Vec<(f32, usize)>,
}

impl TreeBuilder<'_> {
    fn counts(&self, idx: &[usize]) -> [usize; CLASS_COUNT] {
        let mut c = [0usize; CLASS_COUNT];
        for &i in idx {
            c[self.y[i]] += 1;
        }
        c
    }

    fn best_split(&mut self, idx: &[usize], parent: &[usize; CLASS_COUNT]) -> Option<Split> {
        let d = self.x.ncols();
        let features: Vec<usize> = if self.per_split >= d {
            (0..d).collect()
        } else {
            let mut f = sample(&mut self.rng, d, self.per_split).into_vec();
            f.sort_unstable();
            f
        };
        let n = idx.len();
        let mut best: Option<Split> = None;
        for f in features {
            self.scratch.clear();
            self.scratch
                .extend(idx.iter().map(|&i| (self.x[[i, f]], self.y[i])));
            self.scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = [0usize; CLASS_COUNT];
            for k in 0..n - 1 {
                left[self.scratch[k].1] += 1;
                let (v, next) = (self.scratch[k].0, self.scratch[k + 1].0);
                if v >= next {
                    continue;
                }
                let nl = k + 1;
                let nr = n - nl;
                let mut right = *parent;
                for c in 0..CLASS_COUNT {
                    right[c] -= left[c];
                }
                let imp = (nl as f64 * gini(&left, nl) + nr as f64 * gini(&right, nr)) / n as f64;
                if best.as_ref().is_none_or(|b| imp < b.impurity) {
                    best = Some(Split {
                        feature: f,
                        threshold: midpoint(v, next),
                        impurity: imp,
                    });
                }
            }
        }
        best
    }

    fn build(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let counts = self.counts(idx);
        let slot = self.nodes.len();
        let leaf_counts = counts.map(|c| c as u32);
        self.nodes.push(Node::leaf(leaf_counts));

        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_capped = self.config.max_depth > 0 && depth >= self.config.max_depth;
        if pure || depth_capped || idx.len() < self.config.min_samples_split.max(2) {
            return slot;
        }
        let Some(split) = self.best_split(idx, &counts) else {
            return slot;
        };

        let x = self.x;
        let mut mid = 0;
        for k in 0..idx.len() {
            if x[[idx[k], split.feature]] <= split.threshold {
                idx.swap(k, mid);
                mid += 1;
            }
        }
        debug_assert!(mid > 0 && mid < idx.len());
        let (l, r) = idx.split_at_mut(mid);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[slot] = Node {
            feature: split.feature as i32,
            threshold: split.threshold,
            left: left as i32,
            right: right as i32,
            counts: leaf_counts,
        };
        slot
    }
}

fn tree_seed(seed: u64, tree: usize) -> u64 {
    seed ^ (tree as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Fits a forest of Gini-split trees.
pub fn train_forest(
    x: ArrayView2<'_, f32>,
    y: &[KeyClass],
    config: &ClassifierConfig,
) -> Result<Forest> {
    if x.nrows() != y.len() {
        return Err(Error::DimMismatch {
            line: 0,
            expected: x.nrows(),
            found: y.len(),
        });
    }
    if x.nrows() == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    if config.n_trees == 0 {
        return Err(Error::InvalidConfig("n_trees must be at least 1".into()));
    }
    if let Some(k) = config.features_per_split {
        if k == 0 || k > x.ncols() {
            return Err(Error::InvalidConfig(format!(
                "features_per_split {k} outside 1..={}",
                x.ncols()
            )));
        }
    }
    let labels: Vec<usize> = y.iter().map(|c| c.index()).collect();
    let per_split = config.resolved_features_per_split(x.ncols());
    let n = x.nrows();

    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(tree_seed(config.seed, k));
            let mut idx: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut builder = TreeBuilder {
                x,
                y: &labels,
                config,
                per_split,
                rng,
                nodes: Vec::new(),
                scratch: Vec::with_capacity(n),
            };
            builder.build(&mut idx, 0);
            Tree {
                nodes: builder.nodes,
            }
        })
        .collect();

    Ok(Forest {
        config: config.clone(),
        n_features: x.ncols(),
        trees,
    })
}

impl Forest {
    /// Plurality vote with per-class vote counts.
    pub fn predict(&self, x: ArrayView1<'_, f32>) -> Result<(KeyClass, [u32; CLASS_COUNT])> {
        if x.len() != self.n_features {
            return Err(Error::DimMismatch {
                line: 0,
                expected: self.n_features,
                found: x.len(),
            });
        }
        let mut votes = [0u32; CLASS_COUNT];
        for tree in &self.trees {
            votes[tree.predict(x).index()] += 1;
        }
        Ok((KeyClass::plurality(&votes), votes))
    }

    pub fn predict_rows(&self, x: ArrayView2<'_, f32>) -> Result<Vec<KeyClass>> {
        x.rows()
            .into_iter()
            .map(|r| self.predict(r).map(|(c, _)| c))
            .collect()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let manifest = ForestManifest {
            format: FOREST_FORMAT.into(),
            version: 1,
            class_names: KeyClass::ALL.iter().map(|c| c.as_str().to_string()).collect(),
            config: self.config.clone(),
            n_features: self.n_features,
            tree_sizes: self.trees.iter().map(|t| t.nodes.len()).collect(),
        };
        let path = dir.join("forest.json");
        fs::write(&path, serde_json::to_vec_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;

        let mut bytes = Vec::new();
        for node in self.trees.iter().flat_map(|t| &t.nodes) {
            bytes.extend_from_slice(&node.feature.to_le_bytes());
            bytes.extend_from_slice(&node.threshold.to_le_bytes());
            bytes.extend_from_slice(&node.left.to_le_bytes());
            bytes.extend_from_slice(&node.right.to_le_bytes());
            for c in node.counts {
                bytes.extend_from_slice(&c.to_le_bytes());
            }
        }
        let path = dir.join("nodes.bin");
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Forest> {
        let path = dir.join("forest.json");
        let raw = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: ForestManifest = serde_json::from_slice(&raw)?;
        if manifest.format != FOREST_FORMAT {
            return Err(Error::CorruptCheckpoint(format!(
                "unexpected forest format {:?}",
                manifest.format
            )));
        }
        let path = dir.join("nodes.bin");
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let total: usize = manifest.tree_sizes.iter().sum();
        if bytes.len() != total * NODE_BYTES {
            return Err(Error::CorruptCheckpoint(format!(
                "nodes.bin has {} bytes, manifest implies {}",
                bytes.len(),
                total * NODE_BYTES
            )));
        }
        let word = |b: &[u8], k: usize| [b[4 * k], b[4 * k + 1], b[4 * k + 2], b[4 * k + 3]];
        let mut nodes = bytes.chunks_exact(NODE_BYTES).map(|b| Node {
            feature: i32::from_le_bytes(word(b, 0)),
            threshold: f32::from_le_bytes(word(b, 1)),
            left: i32::from_le_bytes(word(b, 2)),
            right: i32::from_le_bytes(word(b, 3)),
            counts: [
                u32::from_le_bytes(word(b, 4)),
                u32::from_le_bytes(word(b, 5)),
                u32::from_le_bytes(word(b, 6)),
            ],
        });
        let mut trees = Vec::with_capacity(manifest.tree_sizes.len());
        for &size in &manifest.tree_sizes {
            let tree = Tree {
                nodes: nodes.by_ref().take(size).collect(),
            };
            validate_tree(&tree, manifest.n_features)?;
            trees.push(tree);
        }
        Ok(Forest {
            config: manifest.config,
            n_features: manifest.n_features,
            trees,
        })
    }
}

const FOREST_FORMAT: &str = "seal-forest";
const NODE_BYTES: usize = 28;

#[derive(Serialize, Deserialize)]
struct ForestManifest {
    format: String,
    version: u32,
    class_names: Vec<String>,
    config: ClassifierConfig,
    n_features: usize,
    tree_sizes: Vec<usize>,
}

fn validate_tree(tree: &Tree, n_features: usize) -> Result<()> {
    let n = tree.nodes.len() as i32;
    if n == 0 {
        return Err(Error::CorruptCheckpoint("empty tree".into()));
    }
    for (i, node) in tree.nodes.iter().enumerate() {
        if node.is_leaf() {
            continue;
        }
        let ok = (node.feature as usize) < n_features
            && node.left > i as i32
            && node.right > i as i32
            && node.left < n
            && node.right < n;
        if !ok {
            return Err(Error::CorruptCheckpoint(format!("invalid node {i}")));
        }
    }
    Ok(())
}

/// Majority class over a keyphrase's token predictions.
pub fn classify_keyphrase(token_predictions: &[KeyClass]) -> Option<KeyClass> {
    if token_predictions.is_empty() {
        return None;
    }
    let mut counts = [0u32; CLASS_COUNT];
    for c in token_predictions {
        counts[c.index()] += 1;
    }
    Some(KeyClass::plurality(&counts))
}

/// One context row per token of every typed gold keyphrase.
pub fn build_training_set(docs: &[Document], table: &EmbeddingTable) -> Result<(Array2<f32>, Vec<KeyClass>)> {
    let width = 3 * table.dim();
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for doc in docs {
        let snapped = snap_spans(doc);
        if snapped.is_empty() {
            continue;
        }
        let rows = table.lookup_sequence(&doc.tokens);
        for s in snapped {
            let Some(class) = doc.gold_spans[s.span_index].klass else {
                continue;
            };
            for t in s.first_token..=s.last_token {
                data.extend(context_concat(rows.view(), t, table.unk())?);
                labels.push(class);
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let x = Array2::from_shape_vec((labels.len(), width), data)
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    Ok((x, labels))
}
