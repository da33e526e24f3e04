//! CART classification tree grown to purity with Gini impurity.

use rand::Rng;

/// Flat node storage; the root is node 0 and children always have larger
/// indices than their parent.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: u16,
        /// Samples with `x[feature] <= threshold` go left.
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        /// Class counts of the (bootstrap-weighted) samples in this leaf.
        counts: Vec<u32>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    pub(crate) nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize))
                }
            }
        }
        walk(&self.nodes, 0)
    }

    /// Class counts of the leaf `x` falls into.
    pub fn leaf_counts(&self, x: &[f64]) -> &[u32] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { counts } => return counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature as usize] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    pub(crate) fn single_leaf(counts: Vec<u32>) -> Self {
        Self {
            nodes: vec![Node::Leaf { counts }],
        }
    }
}

/// Gini impurity `1 - sum(p_i^2)`. `None` for an empty node.
pub fn gini(counts: &[u32]) -> Option<f64> {
    let total: u64 = counts.iter().map(|&c| u64::from(c)).sum();
    if total == 0 {
        return None;
    }
    let t = total as f64;
    Some(1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>())
}

pub(crate) struct TreeParams {
    pub n_classes: usize,
    pub max_features: usize,
    pub min_samples_leaf: u32,
    pub min_samples_split: u32,
}

/// Column-major training matrix.
pub(crate) struct Columns<'a> {
    pub columns: &'a [Vec<f64>],
    pub labels: &'a [u8],
}

#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct BuildStats {
    pub max_candidates: usize,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
}

/// Grow one tree on the rows with non-zero `weights` (bootstrap
/// multiplicities). Candidate features at every node are drawn without
/// replacement from `rng`.
pub(crate) fn build_tree<R: Rng>(
    data: &Columns<'_>,
    weights: &[u32],
    params: &TreeParams,
    rng: &mut R,
) -> (DecisionTree, BuildStats) {
    let n_features = data.columns.len();
    let mut samples: Vec<u32> = (0..weights.len() as u32)
        .filter(|&i| weights[i as usize] > 0)
        .collect();
    let mut nodes: Vec<Node> = vec![Node::Leaf { counts: Vec::new() }];
    let mut stack: Vec<(usize, usize, usize)> = vec![(0, 0, samples.len())];
    let mut feature_pool: Vec<usize> = (0..n_features).collect();
    let mut sort_buf: Vec<(f64, u32)> = Vec::with_capacity(samples.len());
    let mut stats = BuildStats::default();

    while let Some((node_id, start, end)) = stack.pop() {
        let node_samples = &samples[start..end];
        let mut counts = vec![0u32; params.n_classes];
        for &s in node_samples {
            counts[data.labels[s as usize] as usize] += weights[s as usize];
        }
        let total: u32 = counts.iter().sum();
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || total < params.min_samples_split || total < 2 * params.min_samples_leaf {
            nodes[node_id] = Node::Leaf { counts };
            continue;
        }

        for i in 0..params.max_features {
            let j = rng.random_range(i..n_features);
            feature_pool.swap(i, j);
        }
        let mut candidates = feature_pool[..params.max_features].to_vec();
        candidates.sort_unstable();
        stats.max_candidates = stats.max_candidates.max(candidates.len());

        let mut best: Option<BestSplit> = None;
        let mut left = vec![0u32; params.n_classes];
        for &f in &candidates {
            let col = &data.columns[f];
            sort_buf.clear();
            sort_buf.extend(node_samples.iter().map(|&s| (col[s as usize], s)));
            sort_buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            if sort_buf[0].0 == sort_buf[sort_buf.len() - 1].0 {
                continue;
            }
            left.iter_mut().for_each(|c| *c = 0);
            let mut w_left = 0u32;
            for j in 0..sort_buf.len() - 1 {
                let (v, s) = sort_buf[j];
                let w = weights[s as usize];
                left[data.labels[s as usize] as usize] += w;
                w_left += w;
                let next = sort_buf[j + 1].0;
                if v == next {
                    continue;
                }
                let w_right = total - w_left;
                if w_left < params.min_samples_leaf || w_right < params.min_samples_leaf {
                    continue;
                }
                let mut sl = 0.0;
                let mut sr = 0.0;
                for (l, c) in left.iter().zip(&counts) {
                    let l = *l as f64;
                    let r = *c as f64 - l;
                    sl += l * l;
                    sr += r * r;
                }
                // maximizing this minimizes the weighted child Gini
                let score = sl / w_left as f64 + sr / w_right as f64;
                if best.as_ref().is_none_or(|b| score > b.score) {
                    best = Some(BestSplit {
                        feature: f,
                        threshold: midpoint(v, next),
                        score,
                    });
                }
            }
        }

        let Some(split) = best else {
            nodes[node_id] = Node::Leaf { counts };
            continue;
        };
        let col = &data.columns[split.feature];
        let slice = &mut samples[start..end];
        let mut boundary = 0;
        for i in 0..slice.len() {
            if col[slice[i] as usize] <= split.threshold {
                slice.swap(i, boundary);
                boundary += 1;
            }
        }
        let left_id = nodes.len();
        let right_id = left_id + 1;
        nodes.push(Node::Leaf { counts: Vec::new() });
        nodes.push(Node::Leaf { counts: Vec::new() });
        nodes[node_id] = Node::Split {
            feature: split.feature as u16,
            threshold: split.threshold,
            left: left_id as u32,
            right: right_id as u32,
        };
        stack.push((right_id, start + boundary, end));
        stack.push((left_id, start, start + boundary));
    }
    (DecisionTree { nodes }, stats)
}

/// Midpoint of two consecutive distinct values, never rounding up to `hi`.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) * 0.5;
    if mid < hi {
        mid
    } else {
        lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gini_examples() {
        assert_eq!(gini(&[4, 0, 0]), Some(0.0));
        assert_eq!(gini(&[2, 2]), Some(0.5));
        let g = gini(&[1, 2, 3]).unwrap();
        assert!((g - 11.0 / 18.0).abs() < 1e-12);
        assert_eq!(gini(&[0, 0]), None);
    }

    #[test]
    fn midpoint_stays_below_upper_value() {
        assert_eq!(midpoint(1.0, 3.0), 2.0);
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        assert_eq!(midpoint(a, b), a);
    }

    fn toy() -> (Vec<Vec<f64>>, Vec<u8>) {
        // class is 1 when x0 > 2.5; x1 is noise
        let x0 = vec![1.0, 2.0, 3.0, 4.0, 1.5, 3.5];
        let x1 = vec![5.0, 1.0, 4.0, 2.0, 3.0, 6.0];
        let y = vec![0, 0, 1, 1, 0, 1];
        (vec![x0, x1], y)
    }

    #[test]
    fn separable_data_gives_one_split() {
        let (cols, y) = toy();
        let data = Columns { columns: &cols, labels: &y };
        let params = TreeParams {
            n_classes: 2,
            max_features: 2,
            min_samples_leaf: 1,
            min_samples_split: 2,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (tree, _) = build_tree(&data, &[1; 6], &params, &mut rng);
        assert_eq!(tree.depth(), 1);
        match &tree.nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 2.5);
            }
            other => panic!("expected split, got {other:?}"),
        }
        assert_eq!(tree.leaf_counts(&[1.0, 0.0]), &[3, 0]);
        assert_eq!(tree.leaf_counts(&[9.0, 0.0]), &[0, 3]);
    }

    #[test]
    fn leaves_partition_the_weighted_samples() {
        let (cols, y) = toy();
        let data = Columns { columns: &cols, labels: &y };
        let params = TreeParams {
            n_classes: 2,
            max_features: 1,
            min_samples_leaf: 1,
            min_samples_split: 2,
        };
        let weights = [2, 0, 1, 3, 1, 1];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (tree, stats) = build_tree(&data, &weights, &params, &mut rng);
        let total: u32 = tree
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf { counts } => Some(counts.iter().sum::<u32>()),
                _ => None,
            })
            .sum();
        assert_eq!(total, weights.iter().sum::<u32>());
        assert!(stats.max_candidates <= 1);
        for (i, n) in tree.nodes.iter().enumerate() {
            if let Node::Split { left, right, .. } = n {
                assert!(*left as usize > i && *right as usize > i);
            }
        }
    }

    #[test]
    fn min_samples_leaf_is_respected() {
        let (cols, y) = toy();
        let data = Columns { columns: &cols, labels: &y };
        let params = TreeParams {
            n_classes: 2,
            max_features: 2,
            min_samples_leaf: 3,
            min_samples_split: 2,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (tree, _) = build_tree(&data, &[1; 6], &params, &mut rng);
        for n in &tree.nodes {
            if let Node::Leaf { counts } = n {
                assert!(counts.iter().sum::<u32>() >= 3);
            }
        }
    }
}
