//! Gini decision tree over binary features.

use crate::error::LimeError;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        /// Class frequencies at this leaf, summing to 1.
        probs: Vec<f64>,
    },
    Split {
        feature: usize,
        /// Subtree for feature value 0.
        absent: Box<Node>,
        /// Subtree for feature value 1.
        present: Box<Node>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    pub features: Vec<String>,
    pub classes: Vec<String>,
    pub root: Node,
}

/// One training example: a binary feature vector and its class index.
pub type Example = (Vec<u8>, usize);

fn counts(rows: &[&Example], k: usize) -> Vec<usize> {
    let mut c = vec![0; k];
    for (_, y) in rows {
        c[*y] += 1;
    }
    c
}

fn gini(c: &[usize]) -> f64 {
    let n: usize = c.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - c.iter().map(|&x| (x as f64 / n).powi(2)).sum::<f64>()
}

fn leaf(rows: &[&Example], k: usize) -> Node {
    let c = counts(rows, k);
    let n = rows.len() as f64;
    Node::Leaf {
        probs: c.iter().map(|&x| x as f64 / n).collect(),
    }
}

fn grow(rows: &[&Example], used: &mut Vec<bool>, k: usize) -> Node {
    let parent = counts(rows, k);
    let impurity = gini(&parent);
    if impurity == 0.0 {
        return leaf(rows, k);
    }
    let n = rows.len() as f64;
    let mut best: Option<(usize, f64)> = None;
    for f in 0..used.len() {
        if used[f] {
            continue;
        }
        let (on, off): (Vec<&Example>, Vec<&Example>) = rows.iter().partition(|(x, _)| x[f] == 1);
        if on.is_empty() || off.is_empty() {
            continue;
        }
        let weighted = (on.len() as f64 * gini(&counts(&on, k))
            + off.len() as f64 * gini(&counts(&off, k)))
            / n;
        let gain = impurity - weighted;
        // strict comparison keeps the lowest index on ties
        if gain > 1e-12 && best.is_none_or(|(_, g)| gain > g + 1e-12) {
            best = Some((f, gain));
        }
    }
    let Some((feature, _)) = best else {
        return leaf(rows, k);
    };
    let (on, off): (Vec<&Example>, Vec<&Example>) =
        rows.iter().copied().partition(|(x, _)| x[feature] == 1);
    used[feature] = true;
    let present = grow(&on, used, k);
    let absent = grow(&off, used, k);
    used[feature] = false;
    Node::Split {
        feature,
        absent: Box::new(absent),
        present: Box::new(present),
    }
}

/// Greedy top-down induction maximising Gini decrease. Ties go to the
/// lowest feature index; growth stops when a node is pure or no split
/// lowers impurity.
pub fn train_tree(
    features: &[String],
    classes: &[String],
    data: &[Example],
) -> Result<DecisionTree, LimeError> {
    if data.is_empty() {
        return Err(LimeError::EmptyDataset);
    }
    let d = features.len();
    for (x, y) in data {
        if x.len() != d {
            return Err(LimeError::Dimension {
                expected: d,
                actual: x.len(),
            });
        }
        if *y >= classes.len() {
            return Err(LimeError::UnknownClass(y.to_string()));
        }
    }
    for (i, c) in classes.iter().enumerate() {
        if !data.iter().any(|(_, y)| *y == i) {
            return Err(LimeError::MissingClass(c.clone()));
        }
    }
    let rows: Vec<&Example> = data.iter().collect();
    let root = grow(&rows, &mut vec![false; d], classes.len());
    Ok(DecisionTree {
        features: features.to_vec(),
        classes: classes.to_vec(),
        root,
    })
}

impl DecisionTree {
    pub fn predict_proba(&self, x: &[u8]) -> Result<&[f64], LimeError> {
        if x.len() != self.features.len() {
            return Err(LimeError::Dimension {
                expected: self.features.len(),
                actual: x.len(),
            });
        }
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { probs } => return Ok(probs),
                Node::Split {
                    feature,
                    absent,
                    present,
                } => node = if x[*feature] == 1 { present } else { absent },
            }
        }
    }

    /// Most probable class; ties go to the earlier class.
    pub fn predict(&self, x: &[u8]) -> Result<&str, LimeError> {
        let p = self.predict_proba(x)?;
        let mut best = 0;
        for (i, v) in p.iter().enumerate() {
            if *v > p[best] {
                best = i;
            }
        }
        Ok(&self.classes[best])
    }

    pub fn class_index(&self, name: &str) -> Result<usize, LimeError> {
        self.classes
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| LimeError::UnknownClass(name.to_owned()))
    }

    pub fn depth(&self) -> usize {
        fn depth(n: &Node) -> usize {
            match n {
                Node::Leaf { .. } => 0,
                Node::Split { absent, present, .. } => 1 + depth(absent).max(depth(present)),
            }
        }
        depth(&self.root)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize, prefix: &str) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn single_class_is_one_leaf() {
        let t = train_tree(&names(2, "f"), &names(1, "c"), &[(vec![0, 1], 0), (vec![1, 1], 0)]).unwrap();
        assert_eq!(t.root, Node::Leaf { probs: vec![1.0] });
    }

    #[test]
    fn perfect_first_feature_is_the_root() {
        // features 0 and 1 both separate the classes; the tie goes to 0
        let data = vec![(vec![1, 1, 0], 0), (vec![0, 0, 1], 1), (vec![1, 1, 1], 0)];
        let t = train_tree(&names(3, "f"), &names(2, "c"), &data).unwrap();
        match &t.root {
            Node::Split { feature, .. } => assert_eq!(*feature, 0),
            other => panic!("expected split, got {other:?}"),
        }
        assert_eq!(t.predict(&[1, 0, 0]).unwrap(), "c0");
    }

    #[test]
    fn errors() {
        assert_eq!(
            train_tree(&names(1, "f"), &names(1, "c"), &[]),
            Err(LimeError::EmptyDataset)
        );
        assert_eq!(
            train_tree(&names(1, "f"), &names(2, "c"), &[(vec![1], 0)]),
            Err(LimeError::MissingClass("c1".into()))
        );
        let t = train_tree(&names(1, "f"), &names(1, "c"), &[(vec![1], 0)]).unwrap();
        assert!(matches!(t.predict_proba(&[1, 0]), Err(LimeError::Dimension { .. })));
    }

    #[test]
    fn unsplittable_mixture_keeps_frequencies() {
        let data = vec![(vec![1], 0), (vec![1], 1), (vec![1], 1)];
        let t = train_tree(&names(1, "f"), &names(2, "c"), &data).unwrap();
        let p = t.predict_proba(&[1]).unwrap();
        assert!((p[0] - 1.0 / 3.0).abs() < 1e-12 && (p[1] - 2.0 / 3.0).abs() < 1e-12);
    }
}
