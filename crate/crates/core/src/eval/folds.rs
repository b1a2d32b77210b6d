use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::features::Granularity;

use super::EvalError;

/// Unit that must never straddle folds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    ByUser,
    ByPost,
    ByRow,
}

impl Grouping {
    pub fn as_str(self) -> &'static str {
        match self {
            Grouping::ByUser => "by_user",
            Grouping::ByPost => "by_post",
            Grouping::ByRow => "by_row",
        }
    }
}

/// Assignment of rows to `k` folds, grouped so that each group lands in
/// exactly one fold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldPlan {
    pub k: usize,
    pub grouping: Grouping,
    pub seed: u64,
    pub row_ids: Vec<String>,
    pub groups: Vec<String>,
    pub assignments: Vec<usize>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl FoldPlan {
    /// Shuffle the distinct groups (first-appearance order) with a seeded
    /// ChaCha8 generator and deal them round-robin into `k` folds.
    pub fn from_groups(
        row_ids: Vec<String>,
        groups: Vec<String>,
        k: usize,
        grouping: Grouping,
        seed: u64,
    ) -> Result<Self, EvalError> {
        if k < 2 {
            return Err(EvalError::InvalidK(k));
        }
        if row_ids.len() != groups.len() {
            return Err(EvalError::LengthMismatch { left: row_ids.len(), right: groups.len() });
        }
        let mut distinct: Vec<&str> = Vec::new();
        let mut seen = HashMap::new();
        for g in &groups {
            if !seen.contains_key(g.as_str()) {
                seen.insert(g.as_str(), distinct.len());
                distinct.push(g.as_str());
            }
        }
        if distinct.len() < k {
            return Err(EvalError::TooFewGroups { groups: distinct.len(), k });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        distinct.shuffle(&mut rng);
        let fold_of_group: HashMap<&str, usize> =
            distinct.iter().enumerate().map(|(i, g)| (*g, i % k)).collect();
        let assignments: Vec<usize> = groups.iter().map(|g| fold_of_group[g.as_str()]).collect();
        let index = row_ids.iter().enumerate().map(|(i, r)| (r.clone(), i)).collect();
        Ok(FoldPlan { k, grouping, seed, row_ids, groups, assignments, index })
    }

    pub fn fold_of(&self, row_id: &str) -> Option<usize> {
        self.index.get(row_id).map(|&i| self.assignments[i])
    }

    pub fn group_of(&self, row_id: &str) -> Option<&str> {
        self.index.get(row_id).map(|&i| self.groups[i].as_str())
    }

    pub fn fold_rows(&self, fold: usize) -> Vec<&str> {
        self.row_ids
            .iter()
            .zip(&self.assignments)
            .filter(|(_, f)| **f == fold)
            .map(|(r, _)| r.as_str())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.row_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_ids.is_empty()
    }
}

/// Plan folds over every post or sentence of `corpus`.
pub fn make_folds(
    corpus: &Corpus,
    granularity: Granularity,
    k: usize,
    grouping: Grouping,
    seed: u64,
) -> Result<FoldPlan, EvalError> {
    let mut rows = Vec::new();
    let mut groups = Vec::new();
    match granularity {
        Granularity::Post => {
            for (user, post) in corpus.posts_with_users() {
                rows.push(post.post_id.clone());
                groups.push(match grouping {
                    Grouping::ByUser => user.to_string(),
                    Grouping::ByPost | Grouping::ByRow => post.post_id.clone(),
                });
            }
        }
        Granularity::Sentence => {
            for (user, post, sentence) in corpus.sentences() {
                rows.push(sentence.sentence_id.clone());
                groups.push(match grouping {
                    Grouping::ByUser => user.to_string(),
                    Grouping::ByPost => post.post_id.clone(),
                    Grouping::ByRow => sentence.sentence_id.clone(),
                });
            }
        }
    }
    FoldPlan::from_groups(rows, groups, k, grouping, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Post, Timeline};

    fn corpus(users: usize, posts: usize) -> Corpus {
        Corpus {
            timelines: (0..users)
                .map(|u| Timeline {
                    user_id: format!("u{u}"),
                    posts: (0..posts)
                        .map(|p| Post::from_text(format!("u{u}p{p}"), p as i64, "One. Two."))
                        .collect(),
                })
                .collect(),
        }
    }

    #[test]
    fn ten_users_five_folds() {
        let plan = make_folds(&corpus(10, 3), Granularity::Post, 5, Grouping::ByUser, 1).unwrap();
        for f in 0..5 {
            let users: std::collections::BTreeSet<_> =
                plan.fold_rows(f).iter().map(|r| plan.group_of(r).unwrap().to_string()).collect();
            assert_eq!(users.len(), 2);
        }
    }

    #[test]
    fn seeded_and_grouped() {
        let c = corpus(7, 4);
        let a = make_folds(&c, Granularity::Sentence, 3, Grouping::ByUser, 9).unwrap();
        let b = make_folds(&c, Granularity::Sentence, 3, Grouping::ByUser, 9).unwrap();
        assert_eq!(a, b);
        let mut fold_of_user = HashMap::new();
        for (row, f) in a.row_ids.iter().zip(&a.assignments) {
            let user = a.group_of(row).unwrap();
            assert_eq!(*fold_of_user.entry(user).or_insert(*f), *f);
        }
    }

    #[test]
    fn too_few_groups() {
        let err = make_folds(&corpus(3, 2), Granularity::Post, 5, Grouping::ByUser, 0).unwrap_err();
        assert_eq!(err, EvalError::TooFewGroups { groups: 3, k: 5 });
        assert_eq!(make_folds(&corpus(3, 2), Granularity::Post, 1, Grouping::ByRow, 0), Err(EvalError::InvalidK(1)));
    }
}
