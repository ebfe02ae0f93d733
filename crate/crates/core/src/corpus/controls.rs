use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{CorpusError, StateIndex};
use crate::distance::{cosine_similarity, DistanceError};
use crate::time::MonthWindow;
use crate::vectors::{
    accumulate_terms, activity_vector, build_token_corpus, tfidf, SparseVector, StateDocument,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlMatch {
    pub control: String,
    pub score: f64,
}

/// Per-subreddit vectors used for control matching.
#[derive(Debug, Clone, Default)]
pub struct SubredditProfiles {
    /// TF-IDF of the lifespan-aggregate document.
    pub vocabulary: BTreeMap<String, SparseVector>,
    /// Comment counts per month of the corpus window.
    pub activity: BTreeMap<String, SparseVector>,
}

impl SubredditProfiles {
    pub fn build(
        docs: &[StateDocument],
        states: &StateIndex,
        window: MonthWindow,
    ) -> Result<Self, CorpusError> {
        let token_corpus = build_token_corpus(docs, window.end)?;
        let mut lifespan: BTreeMap<&str, BTreeMap<String, u32>> = BTreeMap::new();
        for d in docs {
            accumulate_terms(
                lifespan.entry(d.state.subreddit.as_str()).or_default(),
                &d.terms,
            );
        }
        let mut out = SubredditProfiles::default();
        for sub in states.subreddits() {
            let terms = lifespan.get(sub).cloned().unwrap_or_default();
            out.vocabulary
                .insert(sub.to_string(), tfidf(&terms, &token_corpus));
            out.activity.insert(
                sub.to_string(),
                activity_vector(states, sub, window)?.to_sparse(),
            );
        }
        Ok(out)
    }
}

fn cosine_or_zero(a: &SparseVector, b: &SparseVector) -> Result<f64, CorpusError> {
    match cosine_similarity(a, b) {
        Ok(c) => Ok(c),
        // a community without sampled text or comments contributes nothing
        Err(DistanceError::ZeroVector) => Ok(0.0),
        Err(e) => Err(CorpusError::Vectors(crate::vectors::VectorError::Format(
            e.to_string(),
        ))),
    }
}

/// For each intervened subreddit, the candidate maximizing
/// `0.5 * cos(vocabulary) + 0.5 * cos(activity)`. Ties go to the
/// lexicographically smallest candidate; candidates may be reused.
pub fn match_controls(
    intervened: &BTreeSet<String>,
    candidates: &BTreeSet<String>,
    profiles: &SubredditProfiles,
) -> Result<BTreeMap<String, ControlMatch>, CorpusError> {
    if candidates.is_empty() {
        return Err(CorpusError::NoCandidates);
    }
    let lookup = |name: &str| -> Result<(&SparseVector, &SparseVector), CorpusError> {
        match (profiles.vocabulary.get(name), profiles.activity.get(name)) {
            (Some(v), Some(a)) => Ok((v, a)),
            _ => Err(CorpusError::UnknownSubreddit(name.to_string())),
        }
    };
    let mut out = BTreeMap::new();
    for target in intervened {
        let (tv, ta) = lookup(target)?;
        let mut best: Option<ControlMatch> = None;
        for cand in candidates.iter().filter(|c| *c != target) {
            let (cv, ca) = lookup(cand)?;
            let score = 0.5 * cosine_or_zero(tv, cv)? + 0.5 * cosine_or_zero(ta, ca)?;
            if best.as_ref().map_or(true, |b| score > b.score) {
                best = Some(ControlMatch {
                    control: cand.clone(),
                    score,
                });
            }
        }
        match best {
            Some(b) => {
                out.insert(target.clone(), b);
            }
            None => return Err(CorpusError::NoCandidates),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profiles(entries: &[(&str, &[f64], &[f64])]) -> SubredditProfiles {
        let mut p = SubredditProfiles::default();
        for (name, v, a) in entries {
            p.vocabulary
                .insert(name.to_string(), SparseVector::from_dense(v));
            p.activity
                .insert(name.to_string(), SparseVector::from_dense(a));
        }
        p
    }

    fn set(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn identical_candidate_scores_one() {
        let p = profiles(&[
            ("t", &[1.0, 2.0], &[3.0, 1.0]),
            ("same", &[1.0, 2.0], &[3.0, 1.0]),
            ("other", &[2.0, 0.0], &[0.0, 1.0]),
        ]);
        let m = match_controls(&set(&["t"]), &set(&["same", "other"]), &p).unwrap();
        assert_eq!(m["t"].control, "same");
        assert!((m["t"].score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_candidate_loses() {
        let p = profiles(&[
            ("t", &[1.0, 0.0], &[1.0, 0.0]),
            ("orth", &[0.0, 1.0], &[0.0, 1.0]),
            ("twin", &[2.0, 0.0], &[5.0, 0.0]),
        ]);
        let m = match_controls(&set(&["t"]), &set(&["orth", "twin"]), &p).unwrap();
        assert_eq!(m["t"].control, "twin");
    }

    #[test]
    fn three_candidates_brute_force() {
        let p = profiles(&[
            ("t", &[1.0, 1.0, 0.0], &[2.0, 1.0, 0.0]),
            ("c1", &[1.0, 0.0, 0.0], &[2.0, 1.0, 0.0]),
            ("c2", &[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0]),
            ("c3", &[0.0, 1.0, 1.0], &[2.0, 2.0, 0.0]),
        ]);
        // hand-computed cosines
        let cos = |a: &[f64], b: &[f64]| {
            let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            d / (a.iter().map(|x| x * x).sum::<f64>().sqrt()
                * b.iter().map(|x| x * x).sum::<f64>().sqrt())
        };
        let scores = [
            (
                "c1",
                0.5 * cos(&[1., 1., 0.], &[1., 0., 0.]) + 0.5 * cos(&[2., 1., 0.], &[2., 1., 0.]),
            ),
            (
                "c2",
                0.5 * cos(&[1., 1., 0.], &[1., 1., 1.]) + 0.5 * cos(&[2., 1., 0.], &[1., 1., 1.]),
            ),
            (
                "c3",
                0.5 * cos(&[1., 1., 0.], &[0., 1., 1.]) + 0.5 * cos(&[2., 1., 0.], &[2., 2., 0.]),
            ),
        ];
        let best = scores
            .iter()
            .fold(scores[0], |b, s| if s.1 > b.1 { *s } else { b });
        let m = match_controls(&set(&["t"]), &set(&["c1", "c2", "c3"]), &p).unwrap();
        assert_eq!(m["t"].control, best.0);
        assert!((m["t"].score - best.1).abs() < 1e-12);
    }

    #[test]
    fn ties_go_to_smallest_name_and_scaling_is_irrelevant() {
        let p = profiles(&[
            ("t", &[1.0, 0.0], &[1.0, 0.0]),
            ("b", &[3.0, 0.0], &[1.0, 0.0]),
            ("a", &[1.0, 0.0], &[7.0, 0.0]),
        ]);
        let m = match_controls(&set(&["t"]), &set(&["b", "a"]), &p).unwrap();
        assert_eq!(m["t"].control, "a");
    }

    #[test]
    fn empty_candidates_error() {
        let p = profiles(&[("t", &[1.0], &[1.0])]);
        assert!(matches!(
            match_controls(&set(&["t"]), &BTreeSet::new(), &p),
            Err(CorpusError::NoCandidates)
        ));
    }
}
