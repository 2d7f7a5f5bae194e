//! Parameter study of the rank-margin rule on template databases.
//!
//! For every query the smallest ε at which the margin rule still accepts the
//! rank-1 candidate is `ε* = mean(S_2..S_{C+1}) / S_1`. A query is filtered at
//! a given ε exactly when `ε* > ε`, so filtering rates are read off stored
//! samples without re-querying.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sim::TemplateTracklet;
use crate::types::{dot, l2_norm, Embedding, GtId};

/// Consecutive templates moved or queried at once.
pub const SLICE_LEN: usize = 5;

/// `mean(sims[1..=c]) / sims[0]` for descending `sims`; `+inf` when `sims[0] = 0`.
pub fn epsilon_star<T: Real>(sims: &[T], c: usize) -> Result<T> {
    if c == 0 || sims.len() < c + 1 {
        return Err(Error::Insufficient(format!("need {} candidates, have {}", c + 1, sims.len())));
    }
    let s1 = sims[0];
    if s1 <= T::zero() {
        return Ok(T::infinity());
    }
    let mean = sims[1..=c].iter().copied().sum::<T>() / T::lit(c as f64);
    Ok(mean / s1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryEpsilon<T> {
    pub epsilon: T,
    /// Index into the gallery of the rank-1 entry.
    pub top: usize,
    pub top_similarity: T,
}

/// ε* of a query against reference templates. Ties in similarity rank the
/// lower gallery index first.
pub fn epsilon_for_query<T: Real>(query: &Embedding<T>, gallery: &[Embedding<T>], c: usize) -> Result<QueryEpsilon<T>> {
    let sims = ranked_similarities(query.values(), gallery.iter().map(|e| e.values()));
    let epsilon = epsilon_star(&sims.iter().map(|s| s.1).collect::<Vec<_>>(), c)?;
    Ok(QueryEpsilon {
        epsilon,
        top: sims[0].0,
        top_similarity: sims[0].1,
    })
}

/// `(index, similarity)` sorted by similarity descending; the inputs need not be normalized.
fn ranked_similarities<'a, T: Real>(query: &[T], gallery: impl Iterator<Item = &'a [T]>) -> Vec<(usize, T)> {
    let qn = l2_norm(query);
    let half = T::lit(0.5);
    let mut sims: Vec<(usize, T)> = gallery
        .enumerate()
        .map(|(i, g)| (i, half * (T::one() + dot(query, g) / (qn * l2_norm(g)))))
        .collect();
    sims.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
    sims
}

fn template_count<T>(t: &TemplateTracklet<T>) -> usize {
    t.verifiables.len()
}

/// Moves 5-template slices from random pure pairs into new mixed tracklets
/// until at least `round(fraction * N)` identities are mixed.
pub fn mixed_identity_db<T: Real>(
    pure: &[TemplateTracklet<T>],
    fraction: f64,
    seed: u64,
) -> Result<Vec<TemplateTracklet<T>>> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidConfig(format!("mix fraction {fraction} outside [0, 1]")));
    }
    let n_ids = pure.iter().filter(|t| t.identity.is_some()).count();
    let target = (fraction * n_ids as f64).round() as usize;
    let mut db: Vec<TemplateTracklet<T>> = pure.to_vec();
    if target == 0 {
        return Ok(db);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // keep at least one template behind so the source tracklet survives
    let mut eligible: Vec<usize> = (0..db.len())
        .filter(|&i| db[i].identity.is_some() && template_count(&db[i]) > SLICE_LEN)
        .collect();
    if eligible.len() < target.max(2) {
        return Err(Error::Insufficient(format!(
            "{} identities with more than {SLICE_LEN} templates, need {}",
            eligible.len(),
            target.max(2)
        )));
    }
    eligible.shuffle(&mut rng);
    let mut next_id = db.iter().map(|t| t.id).max().unwrap_or(0) + 1;
    let mut mixed = 0;
    let mut picks = eligible.into_iter();
    while mixed < target {
        let (Some(a), Some(b)) = (picks.next(), picks.next()) else {
            return Err(Error::Insufficient("ran out of pure identities to mix".into()));
        };
        let mut templates = take_slice(&mut db[a], &mut rng);
        templates.extend(take_slice(&mut db[b], &mut rng));
        db.push(TemplateTracklet {
            id: next_id,
            identity: None,
            enrollables: templates.clone(),
            verifiables: templates,
        });
        next_id += 1;
        mixed += 2;
    }
    Ok(db)
}

/// Removes a random run of `SLICE_LEN` consecutive templates.
fn take_slice<T: Real>(t: &mut TemplateTracklet<T>, rng: &mut impl Rng) -> Vec<Embedding<T>> {
    let n = t.verifiables.len();
    let start = rng.random_range(0..=n - SLICE_LEN);
    let slice: Vec<Embedding<T>> = t.verifiables.drain(start..start + SLICE_LEN).collect();
    t.enrollables.retain(|e| !slice.contains(e));
    slice
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryClass {
    Correct,
    Wrong,
    IdSwitch,
}

impl QueryClass {
    pub const ALL: [QueryClass; 3] = [QueryClass::Correct, QueryClass::Wrong, QueryClass::IdSwitch];

    pub fn name(self) -> &'static str {
        match self {
            QueryClass::Correct => "correct",
            QueryClass::Wrong => "wrong",
            QueryClass::IdSwitch => "id_switch",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSample {
    pub mix_level: f64,
    pub rep: usize,
    pub c: usize,
    pub class: QueryClass,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSummary {
    pub mix_level: f64,
    pub c: usize,
    pub epsilon: f64,
    pub class: QueryClass,
    pub pct_filtered: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyParams {
    pub mix_levels: Vec<f64>,
    pub c_values: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
}

impl Default for StudyParams {
    fn default() -> Self {
        Self {
            mix_levels: vec![0.0, 0.05, 0.10, 0.15, 0.20, 0.25],
            c_values: (1..=9).collect(),
            reps: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub params: StudyParams,
    pub samples: Vec<EpsilonSample>,
}

impl StudyResult {
    fn select(&self, mix_level: f64, c: usize, class: QueryClass, rep: Option<usize>) -> impl Iterator<Item = f64> + '_ {
        self.samples
            .iter()
            .filter(move |s| {
                s.mix_level == mix_level && s.c == c && s.class == class && rep.is_none_or(|r| s.rep == r)
            })
            .map(|s| s.epsilon)
    }

    pub fn count(&self, mix_level: f64, c: usize, class: QueryClass, rep: Option<usize>) -> usize {
        self.select(mix_level, c, class, rep).count()
    }

    /// Percentage of samples with `ε* > epsilon`; `None` without samples.
    pub fn pct_filtered(&self, mix_level: f64, c: usize, class: QueryClass, epsilon: f64, rep: Option<usize>) -> Option<f64> {
        let (mut n, mut hit) = (0usize, 0usize);
        for e in self.select(mix_level, c, class, rep) {
            n += 1;
            if e > epsilon {
                hit += 1;
            }
        }
        (n > 0).then(|| 100.0 * hit as f64 / n as f64)
    }

    pub fn summaries(&self, epsilon: f64, c_values: &[usize]) -> Vec<FilterSummary> {
        let mut out = Vec::new();
        for &mix_level in &self.params.mix_levels {
            for &c in c_values {
                for class in QueryClass::ALL {
                    let count = self.count(mix_level, c, class, None);
                    if let Some(pct) = self.pct_filtered(mix_level, c, class, epsilon, None) {
                        out.push(FilterSummary {
                            mix_level,
                            c,
                            epsilon,
                            class,
                            pct_filtered: pct,
                            count,
                        });
                    }
                }
            }
        }
        out
    }
}

struct Entry<T> {
    identity: Option<GtId>,
    sum: Vec<T>,
}

fn sum_of<T: Real>(es: &[Embedding<T>]) -> Vec<T> {
    let mut s = vec![T::zero(); es.first().map_or(0, |e| e.dim())];
    for e in es {
        for (a, &b) in s.iter_mut().zip(e.values()) {
            *a = *a + b;
        }
    }
    s
}

fn sub_assign<T: Real>(a: &mut [T], b: &[T]) {
    for (x, &y) in a.iter_mut().zip(b) {
        *x = *x - y;
    }
}

fn random_slice<T: Real>(t: &TemplateTracklet<T>, rng: &mut impl Rng) -> Vec<T> {
    let n = t.verifiables.len();
    let start = rng.random_range(0..=n - SLICE_LEN);
    sum_of(&t.verifiables[start..start + SLICE_LEN])
}

/// Ranks `query` against the gallery with `removed` subtracted from the
/// matching entries, and records ε* for every C.
#[allow(clippy::too_many_arguments)]
fn record_query<T: Real>(
    entries: &[Entry<T>],
    query: &[T],
    removed: &[(usize, &[T])],
    class_of: impl Fn(Option<GtId>) -> QueryClass,
    mix_level: f64,
    rep: usize,
    c_values: &[usize],
    out: &mut Vec<EpsilonSample>,
) {
    let adjusted: Vec<Vec<T>> = removed
        .iter()
        .map(|&(i, s)| {
            let mut v = entries[i].sum.clone();
            sub_assign(&mut v, s);
            v
        })
        .collect();
    let mut refs: Vec<&[T]> = Vec::with_capacity(entries.len());
    let mut owner: Vec<usize> = Vec::with_capacity(entries.len());
    for (i, e) in entries.iter().enumerate() {
        let v = match removed.iter().position(|&(j, _)| j == i) {
            Some(k) => adjusted[k].as_slice(),
            None => e.sum.as_slice(),
        };
        if l2_norm(v) > T::epsilon() {
            refs.push(v);
            owner.push(i);
        }
    }
    if refs.is_empty() {
        return;
    }
    let ranked = ranked_similarities(query, refs.iter().copied());
    let sims: Vec<T> = ranked.iter().map(|r| r.1).collect();
    let class = class_of(entries[owner[ranked[0].0]].identity);
    for &c in c_values {
        if let Ok(eps) = epsilon_star(&sims, c) {
            out.push(EpsilonSample {
                mix_level,
                rep,
                c,
                class,
                epsilon: eps.to_f64_lossy(),
            });
        }
    }
}

/// Runs the study on mixed versions of `pure` for every level and repetition.
pub fn run_study<T: Real>(pure: &[TemplateTracklet<T>], params: &StudyParams) -> Result<StudyResult> {
    let max_c = params.c_values.iter().copied().max().unwrap_or(0);
    if params.c_values.is_empty() || params.c_values.contains(&0) {
        return Err(Error::InvalidConfig("C values must be positive".into()));
    }
    if params.reps == 0 || params.mix_levels.is_empty() {
        return Err(Error::InvalidConfig("need at least one repetition and mix level".into()));
    }
    if pure.len() < max_c + 1 {
        return Err(Error::Insufficient(format!(
            "database has {} tracklets, C up to {max_c} needs {}",
            pure.len(),
            max_c + 1
        )));
    }
    let mut samples = Vec::new();
    for (li, &level) in params.mix_levels.iter().enumerate() {
        for rep in 0..params.reps {
            let run_seed = params.seed ^ ((li as u64) << 32) ^ (rep as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let db = mixed_identity_db(pure, level, run_seed)?;
            let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
            rng.set_stream(1);
            let entries: Vec<Entry<T>> = db
                .iter()
                .map(|t| Entry {
                    identity: t.identity,
                    sum: sum_of(&t.enrollables),
                })
                .collect();
            let queryable: Vec<usize> = (0..db.len())
                .filter(|&i| db[i].identity.is_some() && db[i].verifiables.len() > SLICE_LEN)
                .collect();
            if queryable.len() < 2 {
                return Err(Error::Insufficient("fewer than two queryable identities".into()));
            }
            for (qi, &i) in queryable.iter().enumerate() {
                let own = db[i].identity;
                // reconnection query: a slice taken out of the identity's own tracklet
                let slice = random_slice(&db[i], &mut rng);
                record_query(
                    &entries,
                    &slice,
                    &[(i, &slice)],
                    |top| if top.is_some() && top == own { QueryClass::Correct } else { QueryClass::Wrong },
                    level,
                    rep,
                    &params.c_values,
                    &mut samples,
                );
                // id-switch query: slices of two identities
                let mut pj = rng.random_range(0..queryable.len() - 1);
                if pj >= qi {
                    pj += 1;
                }
                let j = queryable[pj];
                let a = random_slice(&db[i], &mut rng);
                let b = random_slice(&db[j], &mut rng);
                let mut q = a.clone();
                for (x, &y) in q.iter_mut().zip(&b) {
                    *x = *x + y;
                }
                record_query(
                    &entries,
                    &q,
                    &[(i, &a), (j, &b)],
                    |_| QueryClass::IdSwitch,
                    level,
                    rep,
                    &params.c_values,
                    &mut samples,
                );
            }
        }
    }
    Ok(StudyResult {
        params: params.clone(),
        samples,
    })
}
