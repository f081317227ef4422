//! Segmentation that best agrees with several annotations of one video.
//!
//! Shot boundaries `0..=n` are the vertices of a DAG and the edge `(i, j)`
//! is the story made of shots `i..j`. A segmentation with `l` stories is a
//! path of `l` edges from `0` to `n`. The agreement objective splits into a
//! part that is additive over edges once `l` is fixed and a part that
//! depends on the stories already on the path; the latter is tracked per DP
//! state as running IoU maxima, one per annotation story.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{interval_iou, mean_iou};
use crate::types::{AnnotationSet, Interval, Segmentation, Story, Timeline};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementResult {
    pub segmentation: Segmentation,
    /// Mean IoU of `segmentation` against the annotations.
    pub mean_iou: f64,
    /// `J1 + J2`, equal to `2 · |annotations| · mean_iou`.
    pub j: f64,
}

/// Annotation stories flattened across annotations, in canonical order.
struct Problem {
    n: usize,
    m: usize,
    /// Owning annotation of each flattened story.
    owner: Vec<usize>,
    /// `1 / #S` of the owning annotation.
    weight: Vec<f64>,
    spans: Vec<Interval>,
    shots: Vec<Story>,
    timeline: Timeline,
}

/// Annotations sorted by boundary vector so results do not depend on the
/// order in which they were supplied.
fn canonical(set: &AnnotationSet) -> AnnotationSet {
    let mut anns = set.annotations().to_vec();
    anns.sort_by_key(|a| a.boundaries());
    AnnotationSet::new(anns).expect("reordering keeps the set valid")
}

fn check_timeline(set: &AnnotationSet, timeline: &Timeline) -> Result<()> {
    if timeline.n_shots() != set.n_shots() {
        return Err(Error::Incompatible(format!(
            "timeline has {} shots, annotations have {}",
            timeline.n_shots(),
            set.n_shots()
        )));
    }
    Ok(())
}

impl Problem {
    fn new(set: &AnnotationSet, timeline: &Timeline) -> Self {
        let mut p = Problem {
            n: set.n_shots(),
            m: set.len(),
            owner: Vec::new(),
            weight: Vec::new(),
            spans: Vec::new(),
            shots: Vec::new(),
            timeline: timeline.clone(),
        };
        for (a, ann) in set.annotations().iter().enumerate() {
            let w = 1.0 / ann.n_stories() as f64;
            for &s in ann.stories() {
                p.owner.push(a);
                p.weight.push(w);
                p.spans.push(timeline.story_span(s));
                p.shots.push(s);
            }
        }
        p
    }

    /// Nonzero IoUs between the story `i..j` and every annotation story.
    fn overlaps(&self, i: usize, j: usize) -> Vec<(usize, f64)> {
        let span = self.timeline.span(i, j - 1);
        self.shots
            .iter()
            .enumerate()
            .filter(|(_, s)| s.first_shot < j && s.last_shot >= i)
            .map(|(k, _)| (k, interval_iou(span, self.spans[k])))
            .filter(|&(_, iou)| iou > 0.0)
            .collect()
    }

    /// `Σ_S max_{s ∈ S} IoU` from an overlap list.
    fn best_per_annotation(&self, overlaps: &[(usize, f64)]) -> f64 {
        let mut best = vec![0.0f64; self.m];
        for &(k, iou) in overlaps {
            let b = &mut best[self.owner[k]];
            *b = b.max(iou);
        }
        best.iter().sum()
    }

    fn gain(&self, maxima: &[f64], overlaps: &[(usize, f64)]) -> f64 {
        overlaps
            .iter()
            .map(|&(k, iou)| self.weight[k] * (iou - maxima[k]).max(0.0))
            .sum()
    }
}

/// Precomputed overlap lists and `J1` numerators for every edge.
struct EdgeTable {
    stride: usize,
    overlaps: Vec<Vec<(usize, f64)>>,
    w1_sum: Vec<f64>,
}

impl EdgeTable {
    fn new(p: &Problem) -> Self {
        let stride = p.n + 1;
        let mut overlaps = vec![Vec::new(); stride * stride];
        let mut w1_sum = vec![0.0; stride * stride];
        for i in 0..p.n {
            for j in i + 1..=p.n {
                let o = p.overlaps(i, j);
                w1_sum[i * stride + j] = p.best_per_annotation(&o);
                overlaps[i * stride + j] = o;
            }
        }
        EdgeTable { stride, overlaps, w1_sum }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.stride + j
    }
}

fn check_edge(i: usize, j: usize, n: usize) -> Result<()> {
    if i >= j || j > n {
        return Err(Error::invalid(format!("edge ({i}, {j}) is not a story of a {n}-shot video")));
    }
    Ok(())
}

/// `(1/l) Σ_S max_{s ∈ S} IoU(i..j, s)`.
pub fn edge_weight_w1(i: usize, j: usize, set: &AnnotationSet, timeline: &Timeline, l: usize) -> Result<f64> {
    check_timeline(set, timeline)?;
    check_edge(i, j, set.n_shots())?;
    if l == 0 {
        return Err(Error::invalid("path length must be at least 1"));
    }
    let p = Problem::new(set, timeline);
    Ok(p.best_per_annotation(&p.overlaps(i, j)) / l as f64)
}

/// Best IoU reached so far by the stories on a path, for every story of
/// every annotation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningMaxima {
    /// `values[a][s]` for story `s` of annotation `a`.
    pub values: Vec<Vec<f64>>,
}

impl RunningMaxima {
    pub fn new(set: &AnnotationSet) -> Self {
        RunningMaxima {
            values: set.annotations().iter().map(|a| vec![0.0; a.n_stories()]).collect(),
        }
    }

    /// Adds the story `i..j` to the path.
    pub fn push(&mut self, i: usize, j: usize, set: &AnnotationSet, timeline: &Timeline) -> Result<()> {
        check_timeline(set, timeline)?;
        check_edge(i, j, set.n_shots())?;
        let span = timeline.span(i, j - 1);
        for (vals, ann) in self.values.iter_mut().zip(set.annotations()) {
            for (v, &s) in vals.iter_mut().zip(ann.stories()) {
                *v = v.max(interval_iou(span, timeline.story_span(s)));
            }
        }
        Ok(())
    }

    /// `Σ_S (1/#S) Σ_s values[S][s]`.
    pub fn j2(&self) -> f64 {
        self.values
            .iter()
            .map(|v| v.iter().sum::<f64>() / v.len() as f64)
            .sum()
    }
}

/// Increase in `J2` from appending the story `i..j` to a path whose stories
/// have reached `state`.
pub fn marginal_gain_w2(
    state: &RunningMaxima,
    i: usize,
    j: usize,
    set: &AnnotationSet,
    timeline: &Timeline,
) -> Result<f64> {
    check_timeline(set, timeline)?;
    check_edge(i, j, set.n_shots())?;
    if state.values.len() != set.len()
        || state.values.iter().zip(set.annotations()).any(|(v, a)| v.len() != a.n_stories())
    {
        return Err(Error::shape("running maxima do not match the annotation set"));
    }
    let span = timeline.span(i, j - 1);
    let mut total = 0.0;
    for (vals, ann) in state.values.iter().zip(set.annotations()) {
        let mut g = 0.0;
        for (&v, &s) in vals.iter().zip(ann.stories()) {
            g += (interval_iou(span, timeline.story_span(s)) - v).max(0.0);
        }
        total += g / vals.len() as f64;
    }
    Ok(total)
}

struct State {
    score: f64,
    maxima: Vec<f64>,
}

/// Best path of exactly `l` edges under the path-dependent DP.
fn best_path(p: &Problem, edges: &EdgeTable, l: usize) -> Vec<usize> {
    let n = p.n;
    let zeros = vec![0.0; p.shots.len()];
    let mut layer: Vec<Option<State>> = (0..=n).map(|_| None).collect();
    layer[0] = Some(State {
        score: 0.0,
        maxima: zeros,
    });
    let mut back = vec![vec![0usize; n + 1]; l + 1];
    for step in 1..=l {
        let mut next: Vec<Option<State>> = (0..=n).map(|_| None).collect();
        // Leave room for the remaining `l - step` edges.
        let v_hi = n - (l - step);
        let v_lo = if step == l { n } else { step };
        for v in v_lo..=v_hi {
            let mut best: Option<(f64, usize)> = None;
            for x in step - 1..v {
                let Some(prev) = &layer[x] else { continue };
                let e = edges.idx(x, v);
                let s = prev.score + edges.w1_sum[e] / l as f64 + p.gain(&prev.maxima, &edges.overlaps[e]);
                if best.is_none_or(|(b, _)| s > b) {
                    best = Some((s, x));
                }
            }
            if let Some((score, x)) = best {
                let mut maxima = layer[x].as_ref().expect("chosen predecessor exists").maxima.clone();
                for &(k, iou) in &edges.overlaps[edges.idx(x, v)] {
                    maxima[k] = maxima[k].max(iou);
                }
                next[v] = Some(State { score, maxima });
                back[step][v] = x;
            }
        }
        layer = next;
    }
    let mut bounds = Vec::with_capacity(l);
    let mut v = n;
    for step in (1..=l).rev() {
        v = back[step][v];
        bounds.push(v);
    }
    bounds.reverse();
    bounds
}

fn result_for(seg: Segmentation, set: &AnnotationSet, timeline: &Timeline) -> Result<AgreementResult> {
    let score = mean_iou(&seg, set, timeline)?;
    Ok(AgreementResult {
        segmentation: seg,
        mean_iou: score,
        j: 2.0 * set.len() as f64 * score,
    })
}

/// Approximate maximum-agreement segmentation.
///
/// Runs the DP for every story count `l` in `1..=n` and returns the
/// candidate with the highest exactly recomputed mean IoU; ties go to the
/// lexicographically smallest boundary vector, as in
/// [`brute_force_agreement`].
pub fn max_agreement(set: &AnnotationSet, timeline: &Timeline) -> Result<AgreementResult> {
    check_timeline(set, timeline)?;
    let set = canonical(set);
    let p = Problem::new(&set, timeline);
    let edges = EdgeTable::new(&p);
    let mut best: Option<AgreementResult> = None;
    for l in 1..=p.n {
        let seg = Segmentation::from_boundaries(p.n, &best_path(&p, &edges, l))?;
        let cand = result_for(seg, &set, timeline)?;
        let better = best.as_ref().is_none_or(|b| {
            cand.mean_iou > b.mean_iou + TIE_EPS
                || ((cand.mean_iou - b.mean_iou).abs() <= TIE_EPS
                    && cand.segmentation.boundaries() < b.segmentation.boundaries())
        });
        if better {
            best = Some(cand);
        }
    }
    Ok(best.expect("n >= 1 yields at least one candidate"))
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Near-equal objectives within this distance are treated as ties.
const TIE_EPS: f64 = 1e-12;

struct Search<'a> {
    p: &'a Problem,
    edges: &'a EdgeTable,
    max_stories: usize,
    maxima: Vec<f64>,
    bounds: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
}

impl Search<'_> {
    fn visit(&mut self, from: usize, w1: f64, j2: f64) {
        let n = self.p.n;
        if from == n {
            let j = w1 / self.bounds.len() as f64 + j2;
            let better = match &self.best {
                None => true,
                Some((b, bb)) => j > b + TIE_EPS || ((j - b).abs() <= TIE_EPS && self.bounds < *bb),
            };
            if better {
                self.best = Some((j, self.bounds.clone()));
            }
            return;
        }
        if self.bounds.len() == self.max_stories {
            return;
        }
        self.bounds.push(from);
        for to in from + 1..=n {
            let e = self.edges.idx(from, to);
            let gain = self.p.gain(&self.maxima, &self.edges.overlaps[e]);
            let saved: Vec<(usize, f64)> = self.edges.overlaps[e]
                .iter()
                .map(|&(k, iou)| {
                    let old = self.maxima[k];
                    self.maxima[k] = old.max(iou);
                    (k, old)
                })
                .collect();
            self.visit(to, w1 + self.edges.w1_sum[e], j2 + gain);
            for (k, old) in saved.into_iter().rev() {
                self.maxima[k] = old;
            }
        }
        self.bounds.pop();
    }
}

/// Exact maximum-agreement segmentation by enumeration.
///
/// Without `max_stories` all `2^(n-1)` segmentations are tried and `n` must
/// not exceed `max_n`. With it, only segmentations of at most that many
/// stories are tried, and their number must not exceed `2^(max_n-1)`. Ties
/// go to the lexicographically smallest boundary vector.
pub fn brute_force_agreement(
    set: &AnnotationSet,
    timeline: &Timeline,
    max_n: usize,
    max_stories: Option<usize>,
) -> Result<AgreementResult> {
    check_timeline(set, timeline)?;
    let n = set.n_shots();
    match max_stories {
        None if n > max_n => {
            return Err(Error::TooLarge(format!(
                "{n} shots exceed the enumeration bound of {max_n}"
            )));
        }
        Some(0) => return Err(Error::invalid("max_stories must be at least 1")),
        Some(k) => {
            let count: f64 = (0..k.min(n) as u64).map(|s| binomial(n as u64 - 1, s)).sum();
            let limit = 2f64.powi(max_n.saturating_sub(1) as i32);
            if count > limit {
                return Err(Error::TooLarge(format!(
                    "{count} segmentations with at most {k} stories exceed the bound of {limit}"
                )));
            }
        }
        None => {}
    }
    let set = canonical(set);
    let p = Problem::new(&set, timeline);
    let edges = EdgeTable::new(&p);
    let mut search = Search {
        p: &p,
        edges: &edges,
        max_stories: max_stories.unwrap_or(n),
        maxima: vec![0.0; p.shots.len()],
        bounds: Vec::new(),
        best: None,
    };
    search.visit(0, 0.0, 0.0);
    let (_, bounds) = search.best.expect("the single story is always enumerated");
    result_for(Segmentation::from_boundaries(n, &bounds)?, &set, timeline)
}
