//! End-user workflows: averaging, K selection, nearest-centroid
//! classification and the repeated-set averaging experiment.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dtw::{dtw_cost, dtw_sum};
use crate::error::{Result, TtwError};
use crate::series::{row_mean, AlignmentResult, LabeledDataset, TimeSeries};
use crate::trainer::{train, TrainConfig};

/// Powers of two from 1 to 16.
pub const DEFAULT_K_GRID: [usize; 5] = [1, 2, 4, 8, 16];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Gradient-trained warping followed by the pointwise mean.
    Ttw,
    /// Pointwise mean of the unaligned series.
    Avg,
}

impl std::str::FromStr for Method {
    type Err = TtwError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ttw" => Ok(Method::Ttw),
            "avg" => Ok(Method::Avg),
            other => Err(TtwError::InvalidConfig(format!("unknown method '{other}'"))),
        }
    }
}

/// Sample-by-sample mean.
pub fn average_avg(data: &LabeledDataset) -> TimeSeries {
    TimeSeries::from_vec_unchecked(row_mean(&data.rows()))
}

/// Trains warps and returns the centroid of the synchronized series.
pub fn average_ttw(
    data: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<(TimeSeries, AlignmentResult)> {
    let result = train(data, cfg)?;
    Ok((result.centroid.clone(), result))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KScore {
    pub k: usize,
    pub dtw_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KTuning {
    pub best_k: usize,
    pub scores: Vec<KScore>,
}

fn check_grid(grid: &[usize]) -> Result<()> {
    if grid.is_empty() {
        return Err(TtwError::InvalidConfig("K grid is empty".into()));
    }
    if grid.contains(&0) {
        return Err(TtwError::InvalidConfig("K grid contains 0".into()));
    }
    Ok(())
}

/// Scores each K by the DTW sum between the trained centroid and the
/// members of `data`; the lowest sum wins, ties going to the smaller K.
pub fn tune_k(data: &LabeledDataset, grid: &[usize], base: &TrainConfig) -> Result<KTuning> {
    check_grid(grid)?;
    let scores = grid
        .par_iter()
        .map(|&k| {
            let cfg = base.clone().with_k(k);
            let (centroid, _) = average_ttw(data, &cfg)?;
            Ok(KScore {
                k,
                dtw_sum: dtw_sum(centroid.values(), data)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best_k = pick_best(&scores);
    Ok(KTuning { best_k, scores })
}

fn pick_best(scores: &[KScore]) -> usize {
    let mut best = &scores[0];
    for s in &scores[1..] {
        if s.dtw_sum < best.dtw_sum || (s.dtw_sum == best.dtw_sum && s.k < best.k) {
            best = s;
        }
    }
    best.k
}

/// How the per-class K values were chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KSelection {
    /// Held-out classification accuracy, one coordinate pass over classes.
    ValidationAccuracy,
    /// No validation data: per-class DTW-sum tuning on the training members.
    DtwSumFallback,
}

/// Learned centroids, one per class in ascending label order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearestCentroidModel {
    pub classes: Vec<i64>,
    pub centroids: Vec<TimeSeries>,
    pub per_class_k: Vec<usize>,
    pub k_selection: KSelection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub classes: Vec<i64>,
    pub centroids: Vec<TimeSeries>,
    pub per_class_k: Vec<usize>,
    pub predictions: Vec<i64>,
    pub accuracy: f64,
    /// `confusion[true][predicted]`, both indexed by class position.
    pub confusion: Vec<Vec<usize>>,
}

fn class_dataset(data: &LabeledDataset, label: i64) -> Result<LabeledDataset> {
    let members: Vec<Vec<f64>> = data
        .members_of(label)
        .into_iter()
        .map(|s| s.values().to_vec())
        .collect();
    if members.is_empty() {
        return Err(TtwError::EmptyClass { label });
    }
    let n = members.len();
    LabeledDataset::new(members, Some(vec![label; n]))
}

/// Index of the nearest centroid; ties go to the lowest index.
fn nearest(series: &[f64], centroids: &[TimeSeries]) -> Result<usize> {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = dtw_cost(series, c.values())?;
        if d < best.1 {
            best = (i, d);
        }
    }
    Ok(best.0)
}

fn accuracy_of(centroids: &[TimeSeries], classes: &[i64], data: &LabeledDataset) -> Result<f64> {
    let labels = data.labels().ok_or(TtwError::MissingLabels)?;
    let mut hits = 0usize;
    for (s, l) in data.series().iter().zip(labels) {
        if classes[nearest(s.values(), centroids)?] == *l {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len() as f64)
}

/// Fits one centroid per class of `train`.
///
/// With a non-empty `val`, each class's K is picked from `grid` by held-out
/// accuracy: classes start at their DTW-sum-tuned K, then in label order each
/// class tries every K while the others stay fixed. Accuracy ties keep the
/// current choice. With an empty `val` the DTW-sum choice is final.
pub fn fit_nearest_centroid(
    train_set: &LabeledDataset,
    val: Option<&LabeledDataset>,
    grid: &[usize],
    base: &TrainConfig,
) -> Result<NearestCentroidModel> {
    check_grid(grid)?;
    if train_set.labels().is_none() {
        return Err(TtwError::MissingLabels);
    }
    let classes = train_set.classes();

    // candidates[c][g]: centroid of class c trained with grid[g]
    let per_class: Vec<(Vec<TimeSeries>, usize)> = classes
        .par_iter()
        .map(|&label| {
            let members = class_dataset(train_set, label)?;
            let mut centroids = Vec::with_capacity(grid.len());
            let mut scores = Vec::with_capacity(grid.len());
            for &k in grid {
                let (c, _) = average_ttw(&members, &base.clone().with_k(k))?;
                scores.push(KScore {
                    k,
                    dtw_sum: dtw_sum(c.values(), &members)?,
                });
                centroids.push(c);
            }
            let best = pick_best(&scores);
            let idx = grid.iter().position(|&k| k == best).unwrap_or(0);
            Ok((centroids, idx))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut choice: Vec<usize> = per_class.iter().map(|(_, i)| *i).collect();
    let current = |choice: &[usize]| -> Vec<TimeSeries> {
        per_class
            .iter()
            .zip(choice)
            .map(|((cands, _), &i)| cands[i].clone())
            .collect()
    };

    let val = val.filter(|v| !v.is_empty());
    let k_selection = match val {
        Some(val) => {
            let mut best_acc = accuracy_of(&current(&choice), &classes, val)?;
            for c in 0..classes.len() {
                for g in 0..grid.len() {
                    if g == choice[c] {
                        continue;
                    }
                    let mut trial = choice.clone();
                    trial[c] = g;
                    let acc = accuracy_of(&current(&trial), &classes, val)?;
                    if acc > best_acc {
                        best_acc = acc;
                        choice = trial;
                    }
                }
            }
            KSelection::ValidationAccuracy
        }
        None => KSelection::DtwSumFallback,
    };

    Ok(NearestCentroidModel {
        centroids: current(&choice),
        per_class_k: choice.iter().map(|&i| grid[i]).collect(),
        classes,
        k_selection,
    })
}

/// Assigns every test series to its DTW-nearest centroid and scores the
/// assignment against the true labels.
pub fn classify(
    model: &NearestCentroidModel,
    test: &LabeledDataset,
) -> Result<ClassificationReport> {
    if model.centroids.is_empty() {
        return Err(TtwError::InvalidConfig(
            "no centroids to classify against".into(),
        ));
    }
    let labels = test.labels().ok_or(TtwError::MissingLabels)?;
    let c = model.classes.len();
    let mut confusion = vec![vec![0usize; c]; c];
    let predicted: Vec<usize> = test
        .series()
        .par_iter()
        .map(|s| nearest(s.values(), &model.centroids))
        .collect::<Result<_>>()?;
    let mut hits = 0usize;
    let mut predictions = Vec::with_capacity(test.len());
    for (p, truth) in predicted.into_iter().zip(labels) {
        predictions.push(model.classes[p]);
        if model.classes[p] == *truth {
            hits += 1;
        }
        // true labels missing from the model have no confusion row
        if let Some(t) = model.classes.iter().position(|l| l == truth) {
            confusion[t][p] += 1;
        }
    }
    Ok(ClassificationReport {
        classes: model.classes.clone(),
        centroids: model.centroids.clone(),
        per_class_k: model.per_class_k.clone(),
        predictions,
        accuracy: hits as f64 / test.len() as f64,
        confusion,
    })
}

/// Seeded split into two halves, stratified by class. Odd class sizes put the
/// extra member in the first half; the second half is `None` when every class
/// has a single member.
pub fn stratified_halves(
    data: &LabeledDataset,
    seed: u64,
) -> Result<(LabeledDataset, Option<LabeledDataset>)> {
    let labels = data.labels().ok_or(TtwError::MissingLabels)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut first = Vec::new();
    let mut second = Vec::new();
    for class in data.classes() {
        let mut idx: Vec<usize> = (0..data.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let cut = idx.len().div_ceil(2);
        first.extend_from_slice(&idx[..cut]);
        second.extend_from_slice(&idx[cut..]);
    }
    first.sort_unstable();
    second.sort_unstable();
    let held_out = if second.is_empty() {
        None
    } else {
        Some(data.select(&second)?)
    };
    Ok((data.select(&first)?, held_out))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragingReport {
    pub class: i64,
    pub method: Method,
    pub per_set_dtw_sum: Vec<f64>,
    pub mean_dtw_sum: f64,
    /// K used for each set (TTW only; empty for AVG).
    #[serde(default)]
    pub per_set_k: Vec<usize>,
    pub config_used: TrainConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub sets_per_class: usize,
    pub set_size: usize,
    pub methods: Vec<Method>,
    /// Sample with replacement when a class is smaller than `set_size`.
    pub with_replacement: bool,
    /// When set, TTW tunes K per set over this grid instead of using `cfg.k`.
    pub k_grid: Option<Vec<usize>>,
    pub seed: u64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            sets_per_class: 10,
            set_size: 10,
            methods: vec![Method::Ttw, Method::Avg],
            with_replacement: false,
            k_grid: None,
            seed: 0,
        }
    }
}

/// Draws random sets per class, averages each with every method, and records
/// the DTW sum of each centroid against its set. One report per
/// (class, method), classes ascending, methods in the given order.
pub fn averaging_experiment(
    data: &LabeledDataset,
    spec: &ExperimentSpec,
    cfg: &TrainConfig,
) -> Result<Vec<AveragingReport>> {
    if spec.sets_per_class == 0 || spec.set_size == 0 {
        return Err(TtwError::InvalidConfig(
            "sets per class and set size must be positive".into(),
        ));
    }
    if let Some(grid) = &spec.k_grid {
        check_grid(grid)?;
    }
    cfg.validate()?;
    let labels: Vec<i64> = match data.labels() {
        Some(l) => l.to_vec(),
        None => vec![0; data.len()],
    };
    let mut classes = labels.clone();
    classes.sort_unstable();
    classes.dedup();

    // Draw every set up front so the sampling order does not depend on
    // scheduling.
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut jobs = Vec::new();
    for &class in &classes {
        let pool: Vec<usize> = (0..data.len()).filter(|&i| labels[i] == class).collect();
        if pool.len() < spec.set_size && !spec.with_replacement {
            return Err(TtwError::ClassTooSmall {
                label: class,
                size: pool.len(),
                needed: spec.set_size,
            });
        }
        for _ in 0..spec.sets_per_class {
            let set: Vec<usize> = if spec.with_replacement {
                (0..spec.set_size)
                    .map(|_| pool[rng.random_range(0..pool.len())])
                    .collect()
            } else {
                pool.choose_multiple(&mut rng, spec.set_size)
                    .copied()
                    .collect()
            };
            jobs.push((class, set));
        }
    }

    let outcomes: Vec<Vec<(f64, Option<usize>)>> = jobs
        .par_iter()
        .map(|(_, set)| {
            let subset = data.select(set)?;
            spec.methods
                .iter()
                .map(|method| match method {
                    Method::Avg => Ok((dtw_sum(average_avg(&subset).values(), &subset)?, None)),
                    Method::Ttw => {
                        let k = match &spec.k_grid {
                            Some(grid) => tune_k(&subset, grid, cfg)?.best_k,
                            None => cfg.k,
                        };
                        let (c, _) = average_ttw(&subset, &cfg.clone().with_k(k))?;
                        Ok((dtw_sum(c.values(), &subset)?, Some(k)))
                    }
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut reports = Vec::new();
    for &class in &classes {
        for (mi, &method) in spec.methods.iter().enumerate() {
            let rows: Vec<(f64, Option<usize>)> = jobs
                .iter()
                .zip(&outcomes)
                .filter(|((c, _), _)| *c == class)
                .map(|(_, o)| o[mi])
                .collect();
            let per_set_dtw_sum: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let mean_dtw_sum = per_set_dtw_sum.iter().sum::<f64>() / per_set_dtw_sum.len() as f64;
            reports.push(AveragingReport {
                class,
                method,
                per_set_dtw_sum,
                mean_dtw_sum,
                per_set_k: rows.iter().filter_map(|r| r.1).collect(),
                config_used: cfg.clone(),
            });
        }
    }
    Ok(reports)
}
