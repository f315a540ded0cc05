use super::{Pool, SelectionPlan, Strategy};
use crate::corpus::Corpus;
use crate::embedding::{validate_alignment, Embeddings};
use crate::kernel::{self, Packed, MR, NR};
use crate::rng::StageRng;
use crate::scalar::Scalar;
use crate::{Error, Result};

pub(crate) const STREAM: &str = "select/kmc";
const POINT_BLOCK: usize = 256;
/// Relative slack on Gram-trick distances before exact re-checking.
const GRAM_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansOptions {
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub tol: f64,
}

impl KMeansOptions {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeansOptions {
            k,
            seed,
            max_iters: 100,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    /// Row-major k×d.
    pub centroids: Vec<f64>,
    pub d: usize,
    pub assignment: Vec<usize>,
    /// Inertia of the initial assignment, then after every Lloyd iteration.
    pub inertia: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl KMeansFit {
    pub fn k(&self) -> usize {
        self.centroids.len() / self.d
    }

    pub fn centroid(&self, c: usize) -> &[f64] {
        &self.centroids[c * self.d..(c + 1) * self.d]
    }
}

#[inline]
fn exact_sq_dist<T: Scalar>(x: &[T], c: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&a, &b) in x.iter().zip(c) {
        let t = a.widen() - b;
        acc += t * t;
    }
    acc
}

fn norms(flat: &[f64], d: usize) -> Vec<f64> {
    flat.chunks_exact(d)
        .map(|c| c.iter().map(|v| v * v).sum())
        .collect()
}

/// Walks Gram-trick squared distances between point blocks and all
/// centroids, calling `visit(point, centroid, approx)`.
fn for_each_tile<T: Scalar>(
    points: &Embeddings<T>,
    centroids: &[f64],
    mut visit: impl FnMut(usize, usize, f64),
) {
    let d = points.d();
    let k = centroids.len() / d;
    let c_norms = norms(centroids, d);
    let mut pc = Packed::new(NR);
    pc.pack(centroids, d, 0..k);
    let mut pp = Packed::new(MR);
    let mut tile = Vec::new();
    let mut start = 0;
    while start < points.n() {
        let end = (start + POINT_BLOCK).min(points.n());
        pp.pack(points.data(), d, start..end);
        tile.resize((end - start) * k, 0.0);
        kernel::gram(&pp, &pc, &mut tile);
        kernel::gram_to_sq_dists(&mut tile, &points.sq_norms()[start..end], &c_norms);
        for (i, line) in tile.chunks_exact(k).enumerate() {
            for (c, &g) in line.iter().enumerate() {
                visit(start + i, c, g);
            }
        }
        start = end;
    }
}

fn slack<T: Scalar>(points: &Embeddings<T>, i: usize, centroid_norm_max: f64) -> f64 {
    GRAM_SLACK * (points.sq_norms()[i] + centroid_norm_max) + f64::MIN_POSITIVE
}

/// Nearest centroid of every point (ties to the smaller centroid index) and
/// the exact squared distance to it.
fn assign<T: Scalar>(points: &Embeddings<T>, centroids: &[f64]) -> (Vec<usize>, Vec<f64>) {
    let d = points.d();
    let n = points.n();
    let cmax = norms(centroids, d).into_iter().fold(0.0, f64::max);
    let mut approx_best = vec![f64::INFINITY; n];
    let mut best = vec![(f64::INFINITY, usize::MAX); n];
    // First pass finds the Gram-trick minimum; the second re-checks every
    // centroid within the rounding slack with exact distances.
    for_each_tile(points, centroids, |i, _, g| {
        approx_best[i] = approx_best[i].min(g);
    });
    for_each_tile(points, centroids, |i, c, g| {
        if g <= approx_best[i] + slack(points, i, cmax) {
            let e = exact_sq_dist(points.row(i), &centroids[c * d..(c + 1) * d]);
            if e < best[i].0 {
                best[i] = (e, c);
            }
        }
    });
    best.into_iter().map(|(e, c)| (c, e)).unzip()
}

fn kmeans_pp<T: Scalar>(points: &Embeddings<T>, k: usize, rng: &mut StageRng) -> Vec<f64> {
    let (n, d) = (points.n(), points.d());
    let mut chosen = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    let mut min_d2 = vec![f64::INFINITY; n];
    let mut centroids = Vec::with_capacity(k * d);
    let mut next = rng.index(n);
    loop {
        chosen.push(next);
        taken[next] = true;
        let c: Vec<f64> = points.row(next).iter().map(|v| v.widen()).collect();
        for (i, m) in min_d2.iter_mut().enumerate() {
            *m = m.min(exact_sq_dist(points.row(i), &c));
        }
        centroids.extend_from_slice(&c);
        if chosen.len() == k {
            break;
        }
        let total: f64 = min_d2.iter().sum();
        next = if total > 0.0 {
            let target = rng.unit_open() * total;
            let mut cum = 0.0;
            let mut pick = None;
            for (i, &w) in min_d2.iter().enumerate() {
                if w > 0.0 {
                    cum += w;
                    pick = Some(i);
                    if cum >= target {
                        break;
                    }
                }
            }
            pick.expect("positive total has a positive weight")
        } else {
            // All points coincide with chosen centres.
            let free: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
            free[rng.index(free.len())]
        };
    }
    centroids
}

/// Seeded k-means++ followed by Lloyd iterations until the largest centroid
/// shift falls below `tol` or `max_iters` is reached. An empty cluster keeps
/// its previous centroid.
pub fn kmeans<T: Scalar>(points: &Embeddings<T>, opts: KMeansOptions) -> Result<KMeansFit> {
    let (n, d) = (points.n(), points.d());
    if opts.k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    if opts.k > n {
        return Err(Error::TargetExceedsPool {
            requested: opts.k,
            available: n,
        });
    }
    let k = opts.k;
    let mut rng = StageRng::new(opts.seed, STREAM);
    let mut centroids = kmeans_pp(points, k, &mut rng);
    let (mut assignment, dists) = assign(points, &centroids);
    let mut inertia = vec![dists.iter().sum::<f64>()];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iters {
        let mut sums = vec![0.0f64; k * d];
        let mut counts = vec![0usize; k];
        for (i, &c) in assignment.iter().enumerate() {
            counts[c] += 1;
            for (s, v) in sums[c * d..(c + 1) * d].iter_mut().zip(points.row(i)) {
                *s += v.widen();
            }
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let inv = counts[c] as f64;
            let mut moved = 0.0;
            for (old, s) in centroids[c * d..(c + 1) * d]
                .iter_mut()
                .zip(&sums[c * d..(c + 1) * d])
            {
                let new = s / inv;
                moved += (new - *old) * (new - *old);
                *old = new;
            }
            shift = shift.max(moved.sqrt());
        }
        let (a, dists) = assign(points, &centroids);
        assignment = a;
        inertia.push(dists.iter().sum());
        iterations += 1;
        if shift < opts.tol {
            converged = true;
            break;
        }
    }

    Ok(KMeansFit {
        centroids,
        d,
        assignment,
        inertia,
        iterations,
        converged,
    })
}

/// Pool members ordered by exact distance to `centroid`, ties by index.
fn ranked_members<T: Scalar>(points: &Embeddings<T>, centroid: &[f64]) -> Vec<usize> {
    let mut order: Vec<(f64, usize)> = (0..points.n())
        .map(|i| (exact_sq_dist(points.row(i), centroid), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    order.into_iter().map(|(_, i)| i).collect()
}

/// Clusters the pool and keeps the member nearest each centroid.
///
/// Centroids that share a nearest member collapse to one pick; the plan is
/// then padded round-robin, in centroid order, with each centroid's next
/// nearest unselected member until it holds `k` ids.
pub fn select_kmeans_centroid<T: Scalar>(
    matrix: &Embeddings<T>,
    pool: &Pool,
    corpus: &Corpus,
    opts: KMeansOptions,
) -> Result<SelectionPlan> {
    validate_alignment(corpus, matrix)?;
    if opts.k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    super::check_target(opts.k, pool.len())?;
    let rows = pool.canonical_rows();
    let points = matrix.permute_rows(&rows, 0)?;
    let fit = kmeans(&points, opts)?;
    let (k, d) = (opts.k, points.d());

    // Nearest member per centroid, exact, ties to the smaller row.
    let cmax = norms(&fit.centroids, d).into_iter().fold(0.0, f64::max);
    let mut approx_best = vec![f64::INFINITY; k];
    for_each_tile(&points, &fit.centroids, |_, c, g| {
        approx_best[c] = approx_best[c].min(g);
    });
    let mut nearest = vec![(f64::INFINITY, usize::MAX); k];
    for_each_tile(&points, &fit.centroids, |i, c, g| {
        if g <= approx_best[c] + slack(&points, i, cmax) {
            let e = exact_sq_dist(points.row(i), fit.centroid(c));
            if e < nearest[c].0 {
                nearest[c] = (e, i);
            }
        }
    });

    let mut taken = vec![false; points.n()];
    let mut picked = Vec::with_capacity(k);
    for &(_, i) in &nearest {
        if !taken[i] {
            taken[i] = true;
            picked.push(i);
        }
    }
    let collapsed = k - picked.len();
    let mut ranked: Vec<Option<(Vec<usize>, usize)>> = vec![None; k];
    'pad: while picked.len() < k {
        for (c, slot) in ranked.iter_mut().enumerate() {
            if picked.len() == k {
                break 'pad;
            }
            let (list, cursor) =
                slot.get_or_insert_with(|| (ranked_members(&points, fit.centroid(c)), 0));
            while *cursor < list.len() && taken[list[*cursor]] {
                *cursor += 1;
            }
            if let Some(&i) = list.get(*cursor) {
                taken[i] = true;
                picked.push(i);
            }
        }
    }

    let picked_rows: Vec<usize> = picked.iter().map(|&i| rows[i]).collect();
    let mut plan = SelectionPlan::new(Strategy::Kmc, pool, corpus, &picked_rows);
    plan.seed = Some(opts.seed);
    plan.params.insert("k".into(), k.into());
    plan.params.insert("init".into(), "kmeans++".into());
    plan.params.insert("max_iters".into(), opts.max_iters.into());
    plan.params.insert("tol".into(), opts.tol.into());
    plan.params.insert("iterations".into(), fit.iterations.into());
    plan.params.insert("converged".into(), fit.converged.into());
    plan.params
        .insert("inertia".into(), (*fit.inertia.last().unwrap()).into());
    plan.params.insert("collapsed".into(), collapsed.into());
    Ok(plan)
}
