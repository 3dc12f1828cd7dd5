//! Oracles shared by the integration tests. Everything here is written
//! directly from the definitions, without going through the crate's own
//! numerics.
#![allow(dead_code)]

use std::collections::BTreeSet;

use gpcov::gp::{Hyperparams, Sample};
use gpcov::{Domain, Point};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_points(rng: &mut impl Rng, n: usize, domain: &Domain) -> Vec<Point> {
    (0..n)
        .map(|_| Point::new(rng.random_range(0.0..domain.world_width()), rng.random_range(0.0..domain.world_height())))
        .collect()
}

pub fn random_samples(rng: &mut impl Rng, n: usize, domain: &Domain) -> Vec<Sample> {
    random_points(rng, n, domain).into_iter().map(|p| Sample { point: p, value: rng.random_range(-1.0..3.0) }).collect()
}

pub fn random_hyper(rng: &mut impl Rng) -> Hyperparams {
    Hyperparams {
        lengthscale: rng.random_range(5.0..20.0),
        signal_variance: rng.random_range(0.5..2.0),
        noise_variance: rng.random_range(0.01..0.2),
        prior_mean: rng.random_range(-0.5..0.5),
    }
}

fn se(a: &Point, b: &Point, h: &Hyperparams) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    h.signal_variance * (-(dx * dx + dy * dy) / (2.0 * h.lengthscale * h.lengthscale)).exp()
}

/// Exact GP posterior via LU solves against `K + σ²I`.
pub fn dense_posterior(data: &[Sample], h: &Hyperparams, queries: &[Point]) -> (DVector<f64>, DMatrix<f64>) {
    let n = data.len();
    let k = DMatrix::from_fn(n, n, |i, j| {
        se(&data[i].point, &data[j].point, h) + if i == j { h.noise_variance } else { 0.0 }
    });
    let lu = k.lu();
    let y = DVector::from_fn(n, |i, _| data[i].value - h.prior_mean);
    let alpha = lu.solve(&y).expect("regularized gram is invertible");
    let kq = DMatrix::from_fn(queries.len(), n, |i, j| se(&queries[i], &data[j].point, h));
    let mean = DVector::from_fn(queries.len(), |i, _| h.prior_mean + kq.row(i).transpose().dot(&alpha));
    let solved = lu.solve(&kq.transpose()).expect("regularized gram is invertible");
    let prior = DMatrix::from_fn(queries.len(), queries.len(), |i, j| se(&queries[i], &queries[j], h));
    (mean, prior - &kq * solved)
}

/// Greedy max-variance selection, re-solving the gram of the chosen set at
/// every evaluation. Ties go to the lowest index.
pub fn greedy_oracle(candidates: &[Point], m: usize, h: &Hyperparams) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::new();
    while chosen.len() < m.min(candidates.len()) {
        let data: Vec<Sample> = chosen.iter().map(|&i| Sample { point: candidates[i], value: 0.0 }).collect();
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in candidates.iter().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            let var = if data.is_empty() { h.signal_variance } else { dense_posterior(&data, h, &[*c]).1[(0, 0)] };
            if best.is_none_or(|(_, v)| var > v) {
                best = Some((i, var));
            }
        }
        chosen.push(best.unwrap().0);
    }
    chosen
}

/// Smallest gap between the best and runner-up variance over greedy steps
/// after the first (whose scores are all the prior variance).
pub fn greedy_margin(candidates: &[Point], m: usize, h: &Hyperparams) -> f64 {
    let order = greedy_oracle(candidates, m, h);
    let mut margin = f64::INFINITY;
    for k in 1..order.len() {
        let data: Vec<Sample> = order[..k].iter().map(|&i| Sample { point: candidates[i], value: 0.0 }).collect();
        let rest: Vec<Point> =
            (0..candidates.len()).filter(|i| !order[..k].contains(i)).map(|i| candidates[i]).collect();
        let cov = dense_posterior(&data, h, &rest).1;
        let mut v: Vec<f64> = cov.diagonal().iter().copied().collect();
        v.sort_by(|a, b| b.partial_cmp(a).unwrap());
        if v.len() > 1 {
            margin = margin.min(v[0] - v[1]);
        }
    }
    margin
}

/// Owner of every pixel by exhaustive comparison, lowest index on ties.
pub fn brute_owner(positions: &[Point], domain: &Domain) -> Vec<usize> {
    let mut owner = Vec::with_capacity(domain.num_pixels());
    for row in 0..domain.height {
        for col in 0..domain.width {
            let q = Point::new((col as f64 + 0.5) * domain.cell_size, (row as f64 + 0.5) * domain.cell_size);
            let d: Vec<f64> = positions.iter().map(|p| (q.x - p.x).powi(2) + (q.y - p.y).powi(2)).collect();
            let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
            owner.push(d.iter().position(|&v| v == min).unwrap());
        }
    }
    owner
}

/// Agents `i < j` whose cells share a pixel edge, by scanning every pair.
pub fn brute_edges(owner: &[usize], domain: &Domain, n: usize) -> BTreeSet<(usize, usize)> {
    let mut edges = BTreeSet::new();
    for i in 0..n {
        for j in (i + 1)..n {
            'scan: for row in 0..domain.height {
                for col in 0..domain.width {
                    let a = owner[row * domain.width + col];
                    let mut adj = Vec::new();
                    if col + 1 < domain.width {
                        adj.push(owner[row * domain.width + col + 1]);
                    }
                    if row + 1 < domain.height {
                        adj.push(owner[(row + 1) * domain.width + col]);
                    }
                    if adj.iter().any(|&b| (a, b) == (i, j) || (a, b) == (j, i)) {
                        edges.insert((i, j));
                        break 'scan;
                    }
                }
            }
        }
    }
    edges
}

/// A seeded (GP, cell, position) configuration on a 96×54 grid: a handful
/// of agents, one chosen cell, a GP conditioned on noisy samples of a bump
/// field, and an evaluation point near the cell's agent.
pub struct Triple {
    pub partition: gpcov::VoronoiPartition,
    pub agent: usize,
    pub gp: gpcov::SparseGP,
    pub pos: Point,
}

pub fn gradient_triple(seed: u64) -> Triple {
    let domain = Domain::new(96, 54).unwrap();
    let mut r = rng(seed);
    let n = r.random_range(2..6);
    let positions = random_points(&mut r, n, &domain);
    let partition = gpcov::geometry::compute_partition(&positions, &domain).unwrap();
    let agent = (0..n).max_by_key(|&i| partition.cells[i].len()).unwrap();
    let hyper = Hyperparams {
        lengthscale: r.random_range(6.0..25.0),
        signal_variance: r.random_range(0.2..2.0),
        noise_variance: r.random_range(0.01..0.1),
        prior_mean: r.random_range(0.0..0.5),
    };
    let bump = random_points(&mut r, 1, &domain)[0];
    let count = r.random_range(5..30);
    let points = random_points(&mut r, count, &domain);
    let samples: Vec<Sample> = points
        .into_iter()
        .map(|p| Sample {
            point: p,
            value: 2.0 * (-(p - bump).norm_squared() / 400.0).exp() + r.random_range(-0.1..0.1),
        })
        .collect();
    let gp = gpcov::SparseGP::new(hyper, samples).unwrap();
    let pos = positions[agent] + Point::new(r.random_range(-3.0..3.0), r.random_range(-3.0..3.0));
    Triple { partition, agent, gp, pos }
}

/// Relative error `‖a − b‖ / ‖b‖`, absolute when `b` vanishes.
pub fn rel_err(a: &Point, b: &Point) -> f64 {
    let scale = b.norm();
    if scale < 1e-12 {
        (a - b).norm()
    } else {
        (a - b).norm() / scale
    }
}

pub fn central_diff(f: impl Fn(&Point) -> f64, p: &Point, h: f64) -> Point {
    let dx = Point::new(h, 0.0);
    let dy = Point::new(0.0, h);
    Point::new((f(&(p + dx)) - f(&(p - dx))) / (2.0 * h), (f(&(p + dy)) - f(&(p - dy))) / (2.0 * h))
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
