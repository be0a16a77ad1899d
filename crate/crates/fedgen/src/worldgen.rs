//! Synthetic ground truth.
//!
//! A `WorldSpec` fixes one Gaussian feature distribution per (class, domain)
//! pair — class means drawn uniformly on a sphere, isotropic within-class
//! noise — and `sample_dataset` draws labeled datasets from it. Worlds with
//! too little class separation are redrawn so downstream accuracy trends are
//! not dominated by unlearnable instances.

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_for};
use rand::Rng;
use rand_distr::StandardNormal;
use std::io::{BufRead, Write};
use std::path::Path;

mod stream {
    pub const MEANS: u64 = 0x5701;
    pub const SAMPLES: u64 = 0x5702;
}

/// Minimum pairwise class-mean distance within a domain, in units of
/// `within_std`. Worlds below the floor are redrawn with the seed offset +1.
const SEPARATION_FLOOR: f64 = 1.5;
const MAX_WORLD_ATTEMPTS: u64 = 64;

/// Ground-truth class x domain generative distributions.
#[derive(Debug, Clone)]
pub struct WorldSpec {
    pub num_classes: usize,
    pub num_domains: usize,
    pub feature_dim: usize,
    pub within_std: f64,
    pub mean_radius: f64,
    pub seed: u64,
    /// One mean per (class, domain), class-major.
    class_domain_means: Vec<Vec<f64>>,
}

/// One labeled feature vector, tagged with the (class, domain) that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: Vec<f32>,
    pub label: usize,
    pub domain: usize,
}

/// An ordered collection of samples plus the metadata needed downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<LabeledSample>,
    pub world_id: u64,
    pub num_classes: usize,
    pub num_domains: usize,
    pub feature_dim: usize,
}

impl WorldSpec {
    /// Mean of the (class, domain) distribution.
    pub fn mean(&self, class: usize, domain: usize) -> &[f64] {
        &self.class_domain_means[class * self.num_domains + domain]
    }

    /// Feature range covering essentially all sampled coordinates
    /// (mean radius plus four within-class standard deviations).
    pub fn feature_bounds(&self) -> (f64, f64) {
        let r = self.mean_radius + 4.0 * self.within_std;
        (-r, r)
    }
}

/// Draw a world: one mean per (class, domain), uniform on the sphere of
/// radius `mean_radius`, redrawing (seed offset +1) until every domain's
/// class means are at least `1.5 * within_std` apart.
pub fn make_world(
    num_classes: usize,
    num_domains: usize,
    feature_dim: usize,
    mean_radius: f64,
    within_std: f64,
    seed: u64,
) -> Result<WorldSpec> {
    if num_classes < 1 || num_domains < 1 {
        return Err(Error::Config(format!(
            "world needs at least one class and one domain, got {num_classes} x {num_domains}"
        )));
    }
    if feature_dim < 2 {
        return Err(Error::Config(format!(
            "feature_dim must be >= 2, got {feature_dim}"
        )));
    }
    if !(mean_radius > 0.0 && mean_radius.is_finite()) {
        return Err(Error::Config(format!(
            "mean_radius must be positive, got {mean_radius}"
        )));
    }
    if !(within_std > 0.0 && within_std.is_finite()) {
        return Err(Error::Config(format!(
            "within_std must be positive, got {within_std}"
        )));
    }

    for attempt in 0..MAX_WORLD_ATTEMPTS {
        let mut rng = rng_for(seed.wrapping_add(attempt), stream::MEANS);
        let means: Vec<Vec<f64>> = (0..num_classes * num_domains)
            .map(|_| sphere_point(&mut rng, feature_dim, mean_radius))
            .collect();

        let world = WorldSpec {
            num_classes,
            num_domains,
            feature_dim,
            within_std,
            mean_radius,
            seed,
            class_domain_means: means,
        };
        if min_class_separation(&world) >= SEPARATION_FLOOR * within_std {
            return Ok(world);
        }
    }
    Err(Error::Config(format!(
        "no world with class separation >= {SEPARATION_FLOOR} * within_std found \
         in {MAX_WORLD_ATTEMPTS} attempts (radius {mean_radius}, std {within_std})"
    )))
}

/// Smallest pairwise distance between class means within any single domain.
/// Infinite for single-class worlds.
pub fn min_class_separation(world: &WorldSpec) -> f64 {
    let mut min = f64::INFINITY;
    for d in 0..world.num_domains {
        for c1 in 0..world.num_classes {
            for c2 in (c1 + 1)..world.num_classes {
                let a = world.mean(c1, d);
                let b = world.mean(c2, d);
                let dist = a
                    .iter()
                    .zip(b)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                min = min.min(dist);
            }
        }
    }
    min
}

fn sphere_point(rng: &mut impl Rng, dim: usize, radius: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.into_iter().map(|x| x * radius / norm).collect();
        }
    }
}

/// Draw `n_per_class_per_domain` samples from every (class, domain)
/// distribution, in (class, domain) block order. Deterministic per
/// (world seed, sample seed).
pub fn sample_dataset(world: &WorldSpec, n_per_class_per_domain: usize, seed: u64) -> Result<Dataset> {
    if n_per_class_per_domain < 1 {
        return Err(Error::Contract(
            "sample_dataset requires n_per_class_per_domain >= 1".into(),
        ));
    }
    let mut rng = rng_for(derive_seed(world.seed, seed), stream::SAMPLES);
    let mut samples =
        Vec::with_capacity(n_per_class_per_domain * world.num_classes * world.num_domains);
    for class in 0..world.num_classes {
        for domain in 0..world.num_domains {
            let mean = world.mean(class, domain);
            for _ in 0..n_per_class_per_domain {
                let features: Vec<f32> = mean
                    .iter()
                    .map(|m| {
                        let z: f64 = rng.sample(StandardNormal);
                        (m + world.within_std * z) as f32
                    })
                    .collect();
                samples.push(LabeledSample {
                    features,
                    label: class,
                    domain,
                });
            }
        }
    }
    Ok(Dataset {
        samples,
        world_id: world.seed,
        num_classes: world.num_classes,
        num_domains: world.num_domains,
        feature_dim: world.feature_dim,
    })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// New dataset holding the given samples (by index), in order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let mut samples = Vec::with_capacity(indices.len());
        for &i in indices {
            let s = self.samples.get(i).ok_or_else(|| {
                Error::Contract(format!("sample index {i} out of range ({} samples)", self.len()))
            })?;
            samples.push(s.clone());
        }
        Ok(Dataset {
            samples,
            world_id: self.world_id,
            num_classes: self.num_classes,
            num_domains: self.num_domains,
            feature_dim: self.feature_dim,
        })
    }

    /// Debug export: one row per sample, `domain,label,f0,...`.
    pub fn export_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        write!(out, "domain,label")?;
        for j in 0..self.feature_dim {
            write!(out, ",f{j}")?;
        }
        writeln!(out)?;
        for s in &self.samples {
            write!(out, "{},{}", s.domain, s.label)?;
            for v in &s.features {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Debug import of `export_csv` output. Class/domain counts are inferred
    /// from the data; `world_id` is not recoverable and is set to 0.
    pub fn import_csv(path: &Path) -> Result<Dataset> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut lines = file.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Contract("empty dataset CSV".into()))??;
        let feature_dim = header.split(',').count().saturating_sub(2);
        if feature_dim == 0 {
            return Err(Error::Contract("dataset CSV header has no feature columns".into()));
        }
        let mut samples = Vec::new();
        let (mut max_label, mut max_domain) = (0usize, 0usize);
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != feature_dim + 2 {
                return Err(Error::Contract(format!(
                    "dataset CSV row {} has {} fields, expected {}",
                    lineno + 2,
                    fields.len(),
                    feature_dim + 2
                )));
            }
            let parse = |s: &str, what: &str| -> Result<usize> {
                s.parse().map_err(|_| {
                    Error::Contract(format!("bad {what} {s:?} on dataset CSV row {}", lineno + 2))
                })
            };
            let domain = parse(fields[0], "domain")?;
            let label = parse(fields[1], "label")?;
            let mut features = Vec::with_capacity(feature_dim);
            for f in &fields[2..] {
                features.push(f.parse::<f32>().map_err(|_| {
                    Error::Contract(format!("bad feature {f:?} on dataset CSV row {}", lineno + 2))
                })?);
            }
            max_label = max_label.max(label);
            max_domain = max_domain.max(domain);
            samples.push(LabeledSample { features, label, domain });
        }
        Ok(Dataset {
            samples,
            world_id: 0,
            num_classes: max_label + 1,
            num_domains: max_domain + 1,
            feature_dim,
        })
    }
}
