//! Client data partitioning.
//!
//! Three strategies: Dirichlet label skew (per class, proportions over
//! clients), IID round-robin, and one-domain-per-client feature skew. Every
//! plan is a disjoint, exhaustive split of the source dataset's indices.

use crate::error::{Error, Result};
use crate::rng::rng_for;
use crate::worldgen::Dataset;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Gamma};
use std::io::Write;
use std::path::Path;

mod stream {
    pub const DIRICHLET: u64 = 0x7001;
    pub const IID: u64 = 0x7002;
}

const MAX_REDRAW_ATTEMPTS: u64 = 10_000;

/// Which strategy produced a plan (and its skew knob, when Dirichlet).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PartitionKind {
    Iid,
    Dirichlet { beta: f64 },
    ByDomain,
}

/// Per-client ordered sample indices into the source dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionPlan {
    pub client_indices: Vec<Vec<usize>>,
    pub kind: PartitionKind,
    pub seed: u64,
}

impl PartitionPlan {
    pub fn num_clients(&self) -> usize {
        self.client_indices.len()
    }

    /// Audit export: one `client_id,sample_index` row per assignment.
    pub fn export_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "client_id,sample_index")?;
        for (k, indices) in self.client_indices.iter().enumerate() {
            for &i in indices {
                writeln!(out, "{k},{i}")?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

fn check_common(dataset: &Dataset, num_clients: usize) -> Result<()> {
    if num_clients < 2 {
        return Err(Error::Config(format!(
            "partitioning needs at least 2 clients, got {num_clients}"
        )));
    }
    if num_clients > dataset.len() {
        return Err(Error::Config(format!(
            "more clients ({num_clients}) than samples ({})",
            dataset.len()
        )));
    }
    Ok(())
}

/// Dirichlet proportions over clients via normalized Gamma(beta, 1) draws.
/// `None` when the draw degenerates (all-zero underflow).
fn dirichlet_draw(rng: &mut impl rand::Rng, beta: f64, k: usize) -> Option<Vec<f64>> {
    let gamma = Gamma::new(beta, 1.0).ok()?;
    let draws: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
    let sum: f64 = draws.iter().sum();
    if !(sum > 0.0 && sum.is_finite()) {
        return None;
    }
    Some(draws.into_iter().map(|d| d / sum).collect())
}

/// Integer counts from proportions by largest-remainder rounding; ties go to
/// the lower client index. Conserves `n` exactly.
fn largest_remainder(p: &[f64], n: usize) -> Vec<usize> {
    let mut counts: Vec<usize> = Vec::with_capacity(p.len());
    let mut fracs: Vec<(usize, f64)> = Vec::with_capacity(p.len());
    let mut assigned = 0usize;
    for (k, &pk) in p.iter().enumerate() {
        let target = pk * n as f64;
        let base = target.floor().max(0.0) as usize;
        let base = base.min(n);
        counts.push(base);
        assigned += base;
        fracs.push((k, target - base as f64));
    }
    // Floating error can only leave a shortfall; distribute by remainder.
    fracs.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
    let mut leftover = n.saturating_sub(assigned);
    let mut it = fracs.iter().cycle();
    while leftover > 0 {
        let &(k, _) = it.next().unwrap();
        counts[k] += 1;
        leftover -= 1;
    }
    debug_assert_eq!(counts.iter().sum::<usize>(), n);
    counts
}

/// Label-skew split: for each class, proportions over clients drawn from
/// Dir(beta * 1_K) and rounded by largest remainder. Redraws with a seed
/// offset until every client holds at least one sample.
pub fn dirichlet_partition(
    dataset: &Dataset,
    num_clients: usize,
    beta: f64,
    seed: u64,
) -> Result<PartitionPlan> {
    check_common(dataset, num_clients)?;
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Config(format!("beta must be positive, got {beta}")));
    }

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.num_classes];
    for (i, s) in dataset.samples.iter().enumerate() {
        by_class[s.label].push(i);
    }

    for attempt in 0..MAX_REDRAW_ATTEMPTS {
        let mut rng = rng_for(seed.wrapping_add(attempt), stream::DIRICHLET);
        let mut clients: Vec<Vec<usize>> = vec![Vec::new(); num_clients];
        let mut degenerate = false;
        for class_indices in &by_class {
            if class_indices.is_empty() {
                continue;
            }
            let Some(p) = dirichlet_draw(&mut rng, beta, num_clients) else {
                degenerate = true;
                break;
            };
            let counts = largest_remainder(&p, class_indices.len());
            let mut cursor = 0usize;
            for (k, &c) in counts.iter().enumerate() {
                clients[k].extend_from_slice(&class_indices[cursor..cursor + c]);
                cursor += c;
            }
        }
        if !degenerate && clients.iter().all(|c| !c.is_empty()) {
            return Ok(PartitionPlan {
                client_indices: clients,
                kind: PartitionKind::Dirichlet { beta },
                seed,
            });
        }
    }
    Err(Error::Config(format!(
        "dirichlet partition (beta {beta}, {num_clients} clients) left a client empty \
         in {MAX_REDRAW_ATTEMPTS} redraws"
    )))
}

/// Global shuffle followed by a round-robin split; client sizes differ by at most 1.
pub fn iid_partition(dataset: &Dataset, num_clients: usize, seed: u64) -> Result<PartitionPlan> {
    check_common(dataset, num_clients)?;
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut rng = rng_for(seed, stream::IID);
    order.shuffle(&mut rng);
    let mut clients: Vec<Vec<usize>> = vec![Vec::new(); num_clients];
    for (pos, idx) in order.into_iter().enumerate() {
        clients[pos % num_clients].push(idx);
    }
    Ok(PartitionPlan { client_indices: clients, kind: PartitionKind::Iid, seed })
}

/// Feature-skew split: client k receives exactly the samples of domain k.
pub fn domain_partition(dataset: &Dataset, num_clients: usize) -> Result<PartitionPlan> {
    if num_clients != dataset.num_domains {
        return Err(Error::Config(format!(
            "domain partition needs one client per domain: {num_clients} clients vs {} domains",
            dataset.num_domains
        )));
    }
    let mut clients: Vec<Vec<usize>> = vec![Vec::new(); num_clients];
    for (i, s) in dataset.samples.iter().enumerate() {
        clients[s.domain].push(i);
    }
    if let Some(empty) = clients.iter().position(|c| c.is_empty()) {
        return Err(Error::Config(format!(
            "domain {empty} has no samples; every client must receive at least one"
        )));
    }
    Ok(PartitionPlan { client_indices: clients, kind: PartitionKind::ByDomain, seed: 0 })
}

/// Per-client class-count table (rows: clients, columns: classes).
pub fn label_histogram(plan: &PartitionPlan, dataset: &Dataset) -> Result<Vec<Vec<usize>>> {
    let mut table = vec![vec![0usize; dataset.num_classes]; plan.num_clients()];
    for (k, indices) in plan.client_indices.iter().enumerate() {
        for &i in indices {
            let s = dataset.samples.get(i).ok_or_else(|| {
                Error::Contract(format!(
                    "plan references sample {i}, dataset has {}",
                    dataset.len()
                ))
            })?;
            table[k][s.label] += 1;
        }
    }
    Ok(table)
}

/// Mean over clients of (mass of the client's largest class). 1.0 means every
/// client is single-class; 1/C is the balanced floor.
pub fn mean_max_class_mass(plan: &PartitionPlan, dataset: &Dataset) -> Result<f64> {
    let hist = label_histogram(plan, dataset)?;
    let mut total = 0.0;
    for row in &hist {
        let size: usize = row.iter().sum();
        let max = row.iter().max().copied().unwrap_or(0);
        if size > 0 {
            total += max as f64 / size as f64;
        }
    }
    Ok(total / plan.num_clients() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worldgen::{make_world, sample_dataset};

    fn balanced_dataset(classes: usize, per_class: usize, seed: u64) -> Dataset {
        let w = make_world(classes, 1, 4, 5.0, 1.0, seed).unwrap();
        sample_dataset(&w, per_class, seed + 100).unwrap()
    }

    fn assert_disjoint_exhaustive(plan: &PartitionPlan, n: usize) {
        let mut seen = vec![false; n];
        for indices in &plan.client_indices {
            for &i in indices {
                assert!(i < n, "index {i} out of range");
                assert!(!seen[i], "index {i} assigned twice");
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s), "some index never assigned");
    }

    fn total_variation(row: &[usize], global: &[f64]) -> f64 {
        let size: usize = row.iter().sum();
        row.iter()
            .zip(global)
            .map(|(&c, &g)| (c as f64 / size as f64 - g).abs())
            .sum::<f64>()
            / 2.0
    }

    #[test]
    fn near_iid_beta_matches_global_histogram() {
        let data = balanced_dataset(10, 100, 1);
        let plan = dirichlet_partition(&data, 5, 1e6, 7).unwrap();
        let hist = label_histogram(&plan, &data).unwrap();
        let global = vec![0.1f64; 10];
        for row in &hist {
            assert!(total_variation(row, &global) <= 0.05);
        }
    }

    #[test]
    fn tiny_beta_concentrates_labels() {
        // Per-class Dir(0.01) sends each class nearly whole to one client, so
        // with 10 classes over 5 clients a client holds ~2 full classes and
        // its largest class carries ~0.6 of its data (Monte-Carlo over seeds
        // 0..9 gives 0.598). The balanced split sits at the 0.1 floor.
        let data = balanced_dataset(10, 100, 2);
        let mut skewed = 0.0;
        let mut balanced = 0.0;
        for seed in 0..10 {
            let plan = dirichlet_partition(&data, 5, 0.01, seed).unwrap();
            skewed += mean_max_class_mass(&plan, &data).unwrap();
            let plan = dirichlet_partition(&data, 5, 1e6, seed).unwrap();
            balanced += mean_max_class_mass(&plan, &data).unwrap();
        }
        skewed /= 10.0;
        balanced /= 10.0;
        assert!(skewed >= 0.55, "mean max-class mass {skewed}");
        assert!(balanced <= 0.15, "balanced mass {balanced}");
        assert!(skewed >= 3.0 * balanced);
        // On average a class lands nearly whole on a single client.
        let plan = dirichlet_partition(&data, 5, 0.01, 0).unwrap();
        let hist = label_histogram(&plan, &data).unwrap();
        let mean_share = (0..10)
            .map(|class| (0..5).map(|k| hist[k][class]).max().unwrap() as f64 / 100.0)
            .sum::<f64>()
            / 10.0;
        assert!(mean_share >= 0.8, "classes split across clients: {mean_share}");
    }

    #[test]
    fn skew_decreases_with_beta() {
        let data = balanced_dataset(10, 100, 3);
        let betas = [0.01, 0.1, 0.5, 5.0, 1e6];
        let mut curve = Vec::new();
        for &beta in &betas {
            let mut acc = 0.0;
            for seed in 0..10 {
                let plan = dirichlet_partition(&data, 5, beta, seed).unwrap();
                acc += mean_max_class_mass(&plan, &data).unwrap();
            }
            curve.push(acc / 10.0);
        }
        let mut inversions = 0;
        for w in curve.windows(2) {
            if w[1] > w[0] + 1e-12 {
                inversions += 1;
                assert!(w[1] - w[0] <= 0.02, "inversion too large: {curve:?}");
            }
        }
        assert!(inversions <= 1, "curve not monotone enough: {curve:?}");
    }

    #[test]
    fn dirichlet_rejects_bad_arguments() {
        let data = balanced_dataset(2, 2, 4);
        assert!(dirichlet_partition(&data, 1, 0.5, 0).is_err());
        assert!(dirichlet_partition(&data, 5, 0.5, 0).is_err()); // 4 samples, 5 clients
        assert!(dirichlet_partition(&data, 2, 0.0, 0).is_err());
        assert!(dirichlet_partition(&data, 2, -1.0, 0).is_err());
    }

    #[test]
    fn iid_split_is_even_and_close_to_global() {
        let data = balanced_dataset(10, 10, 5);
        let plan = iid_partition(&data, 5, 3).unwrap();
        for c in &plan.client_indices {
            assert_eq!(c.len(), 20);
        }
        assert_disjoint_exhaustive(&plan, 100);

        let data = balanced_dataset(10, 100, 6);
        let plan = iid_partition(&data, 5, 3).unwrap();
        let hist = label_histogram(&plan, &data).unwrap();
        let global = vec![0.1f64; 10];
        for row in &hist {
            assert!(total_variation(row, &global) <= 0.1);
        }
    }

    #[test]
    fn domain_partition_maps_clients_to_domains() {
        let w = make_world(10, 6, 4, 5.0, 1.0, 7).unwrap();
        let data = sample_dataset(&w, 5, 8).unwrap();
        let plan = domain_partition(&data, 6).unwrap();
        assert_disjoint_exhaustive(&plan, data.len());
        for &i in &plan.client_indices[3] {
            assert_eq!(data.samples[i].domain, 3);
        }
        // Every client sees the full label set (worldgen samples every pair).
        let hist = label_histogram(&plan, &data).unwrap();
        for row in &hist {
            assert!(row.iter().all(|&c| c > 0));
        }
        assert!(domain_partition(&data, 5).is_err());
    }

    #[test]
    fn histogram_rows_sum_to_client_sizes() {
        let data = balanced_dataset(10, 10, 9);
        let plan = iid_partition(&data, 5, 1).unwrap();
        let hist = label_histogram(&plan, &data).unwrap();
        for (row, indices) in hist.iter().zip(&plan.client_indices) {
            assert_eq!(row.iter().sum::<usize>(), indices.len());
        }
        // Out-of-range index is a contract violation.
        let mut bad = plan.clone();
        bad.client_indices[0].push(data.len());
        assert!(label_histogram(&bad, &data).is_err());
    }

    #[test]
    fn plans_are_deterministic() {
        let data = balanced_dataset(10, 20, 10);
        let a = dirichlet_partition(&data, 5, 0.5, 11).unwrap();
        let b = dirichlet_partition(&data, 5, 0.5, 11).unwrap();
        assert_eq!(a, b);
        let c = iid_partition(&data, 5, 11).unwrap();
        let d = iid_partition(&data, 5, 11).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn plan_csv_lists_every_assignment() {
        let data = balanced_dataset(3, 4, 12);
        let plan = iid_partition(&data, 3, 0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plan.csv");
        plan.export_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1 + data.len());
        assert!(text.starts_with("client_id,sample_index\n"));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn partitions_are_disjoint_and_exhaustive(
                beta in prop::sample::select(vec![0.01f64, 0.1, 0.5, 5.0, 1e6]),
                seed in 0u64..500,
                clients in 2usize..7,
            ) {
                let data = balanced_dataset(5, 20, 77);
                let plan = dirichlet_partition(&data, clients, beta, seed).unwrap();
                assert_disjoint_exhaustive(&plan, data.len());
                prop_assert!(plan.client_indices.iter().all(|c| !c.is_empty()));

                let plan = iid_partition(&data, clients, seed).unwrap();
                assert_disjoint_exhaustive(&plan, data.len());
            }

            #[test]
            fn largest_remainder_conserves_n(
                raw in proptest::collection::vec(0.0f64..1.0, 2..8),
                n in 1usize..500,
            ) {
                let sum: f64 = raw.iter().sum();
                prop_assume!(sum > 1e-9);
                let p: Vec<f64> = raw.iter().map(|v| v / sum).collect();
                let counts = largest_remainder(&p, n);
                prop_assert_eq!(counts.iter().sum::<usize>(), n);
            }
        }
    }
}
