//! Generative oracle.
//!
//! Stand-in for a pre-trained foundation generative model: each (class,
//! domain) pair gets an approximate distribution whose mean sits a
//! configurable fidelity gap away from the truth, prompts select those
//! distributions, and an optional memorization mechanism returns verbatim
//! elements of the oracle's own pretraining pool. Client data never enters
//! the oracle; class-level synthesis depends on (class, domain) ids alone.

use crate::error::{Error, Result};
use crate::privacy::cosine_similarity;
use crate::rng::{derive_seed, rng_for};
use crate::worldgen::{Dataset, LabeledSample, WorldSpec};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

mod stream {
    pub const MEANS: u64 = 0x0a01;
    pub const POOL: u64 = 0x0a02;
    pub const SYNTH: u64 = 0x0a03;
}

/// Which prompt strategy clients use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    ClassLevel,
    InstanceLevel,
}

/// The compact knowledge a client transmits. Class-level prompts name a
/// (class, domain); instance-level prompts add an 8-bit-per-coordinate
/// descriptor of one local sample.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Prompt {
    ClassLevel { class_id: u16, domain_id: u16 },
    InstanceLevel { class_id: u16, domain_id: u16, descriptor: Vec<u8> },
}

impl Prompt {
    pub fn class_id(&self) -> u16 {
        match self {
            Prompt::ClassLevel { class_id, .. } | Prompt::InstanceLevel { class_id, .. } => *class_id,
        }
    }

    pub fn domain_id(&self) -> u16 {
        match self {
            Prompt::ClassLevel { domain_id, .. } | Prompt::InstanceLevel { domain_id, .. } => *domain_id,
        }
    }

    pub fn kind(&self) -> PromptKind {
        match self {
            Prompt::ClassLevel { .. } => PromptKind::ClassLevel,
            Prompt::InstanceLevel { .. } => PromptKind::InstanceLevel,
        }
    }
}

/// Ordered prompts from one client.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    pub prompts: Vec<Prompt>,
    pub source_client: u16,
}

/// Immutable oracle state. `approx_means` carry the per-domain fidelity gap;
/// `mem_pool` is the oracle's own pretraining data (drawn from the true
/// world, never from any client).
#[derive(Debug, Clone)]
pub struct OracleState {
    pub num_classes: usize,
    pub num_domains: usize,
    pub feature_dim: usize,
    pub within_std: f64,
    pub fidelity_eps: Vec<f64>,
    pub mem_pool: Vec<LabeledSample>,
    pub p_mem: f64,
    pub instance_std: f64,
    pub seed: u64,
    bounds: (f64, f64),
    approx_means: Vec<Vec<f64>>,
}

impl OracleState {
    pub fn approx_mean(&self, class: usize, domain: usize) -> &[f64] {
        &self.approx_means[class * self.num_domains + domain]
    }

    /// Feature bounds the oracle dequantizes instance descriptors against.
    pub fn bounds(&self) -> (f64, f64) {
        self.bounds
    }
}

/// Build the oracle: true means perturbed by a deterministic unit direction
/// scaled to `fidelity_eps[domain]`, plus a fixed memorization pool sampled
/// from the true world.
pub fn pretrain_oracle(
    world: &WorldSpec,
    fidelity_eps_per_domain: &[f64],
    mem_pool_size: usize,
    p_mem: f64,
    instance_std: f64,
    seed: u64,
) -> Result<OracleState> {
    if fidelity_eps_per_domain.len() != world.num_domains {
        return Err(Error::Config(format!(
            "fidelity_eps has {} entries, world has {} domains",
            fidelity_eps_per_domain.len(),
            world.num_domains
        )));
    }
    if fidelity_eps_per_domain.iter().any(|&e| !(e >= 0.0 && e.is_finite())) {
        return Err(Error::Config("fidelity_eps entries must be nonnegative".into()));
    }
    if !(0.0..=1.0).contains(&p_mem) {
        return Err(Error::Config(format!("p_mem must be in [0, 1], got {p_mem}")));
    }
    if p_mem > 0.0 && mem_pool_size == 0 {
        return Err(Error::Config("p_mem > 0 requires a nonempty mem_pool".into()));
    }
    if !(instance_std > 0.0 && instance_std.is_finite()) {
        return Err(Error::Config(format!(
            "instance_std must be positive, got {instance_std}"
        )));
    }

    let mut rng = rng_for(seed, stream::MEANS);
    let mut approx_means = Vec::with_capacity(world.num_classes * world.num_domains);
    for class in 0..world.num_classes {
        for domain in 0..world.num_domains {
            let truth = world.mean(class, domain);
            let eps = fidelity_eps_per_domain[domain];
            if eps == 0.0 {
                approx_means.push(truth.to_vec());
                continue;
            }
            let dir = unit_direction(&mut rng, world.feature_dim);
            approx_means.push(truth.iter().zip(&dir).map(|(m, u)| m + eps * u).collect());
        }
    }

    let mut pool_rng = rng_for(seed, stream::POOL);
    let mut mem_pool = Vec::with_capacity(mem_pool_size);
    for _ in 0..mem_pool_size {
        let class = pool_rng.random_range(0..world.num_classes);
        let domain = pool_rng.random_range(0..world.num_domains);
        let mean = world.mean(class, domain);
        let features = mean
            .iter()
            .map(|m| {
                let z: f64 = pool_rng.sample(StandardNormal);
                (m + world.within_std * z) as f32
            })
            .collect();
        mem_pool.push(LabeledSample { features, label: class, domain });
    }

    Ok(OracleState {
        num_classes: world.num_classes,
        num_domains: world.num_domains,
        feature_dim: world.feature_dim,
        within_std: world.within_std,
        fidelity_eps: fidelity_eps_per_domain.to_vec(),
        mem_pool,
        p_mem,
        instance_std,
        seed,
        bounds: world.feature_bounds(),
        approx_means,
    })
}

fn unit_direction(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn id_u16(value: usize, what: &str) -> Result<u16> {
    u16::try_from(value)
        .map_err(|_| Error::Contract(format!("{what} {value} does not fit a 16-bit prompt id")))
}

/// One class-level prompt per distinct (class, domain) pair present in the
/// client's shard, ordered by (class, domain).
pub fn class_prompts(local_dataset: &Dataset, source_client: u16) -> Result<PromptSet> {
    if local_dataset.is_empty() {
        return Err(Error::Contract("class_prompts requires a nonempty local dataset".into()));
    }
    let mut pairs = BTreeSet::new();
    for s in &local_dataset.samples {
        pairs.insert((id_u16(s.label, "class")?, id_u16(s.domain, "domain")?));
    }
    let prompts = pairs
        .into_iter()
        .map(|(class_id, domain_id)| Prompt::ClassLevel { class_id, domain_id })
        .collect();
    Ok(PromptSet { prompts, source_client })
}

/// Uniform 8-bit quantization of one coordinate over [lo, hi], clamped.
pub fn quantize_feature(x: f64, lo: f64, hi: f64) -> u8 {
    let t = ((x - lo) / (hi - lo) * 255.0).round();
    t.clamp(0.0, 255.0) as u8
}

/// Inverse of `quantize_feature` up to the (hi - lo)/255 quantization bound.
pub fn dequantize_feature(q: u8, lo: f64, hi: f64) -> f64 {
    lo + (q as f64 / 255.0) * (hi - lo)
}

/// One instance-level prompt per local sample, descriptor = quantized features.
pub fn instance_prompts(
    local_dataset: &Dataset,
    world_bounds: (f64, f64),
    source_client: u16,
) -> Result<PromptSet> {
    let (lo, hi) = world_bounds;
    if !(lo < hi) {
        return Err(Error::Config(format!("world bounds must satisfy lo < hi, got ({lo}, {hi})")));
    }
    if local_dataset.is_empty() {
        return Err(Error::Contract("instance_prompts requires a nonempty local dataset".into()));
    }
    let mut prompts = Vec::with_capacity(local_dataset.len());
    for s in &local_dataset.samples {
        let descriptor = s.features.iter().map(|&x| quantize_feature(x as f64, lo, hi)).collect();
        prompts.push(Prompt::InstanceLevel {
            class_id: id_u16(s.label, "class")?,
            domain_id: id_u16(s.domain, "domain")?,
            descriptor,
        });
    }
    Ok(PromptSet { prompts, source_client })
}

/// Turn prompts into a synthetic dataset.
///
/// Class-level prompts emit `n_per_class_prompt` draws from the oracle's
/// approximate (class, domain) distribution; instance-level prompts emit one
/// draw around the dequantized descriptor. Independently per emission, with
/// probability `p_mem` the draw is replaced verbatim by the mem_pool element
/// nearest (cosine) to the prompt's center. Labels always come from the
/// prompt. Deterministic per (oracle, prompts, n, seed).
pub fn synthesize(
    oracle: &OracleState,
    aggregated_prompts: &[Prompt],
    n_per_class_prompt: usize,
    seed: u64,
) -> Result<Dataset> {
    if aggregated_prompts.is_empty() {
        return Err(Error::Contract("synthesize requires a nonempty prompt set".into()));
    }
    if n_per_class_prompt < 1 {
        return Err(Error::Config("n_per_class_prompt must be >= 1".into()));
    }

    let (lo, hi) = oracle.bounds;
    let mut rng = rng_for(derive_seed(oracle.seed, seed), stream::SYNTH);
    let mut class_nearest: Vec<Option<usize>> = vec![None; oracle.num_classes * oracle.num_domains];
    let mut samples = Vec::new();

    for prompt in aggregated_prompts {
        let class = prompt.class_id() as usize;
        let domain = prompt.domain_id() as usize;
        if class >= oracle.num_classes || domain >= oracle.num_domains {
            return Err(Error::Contract(format!(
                "prompt names (class {class}, domain {domain}); oracle knows {} x {}",
                oracle.num_classes, oracle.num_domains
            )));
        }
        let (center, std, count): (Vec<f64>, f64, usize) = match prompt {
            Prompt::ClassLevel { .. } => (
                oracle.approx_mean(class, domain).to_vec(),
                oracle.within_std,
                n_per_class_prompt,
            ),
            Prompt::InstanceLevel { descriptor, .. } => {
                if descriptor.len() != oracle.feature_dim {
                    return Err(Error::Contract(format!(
                        "descriptor has {} bytes, oracle feature_dim is {}",
                        descriptor.len(),
                        oracle.feature_dim
                    )));
                }
                (
                    descriptor.iter().map(|&q| dequantize_feature(q, lo, hi)).collect(),
                    oracle.instance_std,
                    1,
                )
            }
        };

        // Pool lookups are lazy: only computed once a memorization coin hits.
        let mut nearest: Option<usize> = match prompt {
            Prompt::ClassLevel { .. } => class_nearest[class * oracle.num_domains + domain],
            Prompt::InstanceLevel { .. } => None,
        };

        for _ in 0..count {
            let mut features: Vec<f32> = center
                .iter()
                .map(|m| {
                    let z: f64 = rng.sample(StandardNormal);
                    (m + std * z) as f32
                })
                .collect();
            if rng.random::<f64>() < oracle.p_mem {
                let idx = match nearest {
                    Some(idx) => idx,
                    None => {
                        let idx = nearest_pool_index(oracle, &center)?;
                        nearest = Some(idx);
                        if matches!(prompt, Prompt::ClassLevel { .. }) {
                            class_nearest[class * oracle.num_domains + domain] = Some(idx);
                        }
                        idx
                    }
                };
                features = oracle.mem_pool[idx].features.clone();
            }
            samples.push(LabeledSample { features, label: class, domain });
        }
    }

    Ok(Dataset {
        samples,
        world_id: oracle.seed,
        num_classes: oracle.num_classes,
        num_domains: oracle.num_domains,
        feature_dim: oracle.feature_dim,
    })
}

/// Mem-pool element nearest to `center` by cosine; ties to the lower index.
fn nearest_pool_index(oracle: &OracleState, center: &[f64]) -> Result<usize> {
    let center_f32: Vec<f32> = center.iter().map(|&v| v as f32).collect();
    let mut best: Option<(usize, f64)> = None;
    for (j, p) in oracle.mem_pool.iter().enumerate() {
        let Some(sim) = cosine_similarity(&center_f32, &p.features) else {
            continue;
        };
        if best.map_or(true, |(_, b)| sim > b) {
            best = Some((j, sim));
        }
    }
    best.map(|(j, _)| j)
        .ok_or_else(|| Error::Protocol("memorization hit with no usable mem_pool element".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worldgen::{make_world, sample_dataset};

    fn world() -> WorldSpec {
        make_world(4, 3, 8, 5.0, 1.0, 21).unwrap()
    }

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn zero_eps_reproduces_true_means_exactly() {
        let w = world();
        let o = pretrain_oracle(&w, &[0.0, 0.0, 0.0], 10, 0.0, 0.25, 5).unwrap();
        for c in 0..4 {
            for d in 0..3 {
                assert_eq!(o.approx_mean(c, d), w.mean(c, d));
            }
        }
    }

    #[test]
    fn eps_sets_the_perturbation_norm_per_domain() {
        let w = world();
        let o = pretrain_oracle(&w, &[0.0, 1.0, 3.0], 10, 0.0, 0.25, 5).unwrap();
        for c in 0..4 {
            for (d, expect) in [(0usize, 0.0f64), (1, 1.0), (2, 3.0)] {
                let diff: Vec<f64> = o
                    .approx_mean(c, d)
                    .iter()
                    .zip(w.mean(c, d))
                    .map(|(a, t)| a - t)
                    .collect();
                assert!((norm(&diff) - expect).abs() <= 1e-6, "class {c} domain {d}");
            }
        }
    }

    #[test]
    fn mem_pool_is_sized_and_disjoint_from_client_data() {
        let w = world();
        let o = pretrain_oracle(&w, &[0.0; 3], 100, 0.0, 0.25, 5).unwrap();
        assert_eq!(o.mem_pool.len(), 100);
        let client_data = sample_dataset(&w, 10, 77).unwrap();
        for pool in &o.mem_pool {
            assert!(client_data.samples.iter().all(|s| s.features != pool.features));
        }
    }

    #[test]
    fn pretrain_validates_its_knobs() {
        let w = world();
        assert!(pretrain_oracle(&w, &[0.0; 2], 10, 0.0, 0.25, 5).is_err());
        assert!(pretrain_oracle(&w, &[-1.0, 0.0, 0.0], 10, 0.0, 0.25, 5).is_err());
        assert!(pretrain_oracle(&w, &[0.0; 3], 10, 1.5, 0.25, 5).is_err());
        assert!(pretrain_oracle(&w, &[0.0; 3], 0, 0.5, 0.25, 5).is_err());
        assert!(pretrain_oracle(&w, &[0.0; 3], 10, 0.0, 0.0, 5).is_err());
    }

    #[test]
    fn class_prompts_dedup_by_class_and_domain() {
        let w = world();
        let data = sample_dataset(&w, 25, 3).unwrap();
        // Client holding only labels {0, 3} in domain 0.
        let indices: Vec<usize> = data
            .samples
            .iter()
            .enumerate()
            .filter(|(_, s)| (s.label == 0 || s.label == 3) && s.domain == 0)
            .map(|(i, _)| i)
            .collect();
        let local = data.subset(&indices).unwrap();
        let set = class_prompts(&local, 2).unwrap();
        assert_eq!(set.prompts.len(), 2);
        assert_eq!(set.source_client, 2);

        // Many samples, one domain: count equals distinct classes.
        let single: Vec<usize> = data
            .samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.domain == 1)
            .map(|(i, _)| i)
            .collect();
        let local = data.subset(&single).unwrap();
        let set = class_prompts(&local, 0).unwrap();
        assert_eq!(set.prompts.len(), 4);
        assert!(set.prompts.iter().all(|p| p.domain_id() == 1));
        // Sorted by (class, domain).
        let ids: Vec<u16> = set.prompts.iter().map(|p| p.class_id()).collect();
        assert_eq!(ids, vec![0, 1, 2, 3]);

        let empty = data.subset(&[]).unwrap();
        assert!(class_prompts(&empty, 0).is_err());
    }

    #[test]
    fn quantizer_hits_endpoints_and_bound() {
        let (lo, hi) = (-2.0, 6.0);
        assert_eq!(quantize_feature(lo, lo, hi), 0);
        assert_eq!(quantize_feature(hi, lo, hi), 255);
        assert_eq!(quantize_feature(lo - 10.0, lo, hi), 0);
        assert_eq!(quantize_feature(hi + 10.0, lo, hi), 255);
        let bound = (hi - lo) / 255.0;
        for i in 0..1000 {
            let x = lo + (hi - lo) * (i as f64 / 999.0);
            let back = dequantize_feature(quantize_feature(x, lo, hi), lo, hi);
            assert!((back - x).abs() <= bound, "x {x} back {back}");
        }
    }

    #[test]
    fn instance_prompts_cover_every_sample() {
        let w = world();
        let data = sample_dataset(&w, 10, 9).unwrap(); // 4*3*10 = 120 samples
        let set = instance_prompts(&data, w.feature_bounds(), 1).unwrap();
        assert_eq!(set.prompts.len(), 120);
        match &set.prompts[0] {
            Prompt::InstanceLevel { descriptor, .. } => assert_eq!(descriptor.len(), 8),
            _ => panic!("expected instance prompt"),
        }
        assert!(instance_prompts(&data, (3.0, 3.0), 1).is_err());
        assert!(instance_prompts(&data, (5.0, -5.0), 1).is_err());
    }

    #[test]
    fn synthesize_counts_and_labels_follow_prompts() {
        let w = world();
        let o = pretrain_oracle(&w, &[0.0; 3], 10, 0.0, 0.25, 5).unwrap();
        let prompts: Vec<Prompt> = (0..4)
            .map(|c| Prompt::ClassLevel { class_id: c, domain_id: 1 })
            .collect();
        let syn = synthesize(&o, &prompts, 200, 3).unwrap();
        assert_eq!(syn.len(), 800);
        let mut counts = vec![0usize; 4];
        for s in &syn.samples {
            counts[s.label] += 1;
            assert_eq!(s.domain, 1);
        }
        assert!(counts.iter().all(|&c| c == 200));

        assert!(synthesize(&o, &[], 10, 3).is_err());
        assert!(synthesize(&o, &prompts, 0, 3).is_err());
        let bad = [Prompt::ClassLevel { class_id: 9, domain_id: 0 }];
        assert!(synthesize(&o, &bad, 1, 3).is_err());
    }

    #[test]
    fn faithful_oracle_reproduces_class_means() {
        let w = make_world(2, 1, 6, 5.0, 1.0, 31).unwrap();
        let o = pretrain_oracle(&w, &[0.0], 10, 0.0, 0.25, 5).unwrap();
        let prompts = [Prompt::ClassLevel { class_id: 0, domain_id: 0 }];
        let n = 10_000usize;
        let syn = synthesize(&o, &prompts, n, 1).unwrap();
        let tol = 3.0 * w.within_std / (n as f64).sqrt();
        for j in 0..6 {
            let mean = syn.samples.iter().map(|s| s.features[j] as f64).sum::<f64>() / n as f64;
            assert!((mean - w.mean(0, 0)[j]).abs() <= tol, "coord {j}");
        }
    }

    #[test]
    fn memorization_rate_is_binomial() {
        let w = world();
        let o = pretrain_oracle(&w, &[0.0; 3], 50, 0.1, 0.25, 5).unwrap();
        let prompts: Vec<Prompt> = (0..4)
            .flat_map(|c| (0..3).map(move |d| Prompt::ClassLevel { class_id: c, domain_id: d }))
            .collect();
        // 12 prompts x 167 = 2004 emissions, close to the spec's 2000.
        let syn = synthesize(&o, &prompts, 167, 9).unwrap();
        let total = syn.len() as f64;
        let verbatim = syn
            .samples
            .iter()
            .filter(|s| o.mem_pool.iter().any(|p| p.features == s.features))
            .count() as f64;
        let sigma = (total * 0.1 * 0.9).sqrt();
        assert!(
            (verbatim - total * 0.1).abs() <= 3.0 * sigma,
            "verbatim {verbatim} of {total}"
        );

        let o0 = pretrain_oracle(&w, &[0.0; 3], 50, 0.0, 0.25, 5).unwrap();
        let syn0 = synthesize(&o0, &prompts, 20, 9).unwrap();
        let hits = syn0
            .samples
            .iter()
            .filter(|s| o0.mem_pool.iter().any(|p| p.features == s.features))
            .count();
        assert_eq!(hits, 0);
    }

    #[test]
    fn class_level_synthesis_ignores_client_feature_values() {
        // Two clients with the same (class, domain) sets but different
        // feature values produce identical prompts, hence identical data.
        let w = world();
        let a = sample_dataset(&w, 5, 1).unwrap();
        let b = sample_dataset(&w, 5, 2).unwrap();
        let pa = class_prompts(&a, 0).unwrap();
        let pb = class_prompts(&b, 0).unwrap();
        assert_eq!(pa.prompts, pb.prompts);
        let o = pretrain_oracle(&w, &[0.5; 3], 10, 0.0, 0.25, 5).unwrap();
        let sa = synthesize(&o, &pa.prompts, 5, 4).unwrap();
        let sb = synthesize(&o, &pb.prompts, 5, 4).unwrap();
        assert_eq!(sa, sb);
    }

    #[test]
    fn instance_prompts_track_sources_closer_than_class_prompts() {
        let w = make_world(3, 1, 8, 5.0, 1.0, 41).unwrap();
        let data = sample_dataset(&w, 40, 6).unwrap();
        // Fidelity gap well above the quantization bound.
        let o = pretrain_oracle(&w, &[2.0], 10, 0.0, 0.25, 5).unwrap();
        let (lo, hi) = w.feature_bounds();
        let quant_bound = (hi - lo) / 255.0 * (8.0f64).sqrt();

        let inst = instance_prompts(&data, (lo, hi), 0).unwrap();
        let syn_inst = synthesize(&o, &inst.prompts, 1, 7).unwrap();
        let dist = |a: &[f32], b: &[f32]| {
            a.iter()
                .zip(b)
                .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        let mean_inst: f64 = syn_inst
            .samples
            .iter()
            .zip(&data.samples)
            .map(|(s, src)| dist(&s.features, &src.features))
            .sum::<f64>()
            / data.len() as f64;
        assert!(
            mean_inst <= quant_bound + 3.0 * o.instance_std * (8.0f64).sqrt(),
            "instance synthetic drifted {mean_inst}"
        );

        // Class-level synthetic-to-source distance under the same budget.
        let cls = class_prompts(&data, 0).unwrap();
        let syn_cls = synthesize(&o, &cls.prompts, 40, 7).unwrap();
        let mut by_class: Vec<Vec<&LabeledSample>> = vec![Vec::new(); 3];
        for s in &syn_cls.samples {
            by_class[s.label].push(s);
        }
        let mut total = 0.0;
        for src in &data.samples {
            let nearest_same_class = by_class[src.label]
                .iter()
                .map(|s| dist(&s.features, &src.features))
                .fold(f64::INFINITY, f64::min);
            total += nearest_same_class;
        }
        let mean_cls = total / data.len() as f64;
        assert!(
            mean_inst < mean_cls,
            "instance mean {mean_inst} should beat class-level nearest {mean_cls}"
        );
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(16))]

            #[test]
            fn every_synthetic_label_matches_its_prompt(
                seed in 0u64..100,
                n in 1usize..6,
            ) {
                let w = make_world(3, 2, 4, 5.0, 1.0, 17).unwrap();
                let o = pretrain_oracle(&w, &[0.5, 1.0], 20, 0.3, 0.25, seed).unwrap();
                let prompts: Vec<Prompt> = (0..3)
                    .flat_map(|c| (0..2).map(move |d| Prompt::ClassLevel { class_id: c, domain_id: d }))
                    .collect();
                let syn = synthesize(&o, &prompts, n, seed).unwrap();
                let mut cursor = 0;
                for p in &prompts {
                    for _ in 0..n {
                        let s = &syn.samples[cursor];
                        prop_assert_eq!(s.label, p.class_id() as usize);
                        prop_assert_eq!(s.domain, p.domain_id() as usize);
                        cursor += 1;
                    }
                }
            }
        }
    }
}
